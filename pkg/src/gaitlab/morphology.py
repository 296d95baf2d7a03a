"""Modular robot bodies: tree genotype, lattice placement, traits, suite selection.

A body is a tree rooted at a ``Core`` module.  Every module occupies one cell of
a 2-D integer lattice.  Directions are indexed counter-clockwise::

    0: +x    1: +y    2: -x    3: -y

The core's four slots point in directions 0..3.  A brick's three free faces are
slot 0 (straight on), slot 1 (left turn) and slot 2 (right turn) relative to the
direction in which it was attached.  A hinge has a single slot, straight on.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CollisionError, DuplicateError, GenerationError

DIRECTIONS = ((1, 0), (0, 1), (-1, 0), (0, -1))
MAX_MODULES = 30
NEIGHBOR_RADIUS = 2

TRAIT_NAMES = (
    "size",
    "num_joints",
    "proportion",
    "branching",
    "num_limbs",
    "coverage",
    "symmetry",
)


class ModuleKind(str, enum.Enum):
    CORE = "Core"
    BRICK = "Brick"
    HINGE = "ActiveHinge"

    @property
    def n_slots(self) -> int:
        return {ModuleKind.CORE: 4, ModuleKind.BRICK: 3, ModuleKind.HINGE: 1}[self]


# slot -> turn (in quarter turns) relative to the module's own heading
_SLOT_TURNS = {
    ModuleKind.CORE: (0, 1, 2, 3),
    ModuleKind.BRICK: (0, 1, 3),
    ModuleKind.HINGE: (0,),
}


@dataclass(frozen=True)
class Module:
    """One node of a body tree; ``children`` holds ``(slot, Module)`` sorted by slot."""

    kind: ModuleKind
    children: tuple[tuple[int, "Module"], ...] = ()

    def __post_init__(self):
        slots = [s for s, _ in self.children]
        if len(set(slots)) != len(slots):
            raise ValueError(f"duplicate slot in {self.kind.value} children: {slots}")
        for s in slots:
            if not 0 <= s < self.kind.n_slots:
                raise ValueError(f"slot {s} out of range for {self.kind.value}")
        for _, child in self.children:
            if child.kind is ModuleKind.CORE:
                raise ValueError("Core may only appear at the root")
        object.__setattr__(self, "children", tuple(sorted(self.children, key=lambda c: c[0])))

    def walk(self, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], "Module"]]:
        """Pre-order traversal yielding ``(path, module)``; path = slot indices from the root."""
        yield path, self
        for slot, child in self.children:
            yield from child.walk(path + (slot,))

    def count(self) -> int:
        return sum(1 for _ in self.walk())


@dataclass(frozen=True)
class MorphologyTree:
    root: Module

    def __post_init__(self):
        if self.root.kind is not ModuleKind.CORE:
            raise ValueError("tree root must be a Core module")

    def modules(self) -> list[tuple[tuple[int, ...], Module]]:
        return list(self.root.walk())

    @property
    def n_modules(self) -> int:
        return self.root.count()

    @property
    def n_joints(self) -> int:
        return sum(1 for _, m in self.root.walk() if m.kind is ModuleKind.HINGE)


@dataclass(frozen=True)
class RobotSpec:
    name: str
    tree: MorphologyTree


@dataclass
class GridMap:
    """Lattice placement of a tree.  All dicts are keyed by module path."""

    cells: dict[tuple[int, ...], tuple[int, int]]
    kinds: dict[tuple[int, ...], ModuleKind]
    headings: dict[tuple[int, ...], int]
    joints: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def joint_cells(self) -> list[tuple[int, int]]:
        return [self.cells[j] for j in self.joints]

    def bounding_box(self) -> tuple[int, int]:
        xs = [c[0] for c in self.cells.values()]
        ys = [c[1] for c in self.cells.values()]
        return max(xs) - min(xs) + 1, max(ys) - min(ys) + 1


# ---------------------------------------------------------------------------
# construction helpers


def core(*children: tuple[int, Module]) -> Module:
    return Module(ModuleKind.CORE, tuple(children))


def brick(*children: tuple[int, Module]) -> Module:
    return Module(ModuleKind.BRICK, tuple(children))


def hinge(child: Module | None = None) -> Module:
    return Module(ModuleKind.HINGE, ((0, child),) if child is not None else ())


def chain(*kinds: str) -> Module | None:
    """Build a straight chain from letters ``H`` (hinge) and ``B`` (brick)."""
    node: Module | None = None
    for k in reversed(kinds):
        if k == "H":
            node = hinge(node)
        elif k == "B":
            node = brick((0, node)) if node is not None else brick()
        else:
            raise ValueError(f"unknown chain letter {k!r}")
    return node


# ---------------------------------------------------------------------------
# operations


def build_grid(tree: MorphologyTree) -> GridMap:
    """Place every module on the lattice; raise CollisionError on overlap."""
    cells: dict[tuple[int, ...], tuple[int, int]] = {}
    kinds: dict[tuple[int, ...], ModuleKind] = {}
    headings: dict[tuple[int, ...], int] = {}
    occupied: dict[tuple[int, int], tuple[int, ...]] = {}
    joints: list[tuple[int, ...]] = []

    def place(path, module, cell, heading):
        if cell in occupied:
            raise CollisionError(f"modules {occupied[cell]} and {path} both at cell {cell}")
        occupied[cell] = path
        cells[path] = cell
        kinds[path] = module.kind
        headings[path] = heading
        if module.kind is ModuleKind.HINGE:
            joints.append(path)
        for slot, child in module.children:
            d = (heading + _SLOT_TURNS[module.kind][slot]) % 4
            dx, dy = DIRECTIONS[d]
            place(path + (slot,), child, (cell[0] + dx, cell[1] + dy), d)

    place((), tree.root, (0, 0), 0)
    return GridMap(cells=cells, kinds=kinds, headings=headings, joints=joints)


def neighbor_sets(grid: GridMap, radius: int = NEIGHBOR_RADIUS) -> dict[int, set[int]]:
    """Joint index -> indices of other joints within Manhattan distance ``radius``."""
    jc = grid.joint_cells
    out: dict[int, set[int]] = {i: set() for i in range(len(jc))}
    for i, j in itertools.combinations(range(len(jc)), 2):
        if abs(jc[i][0] - jc[j][0]) + abs(jc[i][1] - jc[j][1]) <= radius:
            out[i].add(j)
            out[j].add(i)
    return out


def neighbor_pairs(grid: GridMap) -> list[tuple[int, int]]:
    """Unordered neighbour pairs ``(i, j)``, ``i < j``, in lexicographic order."""
    nbrs = neighbor_sets(grid)
    return sorted((i, j) for i in nbrs for j in nbrs[i] if i < j)


def weight_count(tree: MorphologyTree) -> int:
    grid = build_grid(tree)
    return len(grid.joints) + len(neighbor_pairs(grid))


def _symmetry(cells: Iterable[tuple[int, int]]) -> float:
    cells = set(cells)
    best = 0.0
    for axis in (0, 1):
        off = [c for c in cells if c[axis] != 0]
        if not off:
            continue
        hit = 0
        for c in off:
            m = (-c[0], c[1]) if axis == 0 else (c[0], -c[1])
            hit += m in cells
        best = max(best, hit / len(off))
    return best


def compute_traits(
    tree: MorphologyTree, grid: GridMap | None = None, max_modules: int = MAX_MODULES
) -> np.ndarray:
    """Seven body descriptors in [0, 1], ordered as ``TRAIT_NAMES``.

    symmetry is the best fraction of off-axis cells whose mirror image across the
    core's x or y axis is also occupied; a body with no off-axis cell scores 0.
    """
    if grid is None:
        grid = build_grid(tree)
    mods = tree.modules()
    n = len(mods)
    n_joints = len(grid.joints)

    size = min(n / max_modules, 1.0)
    joints = n_joints / (n - 1) if n > 1 else 0.0
    w, h = grid.bounding_box()
    proportion = min(w, h) / max(w, h)
    n_branch = sum(1 for _, m in mods if len(m.children) >= 2)
    max_branch = (n - 1) // 2
    branching = n_branch / max_branch if max_branch > 0 else 0.0
    leaves = sum(1 for p, m in mods if p and not m.children)
    limbs = min(leaves / 4.0, 1.0)
    coverage = n / (w * h)
    symmetry = _symmetry(grid.cells.values())

    return np.array([size, joints, proportion, branching, limbs, coverage, symmetry])


def random_morphology(
    rng: np.random.Generator,
    max_modules: int,
    hinge_prob: float = 0.5,
    max_retries: int = 100,
) -> MorphologyTree:
    """Grow a random collision-free body with at least one joint.

    Modules are attached one at a time to a uniformly chosen free slot whose
    target cell is empty, so collisions are avoided by construction.
    """
    if max_modules < 1:
        raise ValueError("max_modules must be >= 1")
    for _ in range(max_retries):
        target = int(rng.integers(2, max_modules + 1)) if max_modules >= 2 else 1
        # mutable tree: path -> [kind, heading, {slot: path}]
        kinds = {(): ModuleKind.CORE}
        heads = {(): 0}
        cells = {(): (0, 0)}
        occupied = {(0, 0)}
        while len(kinds) < target:
            free = []
            for path, kind in kinds.items():
                for slot, turn in enumerate(_SLOT_TURNS[kind]):
                    if path + (slot,) in kinds:
                        continue
                    d = (heads[path] + turn) % 4
                    c = (cells[path][0] + DIRECTIONS[d][0], cells[path][1] + DIRECTIONS[d][1])
                    if c not in occupied:
                        free.append((path + (slot,), d, c))
            if not free:
                break
            path, d, c = free[int(rng.integers(len(free)))]
            kinds[path] = ModuleKind.HINGE if rng.random() < hinge_prob else ModuleKind.BRICK
            heads[path] = d
            cells[path] = c
            occupied.add(c)
        if not any(k is ModuleKind.HINGE for k in kinds.values()):
            continue
        return MorphologyTree(_freeze(kinds))
    raise GenerationError(f"no valid body with >= 1 joint after {max_retries} attempts")


def _freeze(kinds: dict[tuple[int, ...], ModuleKind], path: tuple[int, ...] = ()) -> Module:
    kids = sorted(p for p in kinds if len(p) == len(path) + 1 and p[: len(path)] == path)
    return Module(kinds[path], tuple((p[-1], _freeze(kinds, p)) for p in kids))


def maxmin_select(points: np.ndarray, k: int, initial: Sequence[int] = ()) -> list[int]:
    """Greedy max-min subset of row indices under Euclidean distance.

    With no ``initial`` indices the selection is seeded with the farthest pair.
    Ties resolve to the lowest index.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if k > n:
        raise ValueError(f"cannot select {k} of {n}")
    dist = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    chosen = list(dict.fromkeys(initial))
    if len(chosen) > k:
        raise ValueError("more initial picks than k")
    if not chosen:
        if k == 0:
            return []
        if n == 1 or k == 1:
            return [0]
        i, j = np.unravel_index(np.argmax(dist), dist.shape)
        chosen = [int(min(i, j)), int(max(i, j))]
    while len(chosen) < k:
        rest = np.array([i for i in range(n) if i not in chosen])
        d_min = dist[np.ix_(rest, chosen)].min(axis=1)
        chosen.append(int(rest[np.argmax(d_min)]))
    return chosen


def select_test_suite(
    pop: Sequence[RobotSpec], k: int, keep: Sequence[str] = ()
) -> list[RobotSpec]:
    """Pick ``k`` robots spreading out over trait space; ``keep`` names are always included first."""
    names = [r.name for r in pop]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateError(f"duplicate robot names: {dup}")
    traits = np.array([compute_traits(r.tree) for r in pop])
    initial = [names.index(n) for n in keep]
    return [pop[i] for i in maxmin_select(traits, k, initial)]


# ---------------------------------------------------------------------------
# built-in bodies


def _spider() -> Module:
    return core(*((s, chain("H", "B", "H", "B")) for s in range(4)))


def _snake() -> Module:
    return core((0, chain(*("HB" * 8))))


def _gecko_tail(extra: bool = False) -> Module:
    # spine ending in a brick with one hinged leg on each side
    hip = brick((1, chain("H", "B")), (2, chain("H", "B")))
    if extra:
        hip = brick((0, chain("H", "B")), (1, chain("H", "B")), (2, chain("H", "B")))
    return hinge(brick((0, hinge(hip))))


def _gecko() -> Module:
    return core((1, chain("H", "B")), (2, _gecko_tail()), (3, chain("H", "B")))


def _baby_a() -> Module:
    # Gecko child: longer front legs and a hinged tail on the hip brick
    return core(
        (0, chain("B", "H")),
        (1, chain("H", "B", "H")),
        (2, _gecko_tail()),
        (3, chain("H", "B")),
    )


def _baby_b() -> Module:
    # Spider child: spider legs in front and left (the left one hinge-tipped),
    # a Gecko hip section behind and a brick-first leg on the right
    return core(
        (0, chain("H", "B", "H", "B")),
        (1, chain("H", "B", "H", "B", "H")),
        (2, _gecko_tail()),
        (3, chain("B", "H", "B", "H")),
    )


FIXTURE_NAMES = ("Spider", "Gecko", "Snake", "BabyA", "BabyB")


def fixtures() -> list[RobotSpec]:
    """The five hand-built bodies, in the order Spider, Gecko, Snake, BabyA, BabyB."""
    builders = (_spider, _gecko, _snake, _baby_a, _baby_b)
    return [RobotSpec(n, MorphologyTree(b())) for n, b in zip(FIXTURE_NAMES, builders)]


def fixture(name: str) -> RobotSpec:
    for r in fixtures():
        if r.name == name:
            return r
    raise KeyError(name)


# ---------------------------------------------------------------------------
# JSON


def module_to_dict(module: Module, slot: int | None = None) -> dict:
    d: dict = {"kind": module.kind.value}
    if slot is not None:
        d["slot"] = slot
    d["children"] = [module_to_dict(c, s) for s, c in module.children]
    return d


def module_from_dict(d: dict) -> Module:
    kind = ModuleKind(d["kind"])
    kids = tuple((int(c["slot"]), module_from_dict(c)) for c in d.get("children", []))
    return Module(kind, kids)


def robot_to_dict(robot: RobotSpec) -> dict:
    return {"name": robot.name, "body": module_to_dict(robot.tree.root)}


def robot_from_dict(d: dict) -> RobotSpec:
    tree = MorphologyTree(module_from_dict(d["body"]))
    build_grid(tree)
    return RobotSpec(d["name"], tree)


def save_suite(robots: Sequence[RobotSpec], path: str | Path) -> None:
    names = [r.name for r in robots]
    if len(set(names)) != len(names):
        raise DuplicateError(f"duplicate robot names in suite: {names}")
    Path(path).write_text(json.dumps([robot_to_dict(r) for r in robots], indent=1) + "\n")


def load_suite(path: str | Path) -> list[RobotSpec]:
    robots = [robot_from_dict(d) for d in json.loads(Path(path).read_text())]
    names = [r.name for r in robots]
    if len(set(names)) != len(names):
        raise DuplicateError(f"duplicate robot names in suite file {path}")
    return robots
