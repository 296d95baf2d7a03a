"""Command-line orchestration: suite | run | analyze | landscape.

Output layout under ``<out>/<suite-name>/``::

    manifest.json                 experiment configuration of the last ``run``
    suite.json                    copy of the robot suite
    <robot>/<learner>/<rep>.jsonl one run trace per repetition
    analysis/                     report.csv, report.json, summaries.csv,
                                  champions.json, curves/*.csv|png, landscape_*
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import GaitlabError, IncompleteGridError
from .landscape import DEFAULT_RESOLUTION, DEFAULT_SIGMA, LandscapePoint, export_landscape, interpolate
from .learners import BUDGET, LEARNERS, Objective, RunTrace, make_learner, run_learner
from .metrics import RunSummary, analyze_suite, best_so_far, champions, mean_curve, summarize
from .morphology import (
    FIXTURE_NAMES,
    TRAIT_NAMES,
    RobotSpec,
    compute_traits,
    fixtures,
    load_suite,
    random_morphology,
    robot_from_dict,
    robot_to_dict,
    save_suite,
    select_test_suite,
)
from .sim import SimConfig, evaluate

log = logging.getLogger("gaitlab")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(text: str) -> int:
    h = FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True, order=True)
class RunKey:
    robot: str
    learner: str
    rep: int

    def seed(self, base_seed: int) -> int:
        return fnv1a64(f"{base_seed}/{self.robot}/{self.learner}/{self.rep}")

    def path(self, root: Path) -> Path:
        return root / self.robot / self.learner / f"{self.rep}.jsonl"


@dataclass
class ExperimentConfig:
    suite: str
    learners: list[str] = field(default_factory=lambda: list(LEARNERS))
    repetitions: int = 30
    budget: int = BUDGET
    seed: int = 0
    out: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        unknown = set(self.learners) - set(LEARNERS)
        if unknown:
            raise ValueError(f"unknown learners: {sorted(unknown)}")

    @property
    def suite_name(self) -> str:
        return Path(self.suite).stem

    @property
    def root(self) -> Path:
        return Path(self.out) / self.suite_name

    def keys(self, robots: Sequence[RobotSpec]) -> list[RunKey]:
        return [RunKey(r.name, l, k) for r in robots for l in self.learners for k in range(self.repetitions)]


def robot_objective(robot: RobotSpec, config: SimConfig | None = None) -> Objective:
    from .cpg import build_network

    config = config or SimConfig()
    dim = build_network(robot).n_weights
    return Objective(dim, lambda w: evaluate(robot, w, config).speed)


def execute_run(robot_doc: dict, key: RunKey, seed: int, budget: int, path: str) -> str:
    """Run one learner on one robot and write its trace atomically; returns the path."""
    robot = robot_from_dict(robot_doc)
    obj = robot_objective(robot)
    learner = make_learner(key.learner, obj.dim, np.random.default_rng(seed), budget)
    trace = run_learner(learner, obj, budget, robot.name, seed)
    if len(trace) != budget:
        raise RuntimeError(f"{key}: trace has {len(trace)} records, expected {budget}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(trace.to_jsonl())
    os.replace(tmp, path)
    return str(path)


def run_experiment(cfg: ExperimentConfig) -> tuple[list[RunKey], list[tuple[RunKey, str]]]:
    """Execute every run whose trace file is absent; returns ``(done, failed)``."""
    robots = load_suite(cfg.suite)
    root = cfg.root
    root.mkdir(parents=True, exist_ok=True)
    save_suite(robots, root / "suite.json")
    (root / "manifest.json").write_text(json.dumps(asdict(cfg), indent=1) + "\n")
    if cfg.budget != BUDGET:
        log.warning("evaluation budget overridden: %d instead of %d", cfg.budget, BUDGET)

    docs = {r.name: robot_to_dict(r) for r in robots}
    todo = [k for k in cfg.keys(robots) if not k.path(root).exists()]
    log.info("%d of %d runs to execute", len(todo), len(cfg.keys(robots)))
    done: list[RunKey] = []
    failed: list[tuple[RunKey, str]] = []

    def job(k):
        return (docs[k.robot], k, k.seed(cfg.seed), cfg.budget, str(k.path(root)))

    if cfg.workers <= 1:
        for k in todo:
            try:
                execute_run(*job(k))
                done.append(k)
            except Exception as exc:  # keep going; reported at the end
                log.error("run %s failed: %s", k, exc)
                failed.append((k, repr(exc)))
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {pool.submit(execute_run, *job(k)): k for k in todo}
            for fut in as_completed(futures):
                k = futures[fut]
                try:
                    fut.result()
                    done.append(k)
                except Exception as exc:
                    log.error("run %s failed: %s", k, exc)
                    failed.append((k, repr(exc)))
    return sorted(done), sorted(failed)


def load_manifest(root: Path) -> ExperimentConfig:
    path = root / "manifest.json"
    if not path.exists():
        raise GaitlabError(f"no manifest at {path}; run the 'run' subcommand first")
    return ExperimentConfig(**json.loads(path.read_text()))


def collect(root: Path) -> tuple[ExperimentConfig, list[RobotSpec], dict[RunKey, RunTrace]]:
    cfg = load_manifest(root)
    robots = load_suite(root / "suite.json")
    missing = [k for k in cfg.keys(robots) if not k.path(root).exists()]
    if missing:
        raise IncompleteGridError(missing)
    traces = {}
    for k in cfg.keys(robots):
        t = RunTrace.read(k.path(root), k.learner, k.robot, k.seed(cfg.seed))
        if len(t) != cfg.budget:
            raise IncompleteGridError([f"{k} has {len(t)} of {cfg.budget} records"])
        traces[k] = t
    return cfg, robots, traces


def summaries_of(traces: dict[RunKey, RunTrace]) -> list[RunSummary]:
    return [summarize(t, k.rep) for k, t in sorted(traces.items())]


def analyze(root: Path, alpha: float = 0.05, figures: bool = True):
    cfg, robots, traces = collect(root)
    summaries = summaries_of(traces)
    report = analyze_suite(summaries, alpha, cfg.learners, [r.name for r in robots], cfg.repetitions)
    out = root / "analysis"
    (out / "curves").mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.json").write_text(report.to_json() + "\n")
    with open(out / "summaries.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["robot", "learner", "rep", "best_fitness", "aes"])
        for s in summaries:
            wr.writerow([s.robot, s.learner, s.seed, repr(s.best_fitness), s.aes])
    (out / "champions.json").write_text(json.dumps(champions(summaries, report), indent=1) + "\n")

    for r in robots:
        curves = {}
        for l in cfg.learners:
            runs = [best_so_far(traces[RunKey(r.name, l, k)]) for k in range(cfg.repetitions)]
            curves[l] = mean_curve(runs)
        with open(out / "curves" / f"{r.name}.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["eval"] + [f"{l}_{c}" for l in cfg.learners for c in ("mean", "lo", "hi")])
            for i in range(cfg.budget):
                wr.writerow([i + 1] + [repr(float(curves[l][c][i])) for l in cfg.learners for c in range(3)])
        if figures:
            from .plotting import plot_curves

            plot_curves(r.name, curves, out / "curves" / f"{r.name}.png")
    return report


def landscapes(root: Path, traits: tuple[str, str] = ("num_joints", "symmetry"),
               sigma: float = DEFAULT_SIGMA, resolution: int = DEFAULT_RESOLUTION,
               figures: bool = True, svg: bool = False) -> dict:
    for t in traits:
        if t not in TRAIT_NAMES:
            raise ValueError(f"unknown trait {t!r}; choose from {TRAIT_NAMES}")
    cfg, robots, traces = collect(root)
    summaries = summaries_of(traces)
    report = analyze_suite(summaries, 0.05, cfg.learners, [r.name for r in robots], cfg.repetitions)
    ix, iy = TRAIT_NAMES.index(traits[0]), TRAIT_NAMES.index(traits[1])
    tv = {r.name: compute_traits(r.tree) for r in robots}
    out = root / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    grids = {}
    for l in cfg.learners:
        pts = [LandscapePoint(float(tv[r.name][ix]), float(tv[r.name][iy]),
                              report.per_robot[l][r.name]["mbf"], r.name) for r in robots]
        grid = interpolate(pts, resolution, sigma, traits)
        base = out / f"landscape_{l}_{traits[0]}_{traits[1]}"
        export_landscape(grid, base)
        if figures:
            from .plotting import plot_landscape

            plot_landscape(grid, base.with_suffix(".png"), l)
            if svg:
                plot_landscape(grid, base.with_suffix(".svg"), l)
        grids[l] = grid
    return grids


# ---------------------------------------------------------------------------
# CLI


def _out_dir(args) -> str:
    return os.environ.get("GAITLAB_OUT") or args.out


def _print_traits(robots: Sequence[RobotSpec]) -> None:
    width = max(len(r.name) for r in robots)
    print(" " * width + "  " + " ".join(f"{t[:10]:>10}" for t in TRAIT_NAMES))
    for r in robots:
        print(f"{r.name:<{width}}  " + " ".join(f"{v:10.3f}" for v in compute_traits(r.tree)))


def cmd_suite(args) -> int:
    fx = fixtures()
    if args.fixtures_only:
        suite = fx
    else:
        if args.pop + len(fx) < args.size:
            raise SystemExit(f"population of {args.pop} (+{len(fx)} fixtures) is smaller than --size {args.size}")
        rng = np.random.default_rng(args.seed)
        pop = fx + [RobotSpec(f"R{i:03d}", random_morphology(rng, args.max_modules)) for i in range(args.pop)]
        suite = select_test_suite(pop, args.size, keep=FIXTURE_NAMES)
    path = Path(args.suite) if args.suite else Path(_out_dir(args)) / "suite.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_suite(suite, path)
    _print_traits(suite)
    print(f"wrote {len(suite)} robots to {path}")
    return 0


def cmd_run(args) -> int:
    cfg = ExperimentConfig(
        suite=args.suite,
        learners=args.learners.split(","),
        repetitions=args.reps,
        budget=args.budget,
        seed=args.seed,
        out=_out_dir(args),
        workers=args.workers,
    )
    done, failed = run_experiment(cfg)
    print(f"{len(done)} runs completed, {len(failed)} failed; traces under {cfg.root}")
    return 1 if failed else 0


def _root(args) -> Path:
    return Path(_out_dir(args)) / Path(args.suite).stem


def cmd_analyze(args) -> int:
    try:
        report = analyze(_root(args), args.alpha, figures=not args.no_figures)
    except IncompleteGridError as exc:
        print(f"incomplete grid: {exc}", file=sys.stderr)
        return 2
    print(report.to_csv(), end="")
    return 0


def cmd_landscape(args) -> int:
    traits = tuple(args.traits.split(","))
    if len(traits) != 2:
        raise SystemExit("--traits takes exactly two comma-separated trait names")
    try:
        grids = landscapes(_root(args), traits, args.sigma, args.resolution,
                           figures=not args.no_figures, svg=args.svg)
    except IncompleteGridError as exc:
        print(f"incomplete grid: {exc}", file=sys.stderr)
        return 2
    for l, g in grids.items():
        lo, hi = g.bounds
        print(f"{l}: {traits[0]} x {traits[1]}  min {lo:.4f}  max {hi:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaitlab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", default=False)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default="out", help="output root (env GAITLAB_OUT overrides)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    s = sub.add_parser("suite", help="build a robot test suite")
    common(s)
    s.add_argument("--suite", help="suite file to write (default <out>/suite.json)")
    s.add_argument("--size", type=int, default=20)
    s.add_argument("--pop", type=int, default=100)
    s.add_argument("--max-modules", type=int, default=20)
    s.add_argument("--fixtures-only", action="store_true")
    s.set_defaults(func=cmd_suite)

    r = sub.add_parser("run", help="execute learning runs (resumes)")
    common(r)
    r.add_argument("--suite", required=True)
    r.add_argument("--reps", type=int, default=30)
    r.add_argument("--learners", default=",".join(LEARNERS))
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--budget", type=int, default=BUDGET)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="tables, curves and statistics")
    common(a)
    a.add_argument("--suite", required=True)
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--no-figures", action="store_true")
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("landscape", help="trait-plane fitness landscapes")
    common(g)
    g.add_argument("--suite", required=True)
    g.add_argument("--traits", default="num_joints,symmetry")
    g.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    g.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    g.add_argument("--svg", action="store_true", help="also write a monochrome SVG contour")
    g.add_argument("--no-figures", action="store_true")
    g.set_defaults(func=cmd_landscape)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
