"""Reversible differential evolution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import BUDGET, LOWER, UPPER, Objective, RunTrace, run_learner


@dataclass(frozen=True)
class RevdeConfig:
    lam: int = 30
    mu: int = 10
    F: float = 0.5
    CR: float = 0.9
    budget: int = BUDGET

    def __post_init__(self):
        if self.lam != 3 * self.mu:
            raise ValueError("lam must equal 3 * mu")
        if self.mu < 3:
            raise ValueError("mu must be >= 3")


def reversible_transform(m1, m2, m3, F: float):
    """The three-vector linear map; invertible for any finite F."""
    l1 = m1 + F * (m2 - m3)
    l2 = m2 + F * (m3 - l1)
    l3 = m3 + F * (l1 - l2)
    return l1, l2, l3


def transform_matrix(F: float) -> np.ndarray:
    """3x3 coefficient block ``T`` with ``[l1, l2, l3] = T @ [m1, m2, m3]``."""
    return np.array([reversible_transform(e[0], e[1], e[2], F) for e in np.eye(3)]).T


def revde_generation(top: np.ndarray, F: float, CR: float, rng: np.random.Generator) -> np.ndarray:
    """``3 * len(top)`` candidates: all l1 rows, then l2 rows, then l3 rows."""
    m1 = np.asarray(top, dtype=float)
    if len(m1) < 3:
        raise ValueError("need at least 3 parents")
    m2 = m1[rng.permutation(len(m1))]
    m3 = m1[rng.permutation(len(m1))]
    out = []
    for lam, parent in zip(reversible_transform(m1, m2, m3, F), (m1, m2, m3)):
        mask = rng.random(lam.shape) < CR
        out.append(np.where(mask, lam, parent))
    return np.clip(np.vstack(out), LOWER, UPPER)


class RevDE:
    name = "revde"

    def __init__(self, dim: int, rng: np.random.Generator, cfg: RevdeConfig = RevdeConfig()):
        self.dim, self.rng, self.cfg = dim, rng, cfg
        self.parents: np.ndarray | None = None
        self.parent_fit: np.ndarray | None = None
        self.pending: np.ndarray | None = None

    def ask(self) -> np.ndarray:
        if self.parents is None:
            return self.rng.uniform(LOWER, UPPER, (self.cfg.lam, self.dim))
        return revde_generation(self.parents, self.cfg.F, self.cfg.CR, self.rng)

    def tell(self, genomes, fitness) -> None:
        genomes = np.asarray(genomes, float)
        fitness = np.asarray(fitness, float)
        if self.parents is not None:
            genomes = np.vstack([self.parents, genomes])
            fitness = np.concatenate([self.parent_fit, fitness])
        keep = select_top(fitness, self.cfg.mu)
        self.parents, self.parent_fit = genomes[keep], fitness[keep]


def select_top(fitness: np.ndarray, mu: int) -> np.ndarray:
    """Indices of the ``mu`` best, ties to the lower index."""
    return np.argsort(-np.asarray(fitness), kind="stable")[:mu]


def revde_run(obj: Objective, cfg: RevdeConfig = RevdeConfig(), rng=None, robot: str = "", seed: int = 0) -> RunTrace:
    rng = rng if rng is not None else np.random.default_rng(seed)
    return run_learner(RevDE(obj.dim, rng, cfg), obj, cfg.budget, robot, seed)
