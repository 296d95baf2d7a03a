"""Bayesian optimisation: Latin hypercube start, Matern-5/2 GP, UCB acquisition."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from ..errors import NumericalError
from .base import BUDGET, LOWER, UPPER, Objective, RunTrace, run_learner

SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class BoConfig:
    init_samples: int = 50
    iterations: int = 250
    kernel_variance: float = 1.0
    kernel_length: float = 0.2
    ucb_alpha: float = 3.0
    jitter: float = 1e-10
    max_jitter: float = 1e-4
    n_candidates: int = 1000
    refine_steps: int = 20
    refine_radius: float = 0.2
    refine_shrink: float = 0.75
    standardize_y: bool = False

    @classmethod
    def for_budget(cls, budget: int = BUDGET, **kw) -> "BoConfig":
        init = min(kw.pop("init_samples", 50), budget)
        return cls(init_samples=init, iterations=budget - init, **kw)


def lhs_sample(n: int, dim: int, rng: np.random.Generator, low=LOWER, high=UPPER) -> np.ndarray:
    """Latin hypercube: one point per stratum per coordinate, uniform within the stratum."""
    if n < 1 or dim < 1:
        raise ValueError("n and dim must be >= 1")
    strata = np.column_stack([rng.permutation(n) for _ in range(dim)])
    u = (strata + rng.random((n, dim))) / n
    return low + (high - low) * u


def matern52(a, b, variance: float = 1.0, length: float = 0.2) -> float:
    r = float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))
    s = SQRT5 * r / length
    return variance * (1.0 + s + s * s / 3.0) * math.exp(-s)


def matern52_matrix(a: np.ndarray, b: np.ndarray, variance: float, length: float) -> np.ndarray:
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    s = SQRT5 * np.sqrt(np.maximum(sq, 0.0)) / length
    return variance * (1.0 + s + s * s / 3.0) * np.exp(-s)


class GaussianProcess:
    """Zero-mean GP regression with a Cholesky-factorised kernel matrix."""

    def __init__(self, X, y, cfg: BoConfig = BoConfig()):
        self.X = np.atleast_2d(np.asarray(X, float))
        y = np.asarray(y, float)
        self.cfg = cfg
        self.y_mean, self.y_scale = 0.0, 1.0
        if cfg.standardize_y and len(y) > 1:
            self.y_mean, self.y_scale = y.mean(), (y.std() or 1.0)
        self.y = (y - self.y_mean) / self.y_scale
        K = matern52_matrix(self.X, self.X, cfg.kernel_variance, cfg.kernel_length)
        jitter = cfg.jitter
        while True:
            try:
                self.L = cholesky(K + jitter * np.eye(len(K)), lower=True)
                break
            except LinAlgError:
                jitter *= 10.0
                if jitter > cfg.max_jitter * (1 + 1e-9):
                    raise NumericalError("kernel matrix not positive definite up to max jitter")
        self.jitter = jitter
        self.alpha = cho_solve((self.L, True), self.y)
        self.L_inv = solve_triangular(self.L, np.eye(len(self.L)), lower=True)

    def predict(self, Xs) -> tuple[np.ndarray, np.ndarray]:
        Xs = np.atleast_2d(np.asarray(Xs, float))
        ks = matern52_matrix(Xs, self.X, self.cfg.kernel_variance, self.cfg.kernel_length)
        mean = ks @ self.alpha
        v = self.L_inv @ ks.T
        var = self.cfg.kernel_variance - (v * v).sum(axis=0)
        return mean * self.y_scale + self.y_mean, np.maximum(var, 0.0) * self.y_scale**2

    def ucb(self, Xs) -> np.ndarray:
        m, v = self.predict(Xs)
        return m + self.cfg.ucb_alpha * np.sqrt(v)


def gp_posterior(X, y, x_star, cfg: BoConfig = BoConfig()) -> tuple[float, float]:
    if len(X) < 1 or len(X) != len(y):
        raise ValueError("need |X| = |y| >= 1")
    m, v = GaussianProcess(X, y, cfg).predict(np.atleast_2d(x_star))
    return float(m[0]), float(v[0])


def maximize_ucb(gp: GaussianProcess, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random candidates plus the training set, then shrinking coordinate moves from the best."""
    cfg = gp.cfg
    cand = np.vstack([rng.uniform(LOWER, UPPER, (cfg.n_candidates, dim)), gp.X])
    score = gp.ucb(cand)
    best = int(np.argmax(score))
    x, fx = cand[best].copy(), score[best]
    radius = cfg.refine_radius
    eye = np.eye(dim)
    for _ in range(cfg.refine_steps):
        moves = np.clip(np.vstack([x + radius * eye, x - radius * eye]), LOWER, UPPER)
        s = gp.ucb(moves)
        k = int(np.argmax(s))
        if s[k] > fx:
            x, fx = moves[k], s[k]
        radius *= cfg.refine_shrink
    return x


class BayesianOptimizer:
    name = "bo"

    def __init__(self, dim: int, rng: np.random.Generator, cfg: BoConfig = BoConfig()):
        self.dim, self.rng, self.cfg = dim, rng, cfg
        # drawn before any model fitting so the design depends on the seed only
        self.design = lhs_sample(cfg.init_samples, dim, rng)
        self.X: list[np.ndarray] = []
        self.y: list[float] = []

    def ask(self) -> np.ndarray:
        n = len(self.y)
        if n < self.cfg.init_samples:
            return self.design[n:]
        gp = GaussianProcess(np.array(self.X), np.array(self.y), self.cfg)
        return maximize_ucb(gp, self.dim, self.rng)[None, :]

    def tell(self, genomes, fitness) -> None:
        self.X.extend(np.asarray(genomes, float))
        self.y.extend(float(f) for f in fitness)


def bo_run(obj: Objective, cfg: BoConfig = BoConfig(), rng=None, robot: str = "", seed: int = 0) -> RunTrace:
    rng = rng if rng is not None else np.random.default_rng(seed)
    opt = BayesianOptimizer(obj.dim, rng, cfg)
    return run_learner(opt, obj, cfg.init_samples + cfg.iterations, robot, seed)
