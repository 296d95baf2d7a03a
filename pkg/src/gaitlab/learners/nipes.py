"""NIPES: CMA-ES with novelty-blended ranking and increasing-population restarts."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata

from ..errors import DegenerateError
from .base import BUDGET, LOWER, UPPER, Objective, RunTrace, run_learner


@dataclass(frozen=True)
class NipesConfig:
    lambda0: int = 10
    sigma0: float = 1.0
    stagnation_std: float = 0.05
    stagnation_window: int = 5
    novelty_mu0: float = 1.0
    novelty_decrement: float = 0.05
    novelty_k: int = 15
    archive_threshold: float = 0.9
    archive_probability: float = 0.4
    budget: int = BUDGET

    def __post_init__(self):
        if self.lambda0 < 4:
            raise ValueError("lambda0 must be >= 4")
        if not 0.0 <= self.novelty_mu0 <= 1.0:
            raise ValueError("novelty_mu0 must lie in [0, 1]")


@dataclass(frozen=True)
class CmaState:
    """Canonical (mu/mu_w, lambda)-CMA-ES state with Hansen's default rates."""

    mean: np.ndarray
    sigma: float
    C: np.ndarray
    pc: np.ndarray
    ps: np.ndarray
    B: np.ndarray
    D: np.ndarray
    lam: int
    weights: np.ndarray
    mueff: float
    cc: float
    cs: float
    c1: float
    cmu: float
    damps: float
    chi_n: float
    generation: int = 0

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def mu(self) -> int:
        return len(self.weights)

    @classmethod
    def initial(cls, mean, sigma: float, lam: int) -> "CmaState":
        mean = np.asarray(mean, dtype=float)
        n = len(mean)
        mu = lam // 2
        w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        w /= w.sum()
        mueff = 1.0 / (w**2).sum()
        cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        cs = (mueff + 2) / (n + mueff + 5)
        c1 = 2 / ((n + 1.3) ** 2 + mueff)
        cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
        chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
        return cls(
            mean=mean, sigma=float(sigma), C=np.eye(n), pc=np.zeros(n), ps=np.zeros(n),
            B=np.eye(n), D=np.ones(n), lam=lam, weights=w, mueff=mueff,
            cc=cc, cs=cs, c1=c1, cmu=cmu, damps=damps, chi_n=chi_n,
        )

    def sample(self, rng: np.random.Generator, clip: bool = True) -> np.ndarray:
        z = rng.standard_normal((self.lam, self.dim))
        x = self.mean + self.sigma * (z * self.D) @ self.B.T
        return np.clip(x, LOWER, UPPER) if clip else x


def cma_state_update(state: CmaState, ranked: np.ndarray) -> CmaState:
    """One CMA-ES update from offspring sorted best-first (only the top mu are used)."""
    s = state
    n = s.dim
    ranked = np.asarray(ranked, dtype=float)
    if len(ranked) < s.mu:
        raise ValueError(f"need at least mu={s.mu} ranked offspring")
    y = (ranked[: s.mu] - s.mean) / s.sigma
    y_w = s.weights @ y
    mean = s.mean + s.sigma * y_w

    inv_sqrt_c = s.B @ np.diag(1.0 / s.D) @ s.B.T
    ps = (1 - s.cs) * s.ps + math.sqrt(s.cs * (2 - s.cs) * s.mueff) * inv_sqrt_c @ y_w
    g = s.generation + 1
    ps_norm = np.linalg.norm(ps)
    hsig = ps_norm / math.sqrt(1 - (1 - s.cs) ** (2 * g)) < (1.4 + 2 / (n + 1)) * s.chi_n
    pc = (1 - s.cc) * s.pc + hsig * math.sqrt(s.cc * (2 - s.cc) * s.mueff) * y_w

    rank_mu = (y.T * s.weights) @ y
    C = (
        (1 - s.c1 - s.cmu + (1 - hsig) * s.c1 * s.cc * (2 - s.cc)) * s.C
        + s.c1 * np.outer(pc, pc)
        + s.cmu * rank_mu
    )
    C = (C + C.T) / 2
    sigma = s.sigma * math.exp((s.cs / s.damps) * (ps_norm / s.chi_n - 1))

    if not (np.all(np.isfinite(C)) and math.isfinite(sigma)):
        raise DegenerateError("non-finite covariance or step size")
    eigvals, B = np.linalg.eigh(C)
    if eigvals.min() <= 0 or eigvals.max() / eigvals.min() > 1e14:
        raise DegenerateError(f"covariance lost positive definiteness (eig min {eigvals.min():.3g})")
    return replace(s, mean=mean, sigma=sigma, C=C, pc=pc, ps=ps, B=B, D=np.sqrt(eigvals), generation=g)


def _knn_mean(dist_row: np.ndarray, k: int) -> float:
    if len(dist_row) == 0:
        return 0.0
    k = min(k, len(dist_row))
    return float(np.partition(dist_row, k - 1)[:k].mean())


def novelty_score(ind, pop, archive=(), k: int = 15) -> float:
    """Mean distance to the ``k`` nearest genomes of ``pop + archive``, minus ``ind`` itself once."""
    ind = np.asarray(ind, dtype=float)
    others = [np.asarray(p, float) for p in pop]
    for i, p in enumerate(others):
        if np.array_equal(p, ind):
            del others[i]
            break
    others += [np.asarray(a, float) for a in archive]
    if not others:
        return 0.0
    d = np.linalg.norm(np.array(others) - ind, axis=1)
    return _knn_mean(d, k)


def population_novelty(pop: np.ndarray, archive: np.ndarray, k: int) -> np.ndarray:
    pool = np.vstack([pop, archive]) if len(archive) else pop
    d = np.linalg.norm(pop[:, None, :] - pool[None, :, :], axis=-1)
    out = np.empty(len(pop))
    for i in range(len(pop)):
        out[i] = _knn_mean(np.delete(d[i], i), k)
    return out


def _unit_ranks(values: np.ndarray) -> np.ndarray:
    if len(values) == 1:
        return np.ones(1)
    return (rankdata(values) - 1) / (len(values) - 1)


class Nipes:
    name = "nipes"

    def __init__(self, dim: int, rng: np.random.Generator, cfg: NipesConfig = NipesConfig()):
        self.dim, self.rng, self.cfg = dim, rng, cfg
        self.archive = np.empty((0, dim))
        self.lam = cfg.lambda0
        self.restarts = 0
        self.lambda_history = [self.lam]
        self._start_epoch()

    def _start_epoch(self) -> None:
        mean = self.rng.uniform(LOWER, UPPER, self.dim)
        self.state = CmaState.initial(mean, self.cfg.sigma0, self.lam)
        self.mu_nov = self.cfg.novelty_mu0
        self.best_history: list[float] = []

    def ask(self) -> np.ndarray:
        return self.state.sample(self.rng)

    def tell(self, genomes, fitness) -> None:
        genomes = np.asarray(genomes, float)
        fitness = np.asarray(fitness, float)
        if len(genomes) < self.state.lam:
            return  # budget-truncated final generation
        cfg = self.cfg
        nov = population_novelty(genomes, self.archive, cfg.novelty_k)
        admit = (nov >= cfg.archive_threshold) | (self.rng.random(len(nov)) < cfg.archive_probability)
        self.archive = np.vstack([self.archive, genomes[admit]])

        blend = self.mu_nov * _unit_ranks(nov) + (1 - self.mu_nov) * _unit_ranks(fitness)
        order = np.argsort(-blend, kind="stable")
        self.mu_nov = max(0.0, self.mu_nov - cfg.novelty_decrement)
        self.best_history.append(float(fitness.max()))

        window = self.best_history[-cfg.stagnation_window:]
        stagnant = (
            len(self.best_history) >= cfg.stagnation_window
            and fitness.std() <= cfg.stagnation_std
            and np.std(window) <= cfg.stagnation_std
        )
        if not stagnant:
            try:
                self.state = cma_state_update(self.state, genomes[order])
                return
            except DegenerateError:
                pass
        self._restart()

    def _restart(self) -> None:
        self.lam *= 2
        self.restarts += 1
        self.lambda_history.append(self.lam)
        self._start_epoch()


def nipes_run(obj: Objective, cfg: NipesConfig = NipesConfig(), rng=None, robot: str = "", seed: int = 0) -> RunTrace:
    rng = rng if rng is not None else np.random.default_rng(seed)
    return run_learner(Nipes(obj.dim, rng, cfg), obj, cfg.budget, robot, seed)
