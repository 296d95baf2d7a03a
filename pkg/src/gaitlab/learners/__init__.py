"""Lifetime learners behind a common ask/tell interface."""
from __future__ import annotations

import numpy as np

from .base import BUDGET, Objective, RunTrace, run_learner
from .bo import BayesianOptimizer, BoConfig, bo_run, gp_posterior, lhs_sample, matern52
from .nipes import CmaState, Nipes, NipesConfig, cma_state_update, nipes_run, novelty_score
from .revde import RevDE, RevdeConfig, revde_generation, revde_run

LEARNERS = ("bo", "nipes", "revde")


def make_learner(name: str, dim: int, rng: np.random.Generator, budget: int = BUDGET):
    """Construct a learner by id with the published hyperparameters."""
    if name == "bo":
        return BayesianOptimizer(dim, rng, BoConfig.for_budget(budget))
    if name == "nipes":
        return Nipes(dim, rng, NipesConfig(budget=budget))
    if name == "revde":
        return RevDE(dim, rng, RevdeConfig(budget=budget))
    raise ValueError(f"unknown learner {name!r}; choose from {LEARNERS}")


__all__ = [
    "BUDGET", "LEARNERS", "BayesianOptimizer", "BoConfig", "CmaState", "Nipes",
    "NipesConfig", "Objective", "RevDE", "RevdeConfig", "RunTrace", "bo_run",
    "cma_state_update", "gp_posterior", "lhs_sample", "make_learner", "matern52",
    "nipes_run", "novelty_score", "revde_generation", "revde_run", "run_learner",
]
