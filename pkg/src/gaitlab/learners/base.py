"""Ask/tell learner protocol, run traces and the evaluation-budget loop."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

BUDGET = 300
LOWER, UPPER = -1.0, 1.0


class Learner(Protocol):
    name: str

    def ask(self) -> np.ndarray:
        """Next batch of genomes, shape ``(k, dim)``."""

    def tell(self, genomes: np.ndarray, fitness: np.ndarray) -> None:
        """Report fitness for (a prefix of) the last batch."""


@dataclass
class Objective:
    """A fitness function over ``[-1, 1]^dim``; higher is better."""

    dim: int
    fn: Callable[[np.ndarray], float]

    def __call__(self, genome: np.ndarray) -> float:
        return float(self.fn(genome))


@dataclass
class RunTrace:
    learner: str
    robot: str
    seed: int
    genomes: list[list[float]] = field(default_factory=list)
    fitness: list[float] = field(default_factory=list)

    def append(self, genome, fitness: float) -> None:
        self.genomes.append([float(g) for g in genome])
        self.fitness.append(float(fitness))

    def __len__(self) -> int:
        return len(self.fitness)

    @property
    def records(self) -> list[dict]:
        return [
            {"eval": i + 1, "genome": g, "fitness": f}
            for i, (g, f) in enumerate(zip(self.genomes, self.fitness))
        ]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def read(cls, path: str | Path, learner: str = "", robot: str = "", seed: int = 0) -> "RunTrace":
        trace = cls(learner, robot, seed)
        with open(path) as fh:
            for i, line in enumerate(fh, start=1):
                rec = json.loads(line)
                if rec["eval"] != i:
                    raise ValueError(f"{path}: eval index {rec['eval']} at line {i}")
                trace.append(rec["genome"], rec["fitness"])
        return trace


def run_learner(
    learner: Learner,
    objective: Objective,
    budget: int = BUDGET,
    robot: str = "",
    seed: int = 0,
) -> RunTrace:
    """Drive ask/tell until exactly ``budget`` evaluations; the last batch may be truncated."""
    trace = RunTrace(learner.name, robot, seed)
    while len(trace) < budget:
        batch = np.atleast_2d(learner.ask())[: budget - len(trace)]
        fit = np.array([objective(x) for x in batch])
        for x, f in zip(batch, fit):
            trace.append(x, f)
        learner.tell(batch, fit)
    return trace
