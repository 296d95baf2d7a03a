"""Per-run and per-learner performance measures and the suite-level analysis."""
from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import IncompleteGridError, InsufficientData
from .learners.base import RunTrace
from .stats import TestResult, compare_groups, normality_check, variance_equality_test

MEASURES = ("MBF", "AES", "ROB-MBF", "ROB-AES", "CON-MBF", "CON-AES")


@dataclass(frozen=True)
class RunSummary:
    robot: str
    learner: str
    seed: int
    best_fitness: float
    aes: int


def best_so_far(trace: RunTrace | Sequence[float]) -> np.ndarray:
    fit = trace.fitness if isinstance(trace, RunTrace) else trace
    return np.maximum.accumulate(np.asarray(fit, dtype=float))


def aes(trace: RunTrace | Sequence[float]) -> int:
    """1-based index at which the run's maximum fitness first appears."""
    fit = trace.fitness if isinstance(trace, RunTrace) else trace
    return int(np.argmax(np.asarray(fit, dtype=float))) + 1


def summarize(trace: RunTrace, repetition: int | None = None) -> RunSummary:
    seed = trace.seed if repetition is None else repetition
    return RunSummary(trace.robot, trace.learner, seed, float(max(trace.fitness)), aes(trace))


def mbf(summaries: Sequence[RunSummary]) -> tuple[float, float]:
    """Mean and sample std (n - 1) of best fitness over repetitions."""
    if len(summaries) < 2:
        raise InsufficientData("MBF needs at least 2 repetitions")
    best = np.array([s.best_fitness for s in summaries])
    return float(best.mean()), float(best.std(ddof=1))


@dataclass
class RobotStats:
    mbf: float
    con_mbf: float
    mean_aes: float
    con_aes: float
    n: int


@dataclass
class LearnerSummary:
    learner: str
    per_robot: dict[str, RobotStats]

    def _col(self, attr: str) -> np.ndarray:
        return np.array([getattr(r, attr) for r in self.per_robot.values()])

    @property
    def rob_mbf(self) -> float:
        return float(self._col("mbf").var(ddof=1)) if len(self.per_robot) > 1 else 0.0

    @property
    def rob_aes(self) -> float:
        return float(self._col("mean_aes").var(ddof=1)) if len(self.per_robot) > 1 else 0.0

    def measure(self, name: str) -> float:
        return {
            "MBF": lambda: float(self._col("mbf").mean()),
            "AES": lambda: float(self._col("mean_aes").mean()),
            "ROB-MBF": lambda: self.rob_mbf,
            "ROB-AES": lambda: self.rob_aes,
            "CON-MBF": lambda: float(self._col("con_mbf").mean()),
            "CON-AES": lambda: float(self._col("con_aes").mean()),
        }[name]()


def learner_summary(learner: str, summaries: Iterable[RunSummary]) -> LearnerSummary:
    by_robot: dict[str, list[RunSummary]] = defaultdict(list)
    for s in summaries:
        if s.learner == learner:
            by_robot[s.robot].append(s)
    per = {}
    for robot, runs in by_robot.items():
        m, sd = mbf(runs)
        a = np.array([r.aes for r in runs], dtype=float)
        per[robot] = RobotStats(m, sd, float(a.mean()), float(a.std(ddof=1)), len(runs))
    return LearnerSummary(learner, per)


@dataclass
class AnalysisReport:
    learners: list[str]
    robots: list[str]
    repetitions: int
    table: dict[str, dict[str, float]]
    tests: dict[str, dict]
    per_robot: dict[str, dict[str, dict]]
    normality: dict[str, dict[str, dict]] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["measure", *self.learners, "test", "statistic", "p_value"])
        for m in MEASURES:
            t = self.tests[m]["omnibus"]
            wr.writerow([m, *(repr(self.table[m][l]) for l in self.learners), t.name,
                         repr(t.statistic), repr(t.p_value)])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "learners": self.learners,
            "robots": self.robots,
            "repetitions": self.repetitions,
            "table": self.table,
            "tests": {
                m: {k: (v.to_dict() if isinstance(v, TestResult) else v) for k, v in t.items()}
                for m, t in self.tests.items()
            },
            "per_robot": self.per_robot,
            "normality": self.normality,
        }
        return json.dumps(doc, indent=1)


def analyze_suite(
    summaries: Sequence[RunSummary],
    alpha: float = 0.05,
    learners: Sequence[str] | None = None,
    robots: Sequence[str] | None = None,
    repetitions: int | None = None,
) -> AnalysisReport:
    learners = list(learners or dict.fromkeys(s.learner for s in summaries))
    robots = list(robots or dict.fromkeys(s.robot for s in summaries))
    counts: dict[tuple[str, str], int] = defaultdict(int)
    for s in summaries:
        counts[(s.robot, s.learner)] += 1
    if repetitions is None:
        repetitions = max(counts.values(), default=0)
    missing = [(r, l, counts[(r, l)]) for r in robots for l in learners if counts[(r, l)] < repetitions]
    if missing or repetitions < 2:
        raise IncompleteGridError([f"{r}/{l} has {c} of {repetitions} runs" for r, l, c in missing]
                                  or ["need >= 2 repetitions per cell"])

    ls = {l: learner_summary(l, summaries) for l in learners}
    table = {m: {l: ls[l].measure(m) for l in learners} for m in MEASURES}

    def col(l, attr):
        return [getattr(ls[l].per_robot[r], attr) for r in robots]

    tests: dict[str, dict] = {}
    for m, attr in (("MBF", "mbf"), ("AES", "mean_aes"), ("CON-MBF", "con_mbf"), ("CON-AES", "con_aes")):
        tests[m] = compare_groups({l: col(l, attr) for l in learners}, alpha)
    for m, attr in (("ROB-MBF", "mbf"), ("ROB-AES", "mean_aes")):
        try:
            vt = variance_equality_test([col(l, attr) for l in learners])
        except Exception:  # degenerate spread: report no difference
            vt = TestResult("variance_equality", 0.0, 1.0, (len(learners) - 1, len(robots) * len(learners) - len(learners)), "degenerate")
        tests[m] = {"omnibus": vt}

    per_robot = {l: {r: asdict(ls[l].per_robot[r]) for r in robots} for l in learners}
    normality = {l: {"MBF": normality_check(col(l, "mbf")), "AES": normality_check(col(l, "mean_aes"))}
                 for l in learners}
    return AnalysisReport(learners, robots, repetitions, table, tests, per_robot, normality)


def mean_curve(curves: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean best-so-far curve with a +-1.96 standard-error band."""
    arr = np.asarray(curves, dtype=float)
    mean = arr.mean(axis=0)
    se = arr.std(axis=0, ddof=1) / np.sqrt(len(arr)) if len(arr) > 1 else np.zeros_like(mean)
    return mean, mean - 1.96 * se, mean + 1.96 * se


def champions(summaries: Sequence[RunSummary], report: AnalysisReport, top: int = 3) -> dict:
    """Fastest robots by single-run top speed and by best per-learner MBF."""
    top_speed: dict[str, float] = defaultdict(float)
    for s in summaries:
        top_speed[s.robot] = max(top_speed[s.robot], s.best_fitness)
    best_mbf = {r: max(report.per_robot[l][r]["mbf"] for l in report.learners) for r in report.robots}
    by_speed = sorted(top_speed.items(), key=lambda kv: -kv[1])[:top]
    by_mbf = sorted(best_mbf.items(), key=lambda kv: -kv[1])[:top]
    return {
        "top_speed": [{"robot": r, "speed": v} for r, v in by_speed],
        "top_mbf": [{"robot": r, "mbf": v} for r, v in by_mbf],
    }
