"""Hypothesis tests used to compare learners.

Test statistics are computed here; only the reference distribution tails
(F, chi-square, normal, Student t) come from scipy.  Rank tests switch to their
exact (or, for Kruskal-Wallis with up to ten observations per group, a seeded
permutation) distribution for small samples, where the asymptotic
approximations are off by more than a percent.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .errors import DegenerateError, InsufficientData

EXACT_MWU_MAX_N = 10
EXACT_KW_MAX_ASSIGNMENTS = 100_000
PERMUTATION_KW_MAX_GROUP = 10
PERMUTATION_RESAMPLES = 100_000
PERMUTATION_SEED = 20240101


@dataclass
class TestResult:
    __test__ = False  # not a pytest class

    name: str
    statistic: float
    p_value: float
    df: tuple | None = None
    method: str = "asymptotic"
    posthoc: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": _finite_or_none(self.statistic),
            "p_value": self.p_value,
            "df": list(self.df) if self.df is not None else None,
            "method": self.method,
            "posthoc": dict(self.posthoc),
        }


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def _clip_p(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


def midranks(values) -> np.ndarray:
    return sps.rankdata(values, method="average")


def _tie_term(values) -> float:
    _, counts = np.unique(values, return_counts=True)
    return float(((counts**3) - counts).sum())


def one_way_anova(groups: Sequence[Sequence[float]]) -> TestResult:
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(len(g) < 2 for g in groups):
        raise InsufficientData("ANOVA needs >= 2 groups of >= 2 observations")
    k = len(groups)
    n_tot = sum(len(g) for g in groups)
    grand = np.concatenate(groups).mean()
    ss_between = sum(len(g) * (g.mean() - grand) ** 2 for g in groups)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in groups)
    df = (k - 1, n_tot - k)
    if ss_within <= 0.0:
        raise DegenerateError("zero within-group variance in every group")
    f = (ss_between / df[0]) / (ss_within / df[1])
    return TestResult("one_way_anova", float(f), _clip_p(sps.f.sf(f, *df)), df)


def variance_equality_test(groups: Sequence[Sequence[float]]) -> TestResult:
    """Levene-type test: one-way ANOVA on absolute deviations from the group means."""
    dev = [np.abs(np.asarray(g, float) - np.mean(g)) for g in groups]
    res = one_way_anova(dev)
    res.name = "variance_equality"
    return res


def _kw_h(rank_sums: np.ndarray, sizes: np.ndarray, n: int, tie_corr: float) -> np.ndarray:
    h = 12.0 / (n * (n + 1)) * (rank_sums**2 / sizes).sum(axis=-1) - 3.0 * (n + 1)
    return h / tie_corr


def _assignments(n: int, sizes: Sequence[int]) -> int:
    out = math.factorial(n)
    for s in sizes:
        out //= math.factorial(s)
    return out


def _kw_exact_p(ranks: np.ndarray, sizes: list[int], h_obs: float, tie_corr: float) -> float:
    n = len(ranks)
    sz = np.array(sizes, dtype=float)
    hits = total = 0

    def rec(remaining: tuple[int, ...], level: int, sums: list[float]):
        nonlocal hits, total
        if level == len(sizes) - 1:
            s = np.array(sums + [ranks[list(remaining)].sum()])
            total += 1
            hits += _kw_h(s, sz, n, tie_corr) >= h_obs - 1e-9
            return
        for combo in itertools.combinations(remaining, sizes[level]):
            rest = tuple(i for i in remaining if i not in combo)
            rec(rest, level + 1, sums + [ranks[list(combo)].sum()])

    rec(tuple(range(n)), 0, [])
    return hits / total


def _kw_permutation_p(ranks: np.ndarray, sizes: list[int], h_obs: float, tie_corr: float,
                      n_resamples: int = PERMUTATION_RESAMPLES, seed: int = PERMUTATION_SEED) -> float:
    """Seeded Monte-Carlo permutation p-value; standard error at most 0.5 / sqrt(n_resamples)."""
    rng = np.random.default_rng(seed)
    n = len(ranks)
    sz = np.array(sizes, dtype=float)
    bounds = np.cumsum([0] + list(sizes))
    hits, done, chunk = 0, 0, 10_000
    while done < n_resamples:
        m = min(chunk, n_resamples - done)
        perm = rng.permuted(np.broadcast_to(ranks, (m, n)), axis=1)
        sums = np.stack([perm[:, bounds[i]:bounds[i + 1]].sum(axis=1) for i in range(len(sizes))], axis=1)
        hits += int((_kw_h(sums, sz, n, tie_corr) >= h_obs - 1e-9).sum())
        done += m
    return hits / n_resamples


def kruskal_wallis(groups: Sequence[Sequence[float]], exact: bool | None = None) -> TestResult:
    """Kruskal-Wallis H with tie correction.

    The p-value is exact (full enumeration) when there are at most
    ``EXACT_KW_MAX_ASSIGNMENTS`` group assignments, a seeded permutation estimate
    when every group has at most ``PERMUTATION_KW_MAX_GROUP`` observations, and
    the chi-square tail otherwise.  ``exact=False`` forces the chi-square tail.
    """
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(len(g) == 0 for g in groups):
        raise InsufficientData("Kruskal-Wallis needs >= 2 nonempty groups")
    pooled = np.concatenate(groups)
    n = len(pooled)
    sizes = [len(g) for g in groups]
    df = (len(groups) - 1,)
    tie_corr = 1.0 - _tie_term(pooled) / (n**3 - n) if n > 1 else 0.0
    if tie_corr <= 0.0:
        return TestResult("kruskal_wallis", 0.0, 1.0, df, "degenerate")
    ranks = midranks(pooled)
    bounds = np.cumsum([0] + sizes)
    sums = np.array([ranks[bounds[i]:bounds[i + 1]].sum() for i in range(len(groups))])
    h = float(_kw_h(sums, np.array(sizes, float), n, tie_corr))
    if exact is None:
        exact = _assignments(n, sizes) <= EXACT_KW_MAX_ASSIGNMENTS
        if not exact and max(sizes) <= PERMUTATION_KW_MAX_GROUP:
            p = _kw_permutation_p(ranks, sizes, h, tie_corr)
            return TestResult("kruskal_wallis", h, _clip_p(p), df, "permutation")
    if exact:
        return TestResult("kruskal_wallis", h, _clip_p(_kw_exact_p(ranks, sizes, h, tie_corr)), df, "exact")
    return TestResult("kruskal_wallis", h, _clip_p(sps.chi2.sf(h, df[0])), df)


def _rank_sum_counts(doubled_ranks: np.ndarray, n1: int) -> dict[int, int]:
    """Number of size-``n1`` subsets per (doubled) rank sum, by dynamic programming."""
    dp: list[dict[int, int]] = [dict() for _ in range(n1 + 1)]
    dp[0][0] = 1
    for r in doubled_ranks:
        r = int(r)
        for k in range(min(n1, len(dp) - 1), 0, -1):
            src = dp[k - 1]
            dst = dp[k]
            for s, c in src.items():
                dst[s + r] = dst.get(s + r, 0) + c
    return dp[n1]


def mann_whitney_u(a, b, exact: bool | None = None) -> TestResult:
    """Two-sided Mann-Whitney U; the statistic is U of sample ``a``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise InsufficientData("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    ranks = midranks(pooled)
    r1 = ranks[:n1].sum()
    u1 = float(r1 - n1 * (n1 + 1) / 2.0)
    if exact is None:
        exact = max(n1, n2) <= EXACT_MWU_MAX_N
    if exact:
        counts = _rank_sum_counts(np.rint(2 * ranks).astype(int), n1)
        total = sum(counts.values())
        obs = int(round(2 * r1))
        lower = sum(c for s, c in counts.items() if s <= obs) / total
        upper = sum(c for s, c in counts.items() if s >= obs) / total
        return TestResult("mann_whitney_u", u1, _clip_p(2 * min(lower, upper)), None, "exact")
    n = n1 + n2
    mu = n1 * n2 / 2.0
    var = n1 * n2 / 12.0 * ((n + 1) - _tie_term(pooled) / (n * (n - 1)))
    if var <= 0:
        return TestResult("mann_whitney_u", u1, 1.0, None, "degenerate")
    z = max(abs(u1 - mu) - 0.5, 0.0) / math.sqrt(var)
    return TestResult("mann_whitney_u", u1, _clip_p(2 * sps.norm.sf(z)))


def welch_t(a, b) -> TestResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise InsufficientData("Welch t needs >= 2 observations per sample")
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    diff = a.mean() - b.mean()
    if va + vb == 0:
        return TestResult("welch_t", 0.0 if diff == 0 else math.copysign(math.inf, diff),
                          1.0 if diff == 0 else 0.0, None, "degenerate")
    t = diff / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    return TestResult("welch_t", float(t), _clip_p(2 * sps.t.sf(abs(t), df)), (df,))


def normality_check(values) -> dict:
    """D'Agostino-Pearson skewness/kurtosis omnibus; informational only."""
    values = np.asarray(values, dtype=float)
    if len(values) < 8 or np.ptp(values) == 0:
        return {"n": int(len(values)), "statistic": None, "p_value": None}
    k2, p = sps.normaltest(values)
    return {"n": int(len(values)), "statistic": float(k2), "p_value": float(p)}


def bonferroni(pvalues: dict[str, float]) -> dict[str, float]:
    m = len(pvalues)
    return {k: min(1.0, p * m) for k, p in pvalues.items()}


def compare_groups(groups: dict[str, Sequence[float]], alpha: float = 0.05) -> dict:
    """Equal-variance check, then ANOVA + Welch or Kruskal-Wallis + Mann-Whitney.

    Post-hoc pairs are only computed when the omnibus test is significant.
    """
    names = list(groups)
    data = [np.asarray(groups[n], float) for n in names]
    try:
        levene = variance_equality_test(data)
    except DegenerateError:
        levene = TestResult("variance_equality", 0.0, 1.0, (len(data) - 1, sum(map(len, data)) - len(data)), "degenerate")
    parametric = levene.p_value > alpha
    if parametric:
        try:
            omni = one_way_anova(data)
        except DegenerateError:
            same = all(np.allclose(d.mean(), data[0].mean()) for d in data)
            df = (len(data) - 1, sum(map(len, data)) - len(data))
            omni = TestResult("one_way_anova", 0.0 if same else math.inf, 1.0 if same else 0.0, df, "degenerate")
        pair_test = welch_t
    else:
        omni = kruskal_wallis(data)
        pair_test = mann_whitney_u
    if omni.p_value <= alpha:
        raw = {f"{x} vs {y}": pair_test(groups[x], groups[y]).p_value for x, y in itertools.combinations(names, 2)}
        omni.posthoc = bonferroni(raw)
    return {"variance_test": levene, "omnibus": omni, "parametric": parametric}
