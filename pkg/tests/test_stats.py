import itertools
import math

import numpy as np
import pytest
from scipy.integrate import quad

from gaitlab.errors import DegenerateError, InsufficientData
from gaitlab.stats import (
    bonferroni,
    compare_groups,
    kruskal_wallis,
    mann_whitney_u,
    normality_check,
    one_way_anova,
    variance_equality_test,
    welch_t,
)


def _ranks(values):
    """Midranks by explicit counting."""
    v = np.asarray(values, float)
    less = (v[:, None] > v[None, :]).sum(1)
    equal = (v[:, None] == v[None, :]).sum(1)
    return less + (equal + 1) / 2.0


def _h(groups):
    pooled = np.concatenate(groups)
    n = len(pooled)
    r = _ranks(pooled)
    h, start = 0.0, 0
    for g in groups:
        h += r[start:start + len(g)].sum() ** 2 / len(g)
        start += len(g)
    h = 12 / (n * (n + 1)) * h - 3 * (n + 1)
    _, c = np.unique(pooled, return_counts=True)
    return h / (1 - ((c**3) - c).sum() / (n**3 - n))


def _kw_oracle(groups):
    """Exact p by enumerating every distinct relabelling of the pooled sample."""
    pooled = np.concatenate(groups)
    sizes = [len(g) for g in groups]
    h_obs = _h(groups)
    hits = total = 0
    idx = range(len(pooled))
    for first in itertools.combinations(idx, sizes[0]):
        rest = [i for i in idx if i not in first]
        for second in itertools.combinations(rest, sizes[1]):
            third = [i for i in rest if i not in second]
            h = _h([pooled[list(first)], pooled[list(second)], pooled[third]])
            hits += h >= h_obs - 1e-9
            total += 1
    return hits / total


def _mwu_oracle(a, b):
    pooled = np.concatenate([a, b])
    r = _ranks(pooled)
    n1 = len(a)
    obs = r[:n1].sum()
    sums = np.array([r[list(c)].sum() for c in itertools.combinations(range(len(pooled)), n1)])
    lo = np.mean(sums <= obs + 1e-9)
    hi = np.mean(sums >= obs - 1e-9)
    return min(1.0, 2 * min(lo, hi))


def _f_sf(f, d1, d2):
    """Upper tail of the F distribution by integrating its density."""
    beta = math.gamma(d1 / 2) * math.gamma(d2 / 2) / math.gamma((d1 + d2) / 2)

    def pdf(x):
        return math.sqrt((d1 * x) ** d1 * d2**d2 / (d1 * x + d2) ** (d1 + d2)) / (x * beta)

    return quad(pdf, f, math.inf)[0]


# --- ANOVA -----------------------------------------------------------------

def test_anova_worked_example():
    res = one_way_anova([[1, 2, 3], [2, 3, 4], [3, 4, 5]])
    assert res.statistic == 3.0
    assert res.df == (2, 6)
    assert res.p_value == pytest.approx(_f_sf(3.0, 2, 6), abs=1e-8)
    assert res.p_value == pytest.approx(0.125, abs=1e-12)


def test_anova_identical_groups():
    res = one_way_anova([[1, 2, 3]] * 3)
    assert res.statistic == 0.0 and res.p_value == 1.0


def test_anova_degenerate_and_small():
    with pytest.raises(DegenerateError):
        one_way_anova([[1, 1], [2, 2]])
    with pytest.raises(InsufficientData):
        one_way_anova([[1, 2]])


def test_anova_matches_f_integral_random():
    rng = np.random.default_rng(0)
    groups = [rng.normal(m, 1, 7) for m in (0, 0.5, 1.2)]
    res = one_way_anova(groups)
    assert res.p_value == pytest.approx(_f_sf(res.statistic, *res.df), abs=1e-7)


# --- Levene-type -------------------------------------------------------------

def test_variance_df_3x20():
    rng = np.random.default_rng(1)
    res = variance_equality_test([rng.normal(size=20) for _ in range(3)])
    assert res.df == (2, 57)


def test_variance_same_spread_pattern():
    base = np.array([1.0, 4.0, 2.0, 8.0])
    res = variance_equality_test([base, base + 10, base - 3])
    assert res.statistic == pytest.approx(0.0, abs=1e-12)


def test_variance_detects_scaled_group():
    rng = np.random.default_rng(2)
    rejections = 0
    for _ in range(300):
        g = [rng.normal(size=20), rng.normal(size=20), 10 * rng.normal(size=20)]
        rejections += variance_equality_test(g).p_value < 0.01
    assert rejections / 300 >= 0.95


# --- Kruskal-Wallis ----------------------------------------------------------

def test_kw_identical_and_tied():
    assert kruskal_wallis([[1, 2, 3]] * 3).statistic == pytest.approx(0.0, abs=1e-12)
    res = kruskal_wallis([[2, 2], [2, 2, 2], [2]])
    assert res.statistic == 0.0 and res.p_value == 1.0


def test_kw_separated_pairs():
    res = kruskal_wallis([[1, 2], [3, 4], [5, 6]])
    assert res.statistic == pytest.approx(_h([np.array(g, float) for g in ([1, 2], [3, 4], [5, 6])]))
    assert res.statistic == pytest.approx(32 / 7)
    assert res.p_value == pytest.approx(_kw_oracle([np.array(g, float) for g in ([1, 2], [3, 4], [5, 6])]), abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_kw_matches_enumeration_small(seed):
    rng = np.random.default_rng(seed)
    groups = [np.round(rng.normal(m, 1, 3), 1) for m in (0, 0.7, 1.5)]
    assert kruskal_wallis(groups).p_value == pytest.approx(_kw_oracle(groups), abs=0.01)


def test_kw_ten_per_group_matches_permutation():
    rng = np.random.default_rng(5)
    groups = [rng.normal(m, 1, 10) for m in (0, 0.4, 0.9)]
    pooled = np.concatenate(groups)
    h_obs = _h(groups)
    n_perm = 40000
    perm_rng = np.random.default_rng(6)
    r = _ranks(pooled)
    hits = 0
    for _ in range(n_perm):
        p = perm_rng.permutation(r)
        s = np.array([p[:10].sum(), p[10:20].sum(), p[20:].sum()])
        h = 12 / (30 * 31) * (s**2 / 10).sum() - 3 * 31
        hits += h >= h_obs - 1e-9
    # Monte-Carlo standard error is about 0.0025 here
    res = kruskal_wallis(groups)
    assert res.method == "permutation"
    assert res.p_value == pytest.approx(hits / n_perm, abs=0.01)
    assert kruskal_wallis(groups).p_value == res.p_value


def test_kw_large_groups_use_chi_square():
    rng = np.random.default_rng(8)
    res = kruskal_wallis([rng.normal(size=15) for _ in range(3)])
    assert res.method == "asymptotic"


# --- Mann-Whitney ------------------------------------------------------------

def test_mwu_separated():
    res = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert res.statistic == 0.0
    assert res.p_value == pytest.approx(_mwu_oracle(np.array([1, 2, 3.0]), np.array([4, 5, 6.0])))


def test_mwu_same_sample():
    a = [3.0, 1.0, 4.0, 1.5, 9.0]
    assert mann_whitney_u(a, list(a)).p_value == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(3))
def test_mwu_ten_vs_ten_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    a = np.round(rng.normal(0, 1, 10), 1)
    b = np.round(rng.normal(0.8, 1, 10), 1)
    assert mann_whitney_u(a, b).p_value == pytest.approx(_mwu_oracle(a, b), abs=0.01)


def test_mwu_large_sample_uses_normal_approximation():
    rng = np.random.default_rng(7)
    res = mann_whitney_u(rng.normal(size=30), rng.normal(1, 1, 30))
    assert res.method == "asymptotic"
    assert res.p_value < 0.05


def test_mwu_empty():
    with pytest.raises(InsufficientData):
        mann_whitney_u([], [1.0])


# --- Welch / helpers -----------------------------------------------------------

def test_welch_known_value():
    a, b = [1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0, 10.0]
    res = welch_t(a, b)
    va, vb = np.var(a, ddof=1) / 4, np.var(b, ddof=1) / 5
    assert res.statistic == pytest.approx((2.5 - 6.0) / math.sqrt(va + vb))
    assert res.df[0] == pytest.approx((va + vb) ** 2 / (va**2 / 3 + vb**2 / 4))


def test_bonferroni():
    assert bonferroni({"a": 0.01, "b": 0.3, "c": 0.5}) == {"a": 0.03, "b": pytest.approx(0.9), "c": 1.0}


def test_normality_check_small_and_constant():
    assert normality_check([1, 2, 3])["p_value"] is None
    assert normality_check([2.0] * 20)["p_value"] is None
    assert normality_check(np.random.default_rng(0).normal(size=50))["p_value"] > 0.0


# --- compare_groups --------------------------------------------------------------

def test_compare_identical_groups():
    g = [1.0, 2.0, 3.5, 4.0, 2.2]
    out = compare_groups({"bo": g, "nipes": list(g), "revde": list(g)})
    assert out["omnibus"].p_value == pytest.approx(1.0)
    assert out["omnibus"].posthoc == {}


def test_compare_constant_identical_groups():
    out = compare_groups({"a": [1.0] * 5, "b": [1.0] * 5, "c": [1.0] * 5})
    assert out["omnibus"].p_value == 1.0


def test_compare_flags_shifted_learner():
    rng = np.random.default_rng(3)
    flagged = 0
    for _ in range(50):
        groups = {"bo": rng.normal(0, 1, 10), "nipes": rng.normal(3, 1, 10), "revde": rng.normal(0, 1, 10)}
        out = compare_groups(groups)
        assert out["omnibus"].p_value < 0.05
        ph = out["omnibus"].posthoc
        flagged += ph["bo vs nipes"] < 0.05 and ph["nipes vs revde"] < 0.05
    assert flagged >= 48


def test_compare_uses_rank_test_for_unequal_spread():
    rng = np.random.default_rng(4)
    groups = {"a": rng.normal(0, 0.1, 20), "b": rng.normal(0, 0.1, 20), "c": rng.normal(5, 10, 20)}
    out = compare_groups(groups)
    assert not out["parametric"]
    assert out["omnibus"].name == "kruskal_wallis"
