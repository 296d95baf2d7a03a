import math

import numpy as np
import pytest

from gaitlab.learners import LEARNERS, make_learner
from gaitlab.learners.base import Objective, RunTrace, run_learner
from gaitlab.learners.bo import (
    BoConfig,
    GaussianProcess,
    bo_run,
    gp_posterior,
    lhs_sample,
    matern52,
    matern52_matrix,
)
from gaitlab.learners.nipes import CmaState, Nipes, NipesConfig, cma_state_update, nipes_run, novelty_score, population_novelty
from gaitlab.learners.revde import (
    RevDE,
    RevdeConfig,
    reversible_transform,
    revde_generation,
    revde_run,
    select_top,
    transform_matrix,
)

OPT = np.array([0.3, -0.2])


def quadratic(x):
    return -float(((np.asarray(x) - OPT) ** 2).sum())


def quadratic3d(x):
    return -float((np.asarray(x) ** 2).sum())


# --- Latin hypercube -------------------------------------------------------

def test_lhs_single_point():
    x = lhs_sample(1, 4, np.random.default_rng(0))
    assert x.shape == (1, 4) and np.all((x >= -1) & (x <= 1))


def _strata_ok(x, n):
    strata = np.floor((x + 1) / 2 * n).astype(int)
    return all(sorted(col) == list(range(n)) for col in strata.T)


def test_lhs_one_sample_per_stratum():
    rng = np.random.default_rng(1)
    assert all(_strata_ok(lhs_sample(50, 18, rng), 50) for _ in range(200))


def test_lhs_deterministic():
    a = lhs_sample(50, 3, np.random.default_rng(7))
    b = lhs_sample(50, 3, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


# --- GP --------------------------------------------------------------------

def test_matern_values():
    assert matern52([0.1, 0.2], [0.1, 0.2]) == 1.0
    expected = (1 + math.sqrt(5) + 5 / 3) * math.exp(-math.sqrt(5))
    assert matern52([0.0], [0.2]) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.5240, abs=1e-4)
    ks = [matern52([0.0], [r]) for r in np.linspace(0, 5, 60)]
    assert all(b < a for a, b in zip(ks, ks[1:]))
    assert ks[-1] < 1e-10


def test_matern_matrix_agrees_with_scalar():
    rng = np.random.default_rng(0)
    a, b = rng.uniform(-1, 1, (4, 3)), rng.uniform(-1, 1, (5, 3))
    m = matern52_matrix(a, b, 1.0, 0.2)
    ref = np.array([[matern52(x, y) for y in b] for x in a])
    np.testing.assert_allclose(m, ref, atol=1e-12)


def test_gp_interpolates():
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, (15, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1]
    gp = GaussianProcess(X, y)
    m, v = gp.predict(X)
    np.testing.assert_allclose(m, y, atol=1e-6)
    assert np.all(v <= 1e-6)


def test_gp_prior_far_away():
    X = np.array([[0.0, 0.0], [0.1, 0.0]])
    m, v = gp_posterior(X, [1.0, 2.0], [50.0, 50.0])
    assert abs(m) < 1e-12 and v == pytest.approx(1.0)


def test_gp_three_points_hand_solved():
    X = np.array([[-0.5], [0.0], [0.3]])
    y = np.array([0.2, -1.0, 0.7])
    xs = 0.1
    k = lambda a, b: matern52([a], [b])  # noqa: E731
    K = np.array([[k(a, b) for b in X[:, 0]] for a in X[:, 0]]) + 1e-10 * np.eye(3)
    ks = np.array([k(xs, a) for a in X[:, 0]])
    mean = ks @ np.linalg.solve(K, y)
    var = 1.0 - ks @ np.linalg.solve(K, ks)
    m, v = gp_posterior(X, y, [xs])
    assert m == pytest.approx(mean, abs=1e-9)
    assert v == pytest.approx(var, abs=1e-9)


def test_gp_duplicate_points_escalate_jitter():
    X = np.zeros((3, 2))
    gp = GaussianProcess(X, [1.0, 1.0, 1.0])
    assert gp.jitter >= 1e-10
    assert np.isfinite(gp.predict([[0.5, 0.5]])[0]).all()


def test_gp_input_validation():
    with pytest.raises(ValueError):
        gp_posterior(np.zeros((2, 1)), [1.0], [0.0])


# --- BO --------------------------------------------------------------------

def test_bo_initial_records_are_lhs():
    seed = 11
    trace = bo_run(Objective(3, quadratic3d), BoConfig(iterations=3), seed=seed)
    design = lhs_sample(50, 3, np.random.default_rng(seed))
    np.testing.assert_array_equal(np.array(trace.genomes[:50]), design)
    assert len(trace) == 53


def test_bo_same_seed_same_trace():
    cfg = BoConfig(init_samples=10, iterations=5)
    a = bo_run(Objective(2, quadratic), cfg, seed=3)
    b = bo_run(Objective(2, quadratic), cfg, seed=3)
    assert a.to_jsonl() == b.to_jsonl()


@pytest.mark.slow
def test_bo_finds_quadratic_optimum():
    hits = sum(max(bo_run(Objective(2, quadratic), seed=s).fitness) >= -0.05 for s in range(5))
    assert hits == 5


def test_bo_budget_split():
    cfg = BoConfig.for_budget(300)
    assert (cfg.init_samples, cfg.iterations) == (50, 250)


# --- CMA-ES / NIPES --------------------------------------------------------

def test_cma_identical_offspring():
    st = CmaState.initial(np.array([0.2, -0.1, 0.4]), 0.5, 10)
    new = cma_state_update(st, np.tile(st.mean, (10, 1)))
    np.testing.assert_allclose(new.mean, st.mean)
    assert new.sigma < st.sigma


def test_cma_sphere_1d():
    rng = np.random.default_rng(0)
    st = CmaState.initial(np.array([0.9]), 0.5, 10)
    for _ in range(50):
        x = st.sample(rng, clip=False)
        order = np.argsort(((x - 0.3) ** 2).sum(1))
        st = cma_state_update(st, x[order])
        assert np.all(st.D > 0)
    assert abs(st.mean[0] - 0.3) < 1e-2


def test_cma_eigenvalues_positive():
    rng = np.random.default_rng(1)
    st = CmaState.initial(np.zeros(6), 0.3, 12)
    for _ in range(40):
        x = st.sample(rng, clip=False)
        st = cma_state_update(st, x[np.argsort(np.abs(x).sum(1))])
        assert np.linalg.eigvalsh(st.C).min() > 0


def test_novelty_duplicate_only():
    ind = np.array([0.3, 0.1])
    assert novelty_score(ind, [ind.copy()]) == 0.0


def test_novelty_far_from_cluster():
    rng = np.random.default_rng(2)
    cluster = rng.normal(0, 1e-4, (20, 2))
    ind = np.array([5.0, 0.0])
    assert novelty_score(ind, cluster, k=15) == pytest.approx(5.0, abs=1e-3)


def test_novelty_matches_bruteforce():
    rng = np.random.default_rng(3)
    pop = rng.uniform(-1, 1, (20, 4))
    archive = rng.uniform(-1, 1, (7, 4))
    for k in (1, 5, 15):
        vec = population_novelty(pop, archive, k)
        for i, ind in enumerate(pop):
            others = [p for j, p in enumerate(pop) if j != i] + list(archive)
            d = sorted(math.dist(ind, o) for o in others)
            ref = sum(d[:k]) / k
            assert novelty_score(ind, pop, archive, k) == pytest.approx(ref, abs=1e-12)
            assert vec[i] == pytest.approx(ref, abs=1e-12)


def test_nipes_restarts_on_constant_objective():
    nip = Nipes(3, np.random.default_rng(0))
    trace = run_learner(nip, Objective(3, lambda x: 1.0), 300)
    assert len(trace) == 300
    assert nip.restarts >= 1
    assert nip.lambda_history[:2] == [10, 20]
    # earliest window: 5 generations of 10 trigger the first restart
    assert nip.lambda_history == [10, 20, 40]


def test_nipes_truncated_last_generation():
    seen = []

    class Spy(Nipes):
        def tell(self, genomes, fitness):
            seen.append(len(genomes))
            super().tell(genomes, fitness)

    trace = run_learner(Spy(2, np.random.default_rng(1)), Objective(2, lambda x: 0.0), 300)
    assert len(trace) == 300
    assert sum(seen) == 300
    assert seen[-1] < max(seen)


def _rastrigin(x):
    x = 5.12 * np.asarray(x)
    return -(10 * len(x) + float((x * x - 10 * np.cos(2 * math.pi * x)).sum()))


def test_nipes_rastrigin_best_improves():
    trace = nipes_run(Objective(2, _rastrigin), seed=4)
    best = np.maximum.accumulate(trace.fitness)
    assert best[-1] >= best[0]
    assert np.all(np.diff(best) >= 0)
    assert np.all(np.abs(trace.genomes) <= 1)


def test_nipes_config_validation():
    with pytest.raises(ValueError):
        NipesConfig(lambda0=2)


# --- RevDE -----------------------------------------------------------------

def test_revde_worked_example():
    l1, l2, l3 = reversible_transform(np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.zeros(2), 0.5)
    np.testing.assert_allclose(l1, [1, 0.5], atol=1e-12)
    np.testing.assert_allclose(l2, [-0.5, 0.75], atol=1e-12)
    np.testing.assert_allclose(l3, [0.75, -0.125], atol=1e-12)


def test_revde_generation_without_masking():
    top = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    class FixedPerm:
        """Stands in for a generator: identity-shifted permutations and no masking."""

        def __init__(self):
            self.calls = 0

        def permutation(self, n):
            self.calls += 1
            return (np.arange(n) + self.calls) % n

        def random(self, shape):
            return np.zeros(shape)

    out = revde_generation(top, 0.5, 1.0, FixedPerm())
    assert out.shape == (9, 2)
    np.testing.assert_allclose(out[0], [1, 0.5], atol=1e-12)
    np.testing.assert_allclose(out[3], [-0.5, 0.75], atol=1e-12)
    np.testing.assert_allclose(out[6], [0.75, -0.125], atol=1e-12)


def test_revde_identical_parents():
    m = np.array([0.2, -0.7, 0.1])
    for lam in reversible_transform(m, m, m, 0.5):
        np.testing.assert_allclose(lam, m)


def test_revde_invertible():
    rng = np.random.default_rng(0)
    T = transform_matrix(0.5)
    assert np.linalg.det(T) == pytest.approx(1.0)
    for _ in range(100):
        m = rng.normal(size=(3, 5))
        out = np.array(reversible_transform(*m, 0.5))
        np.testing.assert_allclose(np.linalg.solve(T, out), m, atol=1e-9)


def test_select_top():
    rng = np.random.default_rng(0)
    f = rng.normal(size=40)
    keep = select_top(f, 10)
    rest = np.setdiff1d(np.arange(40), keep)
    assert f[keep].min() >= f[rest].max()


def test_revde_budget_and_selection():
    seen = []

    class Spy(RevDE):
        def tell(self, genomes, fitness):
            seen.append(len(genomes))
            super().tell(genomes, fitness)
            assert len(self.parents) == 10

    trace = run_learner(Spy(3, np.random.default_rng(0)), Objective(3, quadratic3d), 300)
    assert len(trace) == 300
    assert seen == [30] * 10


def test_revde_same_seed():
    a = revde_run(Objective(3, quadratic3d), seed=5)
    b = revde_run(Objective(3, quadratic3d), seed=5)
    assert a.to_jsonl() == b.to_jsonl()


def test_revde_config_validation():
    with pytest.raises(ValueError):
        RevdeConfig(lam=20, mu=10)


# --- shared ------------------------------------------------------------------

@pytest.mark.parametrize("name", LEARNERS)
def test_every_learner_exact_budget(name, tmp_path):
    rng = np.random.default_rng(0)
    learner = make_learner(name, 2, rng, budget=70)
    trace = run_learner(learner, Objective(2, quadratic), 70, "toy", 0)
    assert len(trace) == 70
    path = tmp_path / "t.jsonl"
    trace.write(path)
    back = RunTrace.read(path)
    assert back.fitness == trace.fitness and back.genomes == trace.genomes
    assert [r["eval"] for r in trace.records] == list(range(1, 71))


def test_unknown_learner():
    with pytest.raises(ValueError):
        make_learner("sgd", 2, np.random.default_rng(0))


def test_trace_read_rejects_gaps(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"eval":1,"genome":[0],"fitness":0}\n{"eval":3,"genome":[0],"fitness":0}\n')
    with pytest.raises(ValueError):
        RunTrace.read(p)
