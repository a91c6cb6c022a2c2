import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from qmeta import baselines as bl


def quad1(x):
    return float((x[0] - 1.0) ** 2)


def rosen(x):
    return float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)


# ---------------------------------------------------------- Nelder-Mead

def test_nm_converges_on_1d_quadratic():
    tr = bl.nelder_mead(quad1, [0.0], 200)
    x, fx = tr.best()
    assert abs(x[0] - 1) < 1e-4
    assert len(tr) <= 200


def test_nm_rosenbrock():
    tr = bl.nelder_mead(rosen, [-1.2, 1.0], 2000, step=0.5)
    assert np.allclose(tr.best()[0], [1, 1], atol=1e-3)


def test_nm_constant_function_spends_budget():
    tr = bl.nelder_mead(lambda x: 3.0, [0.2, -0.1], 50)
    assert len(tr) == 50
    x, fx = tr.best()
    assert fx == 3.0 and np.array_equal(x, [0.2, -0.1])


def test_nm_budget_below_simplex():
    with pytest.raises(ValueError, match="budget below initial simplex size"):
        bl.nelder_mead(quad1, [0.0, 0.0, 0.0], 4)


def test_nm_initial_simplex_is_axis_aligned():
    tr = bl.nelder_mead(rosen, [0.5, -0.5], 10)
    assert np.allclose(tr.thetas[0], [0.5, -0.5])
    assert np.allclose(tr.thetas[1], [0.6, -0.5]) and np.allclose(tr.thetas[2], [0.5, -0.4])


def test_nm_respects_bounds():
    tr = bl.nelder_mead(lambda x: float(np.sum((x - 5) ** 2)), [0.0, 0.0], 300, step=0.5, bounds=(-1, 1))
    pts = np.array(tr.thetas)
    assert pts.min() >= -1 and pts.max() <= 1
    assert np.allclose(tr.best()[0], [1, 1], atol=1e-4)


def test_nm_continues_an_existing_trace():
    tr = bl.OptimizerTrace("x", 5)
    for v in (0.1, 0.2, 0.3):
        tr.query(quad1, [v])
    bl.nelder_mead(quad1, [0.0], 20, trace=tr)
    assert len(tr) == 23


def test_trace_budget_and_best_so_far():
    tr = bl.OptimizerTrace("t", 3)
    ys = iter([0.5, 0.7, 0.2])
    for k in range(3):
        tr.query(lambda _: next(ys), [k], truth=lambda x: -x[0])
    with pytest.raises(bl.BudgetExhausted):
        tr.query(quad1, [0.0])
    assert np.array_equal(tr.best_so_far(), [0.5, 0.5, 0.2])
    assert tr.values == [0, -1, -2] and tr.remaining == 0


# ---------------------------------------------------------- GP model

def gp_reference(X, y, Xs, ell, s2, noise):
    k = lambda A, B: s2 * np.exp(-0.5 * ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1) / ell ** 2)
    K = k(X, X) + noise * np.eye(len(X))
    Ks = k(Xs, X)
    mean = Ks @ np.linalg.solve(K, y)
    var = s2 - np.einsum("ij,ji->i", Ks, np.linalg.solve(K, Ks.T))
    return mean, var


def test_gp_interpolates_noise_free_data(rng):
    X = rng.uniform(-2, 2, (8, 2))
    y = np.sin(X[:, 0]) + X[:, 1] ** 2
    gp = bl.GpModel(X, y, 0.7, 1.3, 0.0)
    mean, var = gp.predict(X)
    assert np.max(np.abs(mean - y)) < 1e-8
    assert np.all(var >= 0) and np.max(var) < 1e-6


def test_gp_posterior_matches_direct_formula(rng):
    X = rng.uniform(-2, 2, (10, 3))
    y = rng.normal(size=10)
    Xs = rng.uniform(-2, 2, (5, 3))
    gp = bl.GpModel(X, y, 0.9, 2.0, 0.05)
    mean, var = gp.predict(Xs)
    m_ref, v_ref = gp_reference(X, y, Xs, 0.9, 2.0, 0.05 + gp.jitter)
    assert np.allclose(mean, m_ref, atol=1e-10) and np.allclose(var, v_ref, atol=1e-10)


def test_gp_log_marginal_likelihood(rng):
    X = rng.uniform(-1, 1, (6, 1))
    y = rng.normal(size=6)
    gp = bl.GpModel(X, y, 0.5, 1.5, 0.1)
    K = 1.5 * np.exp(-0.5 * (X - X.T) ** 2 / 0.25) + (0.1 + gp.jitter) * np.eye(6)
    ref = stats.multivariate_normal(np.zeros(6), K).logpdf(y)
    assert gp.log_marginal_likelihood() == pytest.approx(ref, rel=1e-10)


def test_gp_handles_duplicate_points():
    X = np.zeros((3, 2))
    gp = bl.GpModel(X, np.full(3, 0.7), 1.0, 1.0, 0.0)
    mean, var = gp.predict(np.zeros((1, 2)))
    assert mean[0] == pytest.approx(0.7, abs=1e-6) and var[0] >= 0


def test_gp_fit_prefers_correct_lengthscale(rng):
    X = np.linspace(-3, 3, 40)[:, None]
    y = np.sin(X[:, 0])
    gp = bl.GpModel.fit(X, y)
    assert 0.5 < gp.lengthscale < 5.0


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(1e-3, 4), st.floats(-3, 3))
def test_expected_improvement_matches_quadrature(mu, var, best):
    sd = math.sqrt(var)
    ref, _ = integrate.quad(lambda y: max(best - y, 0) * stats.norm.pdf(y, mu, sd), mu - 12 * sd, mu + 12 * sd,
                            points=[best], limit=200)
    assert bl.expected_improvement(np.array([mu]), np.array([var]), best)[0] == pytest.approx(ref, abs=1e-7)


def test_expected_improvement_zero_variance():
    assert bl.expected_improvement(np.array([0.4]), np.array([0.0]), 0.4)[0] == 0.0


def test_bayesopt_improves_and_is_reproducible():
    f = lambda x: float(np.sum((x - 1.0) ** 2))
    a = bl.gp_bayesopt(f, 2, 30, np.random.default_rng(4))
    b = bl.gp_bayesopt(f, 2, 30, np.random.default_rng(4))
    assert np.array_equal(a.thetas[0], [0, 0])
    assert len(a) == 30
    assert a.best()[1] < f(np.zeros(2))
    assert a.ys == b.ys
    pts = np.array(a.thetas)
    assert pts.min() >= -math.pi and pts.max() <= math.pi


# ---------------------------------------------------------- seeding

def test_random_seed_single_draw():
    draw = np.random.default_rng(9).uniform(-math.pi, math.pi, (1, 3))[0]
    out = bl.random_seed(quad1, 3, 1, np.random.default_rng(9))
    assert np.array_equal(out, draw)


def test_random_seed_is_argmin_and_counts_queries(rng):
    tr = bl.OptimizerTrace("r", 100)
    f = lambda x: float(np.sum(x ** 2))
    out = bl.random_seed(f, 2, 10, rng, trace=tr)
    assert len(tr) == 10
    assert f(out) == min(tr.ys)
    vqe = bl.random_seed(f, 4, 10, rng, box=bl.VQE_BOX)
    assert np.all(np.abs(vqe) <= 1)


def test_heuristic_seeds():
    assert np.array_equal(bl.heuristic_seed("maxcut", training_optima=[[0, 1], [2, 3]]), [1, 2])
    star = np.array([0.3, -0.2, 0.7, 0.1])
    assert np.allclose(bl.heuristic_seed("maxcut", training_optima=[star] * 5), star)
    ramp = bl.heuristic_seed("hubbard", p_steps=5, ramp=1.0).reshape(5, 3)
    assert np.allclose(ramp[:, 2], np.arange(1, 6) / 6)
    assert np.allclose(ramp[:, 0], 1 - np.arange(1, 6) / 6) and np.allclose(ramp[:, 0], ramp[:, 1])
    with pytest.raises(ValueError):
        bl.heuristic_seed("maxcut", training_optima=[])
