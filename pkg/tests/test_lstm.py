import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit

from qmeta import problems as pg
from qmeta.cost import QnnCost
from qmeta.lstm import (LstmParams, RnnState, Trajectory, cumulative_regret_loss, final_value_loss,
                        loss_and_grad, lstm_cell, observed_improvement_grad,
                        observed_improvement_loss, rnn_step, unroll)
from qmeta.lstm import _cell_backward, _cell_forward

from conftest import central_difference

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_zero_weights_give_zero_state():
    p = LstmParams.zeros(3, 5)
    h, c = lstm_cell(p, np.ones(4), np.zeros(5), np.zeros(5))
    assert np.array_equal(h, np.zeros(5)) and np.array_equal(c, np.zeros(5))


def test_bias_only_cell_matches_hand_arithmetic():
    H = 2
    p = LstmParams.zeros(1, H)
    p.bias[:] = [0.3, -0.2, 1.1, -0.7, 0.5, 0.9, 2.0, -1.0]
    c0 = np.array([0.4, -0.6])
    h, c = lstm_cell(p, np.zeros(2), np.zeros(H), c0)
    i, f = expit([0.3, -0.2]), expit([1.1, -0.7])
    g, o = np.tanh([0.5, 0.9]), expit([2.0, -1.0])
    c_ref = f * c0 + i * g
    assert np.allclose(c, c_ref, atol=1e-15)
    assert np.allclose(h, o * np.tanh(c_ref), atol=1e-15)


def test_cell_saturates_gracefully(rng):
    p = LstmParams.init(2, 4, rng, scale=1.0)
    h, c = lstm_cell(p, np.full(3, 1e3), np.zeros(4), np.zeros(4))
    assert np.all(np.isfinite(h)) and np.all(np.isfinite(c))


def test_cell_shape_checks(rng):
    p = LstmParams.init(2, 4, rng)
    with pytest.raises(ValueError):
        lstm_cell(p, np.zeros(4), np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        LstmParams(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8), np.zeros((3, 2)), np.zeros(2))


def test_cell_backward_matches_finite_differences(rng):
    p = LstmParams.init(2, 3, rng, scale=0.5)
    x, h, c = rng.normal(size=3), rng.normal(size=3), rng.normal(size=3)
    wh, wc = rng.normal(size=3), rng.normal(size=3)

    def scalar(flat):
        q = p.unflatten(flat)
        hn, cn, _ = _cell_forward(q, x, h, c)
        return wh @ hn + wc @ cn

    _, _, cache = _cell_forward(p, x, h, c)
    grads = {k: np.zeros_like(getattr(p, k)) for k in ("w_in", "w_rec", "bias")}
    dx, dh, dc = _cell_backward(p, cache, wh, wc, grads)
    fd = central_difference(scalar, p.flatten(), 1e-6)
    ana = np.concatenate([grads["w_in"].ravel(), grads["w_rec"].ravel(), grads["bias"].ravel()])
    assert np.allclose(ana, fd[: ana.size], atol=1e-8)
    fdx = central_difference(lambda v: wh @ _cell_forward(p, v, h, c)[0] + wc @ _cell_forward(p, v, h, c)[1], x, 1e-6)
    assert np.allclose(dx, fdx, atol=1e-8)


def test_params_serialization_round_trip(rng):
    p = LstmParams.init(4, 6, rng)
    q = LstmParams.from_dict(p.to_dict())
    assert np.array_equal(p.flatten(), q.flatten())
    assert np.array_equal(p.unflatten(p.flatten()).flatten(), p.flatten())
    assert np.all(p.b_out == 0) and np.max(np.abs(p.w_in)) <= 0.08


# ------------------------------------------------------------ stepping

def test_zero_params_propose_output_bias():
    p = LstmParams.zeros(2, 3)
    p.b_out[:] = [0.25, -0.5]
    _, th = rnn_step(p, RnnState.initial(p), 0.7)
    assert np.array_equal(th, [0.25, -0.5])


def test_rnn_step_deterministic_and_sensitive(rng):
    p = LstmParams.init(3, 8, rng, scale=0.3)
    s = RnnState.initial(p)
    a = rnn_step(p, s, 0.4)[1]
    assert np.array_equal(a, rnn_step(p, s, 0.4)[1])
    assert not np.allclose(a, rnn_step(p, s, 0.5)[1])


def test_rnn_step_tracks_best_and_is_bounded(rng):
    p = LstmParams.init(3, 8, rng, scale=2.0)
    s = RnnState.initial(p)
    seen = []
    for y in rng.normal(size=12) * 50:
        s, th = rnn_step(p, s, y)
        seen.append(y)
        assert s.best_y == min(seen)
        bound = np.abs(p.w_out).sum(axis=1) + np.abs(p.b_out)
        assert np.all(np.abs(th) <= bound + 1e-12)


def test_unroll(rng):
    cost = QnnCost(pg.sample_maxcut((6, 6), 0))
    p = LstmParams.init(4, 8, rng)
    t1 = unroll(p, cost, 1)
    assert len(t1) == 1 and np.array_equal(t1.thetas[0], np.zeros(4)) and t1.ys[0] == pytest.approx(0.5)
    a, b = unroll(p, cost, 10), unroll(p, cost, 10)
    assert len(a) == 10 and a.thetas.shape == (10, 4)
    assert np.array_equal(a.ys, b.ys)
    n1 = unroll(p, cost, 5, 0.05, np.random.default_rng(3))
    n2 = unroll(p, cost, 5, 0.05, np.random.default_rng(3))
    assert n1.noisy and np.array_equal(n1.ys, n2.ys)


# -------------------------------------------------------------- losses

def test_loss_examples():
    y = [3, 2, 2.5, 1]
    assert observed_improvement_loss(y) == -2
    assert observed_improvement_loss([1, 1, 2, 3]) == 0
    assert cumulative_regret_loss(y) == 8.5
    assert cumulative_regret_loss([0, 0, 0]) == 0
    assert final_value_loss([3, 2, 1]) == 1
    assert final_value_loss([4.2]) == 4.2
    tr = Trajectory(np.zeros((4, 2)), np.array(y, float))
    assert observed_improvement_loss(tr) == -2


@settings(max_examples=300)
@given(st.lists(finite, min_size=1, max_size=30))
def test_observed_improvement_telescopes(ys):
    val = observed_improvement_loss(ys)
    assert val == pytest.approx(min(ys) - ys[0], abs=1e-12, rel=1e-12)
    assert val <= 0
    assert (val == 0) == (min(ys) >= ys[0])


@settings(max_examples=100)
@given(st.lists(finite, min_size=1, max_size=20), st.floats(-100, 100))
def test_regret_shift(ys, d):
    shifted = [y + d for y in ys]
    assert cumulative_regret_loss(shifted) == pytest.approx(cumulative_regret_loss(ys) + len(ys) * d,
                                                            abs=1e-9 * (1 + sum(map(abs, ys)) + abs(d) * len(ys)))


@settings(max_examples=100)
@given(st.lists(finite, min_size=2, max_size=15), st.floats(-100, 100))
def test_final_value_ignores_history(ys, z):
    assert final_value_loss([z] + ys[1:]) == final_value_loss(ys)


@pytest.mark.parametrize("name", ["observed_improvement", "cumulative_regret", "final_value"])
def test_loss_gradients_match_finite_differences(name, rng):
    for _ in range(20):
        ys = rng.normal(size=8)
        _, g = loss_and_grad(name, ys)
        fd = central_difference(lambda v: loss_and_grad(name, v)[0], ys, 1e-7)
        assert np.allclose(g, fd, atol=1e-6)


def test_observed_improvement_tie_has_no_gradient():
    g = observed_improvement_grad([1.0, 1.0, 2.0])
    assert np.array_equal(g, [0, 0, 0])


def test_unknown_loss():
    with pytest.raises(ValueError):
        loss_and_grad("nope", [1.0])
    with pytest.raises(ValueError):
        observed_improvement_loss([])
