"""LSTM optimizer network, trajectory unrolling and meta-losses.

At every step the cell reads ``x_t = [theta_t, y_t]`` and the output head maps
the new hidden state to the next proposal ``theta_{t+1} = W_out h_t + b_out``.
Arrays may carry a leading batch axis; everything below broadcasts over it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GATES = ("input", "forget", "candidate", "output")

_FIELDS = ("w_in", "w_rec", "bias", "w_out", "b_out")


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class LstmParams:
    """Weights of a single-layer LSTM plus an affine output head.

    ``w_in``: (4H, m+1), ``w_rec``: (4H, H), ``bias``: (4H,), gate blocks in
    the order input, forget, candidate, output; ``w_out``: (m, H); ``b_out``: (m,).
    """

    w_in: np.ndarray
    w_rec: np.ndarray
    bias: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def __post_init__(self):
        H4, d = self.w_in.shape
        H = H4 // 4
        m = d - 1
        shapes = {"w_in": (4 * H, m + 1), "w_rec": (4 * H, H), "bias": (4 * H,),
                  "w_out": (m, H), "b_out": (m,)}
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            setattr(self, name, arr)

    @property
    def num_params(self) -> int:
        return self.w_out.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w_rec.shape[1]

    @classmethod
    def zeros(cls, m: int, hidden: int) -> "LstmParams":
        return cls(np.zeros((4 * hidden, m + 1)), np.zeros((4 * hidden, hidden)),
                   np.zeros(4 * hidden), np.zeros((m, hidden)), np.zeros(m))

    @classmethod
    def init(cls, m: int, hidden: int, rng: np.random.Generator, scale: float = 0.08) -> "LstmParams":
        u = lambda *s: rng.uniform(-scale, scale, s)
        return cls(u(4 * hidden, m + 1), u(4 * hidden, hidden), u(4 * hidden),
                   u(m, hidden), np.zeros(m))

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f) for f in _FIELDS]

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, flat: np.ndarray) -> "LstmParams":
        out, pos = [], 0
        for a in self.arrays():
            out.append(np.asarray(flat[pos:pos + a.size], dtype=float).reshape(a.shape))
            pos += a.size
        if pos != flat.size:
            raise ValueError("flat vector has the wrong length")
        return LstmParams(*out)

    def copy(self) -> "LstmParams":
        return LstmParams(*(a.copy() for a in self.arrays()))

    def to_dict(self) -> dict:
        return {f: getattr(self, f).tolist() for f in _FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "LstmParams":
        return cls(*(np.array(d[f], dtype=float) for f in _FIELDS))


def lstm_cell(p: LstmParams, x, h, c):
    """Standard LSTM update; returns ``(h', c')``."""
    h_new, c_new, _ = _cell_forward(p, x, h, c)
    return h_new, c_new


def _cell_forward(p: LstmParams, x, h, c):
    x, h, c = np.asarray(x, float), np.asarray(h, float), np.asarray(c, float)
    H = p.hidden_dim
    if x.shape[-1] != p.w_in.shape[1] or h.shape[-1] != H or c.shape[-1] != H:
        raise ValueError("input/state dimensions do not match the parameters")
    z = x @ p.w_in.T + h @ p.w_rec.T + p.bias
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = sigmoid(z[..., 3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (x, h, c, i, f, g, o, tc)


def _cell_backward(p: LstmParams, cache, dh_new, dc_new, grads: dict):
    """Accumulate weight gradients into ``grads``; return ``(dx, dh, dc)``."""
    x, h, c, i, f, g, o, tc = cache
    do = dh_new * tc
    dc = dc_new + dh_new * o * (1.0 - tc * tc)
    di = dc * g
    df = dc * c
    dg = dc * i
    dc_prev = dc * f
    dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)], axis=-1)
    x2, h2, dz2 = np.atleast_2d(x), np.atleast_2d(h), np.atleast_2d(dz)
    grads["w_in"] += dz2.T @ x2
    grads["w_rec"] += dz2.T @ h2
    grads["bias"] += dz2.sum(axis=0)
    return dz @ p.w_in, dz @ p.w_rec, dc_prev


@dataclass
class RnnState:
    h: np.ndarray
    c: np.ndarray
    theta: np.ndarray
    best_y: float = np.inf

    @classmethod
    def initial(cls, p: LstmParams) -> "RnnState":
        H, m = p.hidden_dim, p.num_params
        return cls(np.zeros(H), np.zeros(H), np.zeros(m), np.inf)


def rnn_step(p: LstmParams, s: RnnState, y: float) -> tuple[RnnState, np.ndarray]:
    """Feed ``(theta_t, y_t)``; return the new state and ``theta_{t+1}``."""
    x = np.append(s.theta, y)
    h, c = lstm_cell(p, x, s.h, s.c)
    theta_next = p.w_out @ h + p.b_out
    return RnnState(h, c, theta_next, min(s.best_y, float(y))), theta_next


@dataclass
class Trajectory:
    thetas: np.ndarray  # (T, m)
    ys: np.ndarray  # (T,)
    noisy: bool = False
    instance_id: str = ""
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ys)

    def best(self) -> tuple[np.ndarray, float]:
        k = int(np.argmin(self.ys))
        return self.thetas[k], float(self.ys[k])


def unroll(p: LstmParams, cost, T: int, variance: float = 0.0,
           rng: np.random.Generator | None = None) -> Trajectory:
    """Run the network for ``T`` queries starting from ``theta_1 = 0``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if variance > 0 and rng is None:
        raise ValueError("noisy unroll needs an rng")
    s = RnnState.initial(p)
    thetas, ys = [], []
    for t in range(T):
        theta = s.theta
        y = cost.evaluate_noisy(theta, variance, rng) if variance > 0 else cost.evaluate(theta)
        thetas.append(theta)
        ys.append(y)
        if t < T - 1:
            s, _ = rnn_step(p, s, y)
    return Trajectory(np.array(thetas), np.array(ys), variance > 0, getattr(cost, "instance_id", ""))


# ------------------------------------------------------------------ losses

def _ys(tr) -> np.ndarray:
    ys = np.asarray(tr.ys if isinstance(tr, Trajectory) else tr, dtype=float)
    if ys.ndim != 1 or ys.size == 0:
        raise ValueError("need a non-empty 1-D history")
    return ys


def observed_improvement_loss(tr) -> float:
    """``sum_{t>=2} min(y_t - min_{j<t} y_j, 0)``; the first query is the baseline."""
    ys = _ys(tr)
    total = 0.0
    best = ys[0]
    for y in ys[1:]:
        if y < best:
            total += y - best
            best = y
    return total


def cumulative_regret_loss(tr) -> float:
    return float(np.sum(_ys(tr)))


def final_value_loss(tr) -> float:
    return float(_ys(tr)[-1])


def observed_improvement_grad(ys) -> np.ndarray:
    """Subgradient w.r.t. ``ys``; ties with the running minimum count as no improvement."""
    ys = _ys(ys)
    grad = np.zeros_like(ys)
    arg = 0
    for t in range(1, len(ys)):
        if ys[t] < ys[arg]:
            grad[t] += 1.0
            grad[arg] -= 1.0
            arg = t
    return grad


def loss_and_grad(name: str, ys) -> tuple[float, np.ndarray]:
    ys = _ys(ys)
    if name == "observed_improvement":
        return observed_improvement_loss(ys), observed_improvement_grad(ys)
    if name == "cumulative_regret":
        return cumulative_regret_loss(ys), np.ones_like(ys)
    if name == "final_value":
        g = np.zeros_like(ys)
        g[-1] = 1.0
        return final_value_loss(ys), g
    raise ValueError(f"unknown meta-loss {name!r}")


META_LOSSES = ("observed_improvement", "cumulative_regret", "final_value")
