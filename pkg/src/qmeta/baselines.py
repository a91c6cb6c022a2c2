"""Comparison optimizers and initialization heuristics.

All optimizers treat the cost as a black box and log every query in an
:class:`OptimizerTrace`, which also enforces the query budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg, optimize, stats

QAOA_BOX = (-math.pi, math.pi)
VQE_BOX = (-1.0, 1.0)


class BudgetExhausted(Exception):
    pass


@dataclass
class OptimizerTrace:
    """Ordered record of black-box queries.

    ``truth`` optionally maps each queried point to its noiseless value so
    that benchmark curves can be scored independently of readout noise.
    """

    method: str = ""
    budget: int = 0
    seed: int | None = None
    thetas: list[np.ndarray] = field(default_factory=list)
    ys: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.ys)

    @property
    def remaining(self) -> int:
        return self.budget - len(self.ys)

    def query(self, f: Callable, theta, truth: Callable | None = None) -> float:
        if len(self.ys) >= self.budget:
            raise BudgetExhausted
        theta = np.array(theta, dtype=float)
        y = float(f(theta))
        self.thetas.append(theta)
        self.ys.append(y)
        if truth is not None:
            self.values.append(float(truth(theta)))
        return y

    def best(self) -> tuple[np.ndarray, float]:
        k = int(np.argmin(self.ys))
        return self.thetas[k], self.ys[k]

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(np.asarray(self.ys, dtype=float))


# ------------------------------------------------------------ Nelder-Mead

def nelder_mead(f: Callable, theta0, budget: int, step: float = 0.1, xtol: float = 1e-8,
                bounds: tuple[float, float] | None = None, trace: OptimizerTrace | None = None,
                truth: Callable | None = None) -> OptimizerTrace:
    """Downhill simplex (reflection 1, expansion 2, contraction 1/2, shrink 1/2).

    ``budget`` counts the queries spent by this call, initial simplex included.
    Stops when the budget is spent or the simplex diameter falls below ``xtol``.
    With ``bounds`` every trial point is clipped into the box before querying.
    """
    x0 = np.array(theta0, dtype=float)
    m = x0.size
    if budget < m + 2:
        raise ValueError(f"budget below initial simplex size: {budget} < {m + 2}")
    if trace is None:
        trace = OptimizerTrace("nelder_mead", budget)
    else:
        trace.budget = len(trace) + budget
    clip = (lambda x: np.clip(x, *bounds)) if bounds is not None else (lambda x: x)

    def q(x):
        return trace.query(f, x, truth)

    try:
        pts = [clip(x0)]
        for k in range(m):
            x = x0.copy()
            x[k] += step
            pts.append(clip(x))
        vals = [q(x) for x in pts]
        sim = np.array(pts)
        fs = np.array(vals)
        while True:
            order = np.argsort(fs, kind="stable")
            sim, fs = sim[order], fs[order]
            if np.max(np.linalg.norm(sim[1:] - sim[0], axis=1)) < xtol:
                break
            centroid = sim[:-1].mean(axis=0)
            xr = clip(centroid + (centroid - sim[-1]))
            fr = q(xr)
            if fr < fs[0]:
                xe = clip(centroid + 2.0 * (centroid - sim[-1]))
                fe = q(xe)
                if fe < fr:
                    sim[-1], fs[-1] = xe, fe
                else:
                    sim[-1], fs[-1] = xr, fr
                continue
            if fr < fs[-2]:
                sim[-1], fs[-1] = xr, fr
                continue
            if fr < fs[-1]:
                xc = clip(centroid + 0.5 * (xr - centroid))
                fc = q(xc)
                if fc <= fr:
                    sim[-1], fs[-1] = xc, fc
                    continue
            else:
                xc = clip(centroid + 0.5 * (sim[-1] - centroid))
                fc = q(xc)
                if fc < fs[-1]:
                    sim[-1], fs[-1] = xc, fc
                    continue
            for k in range(1, m + 1):
                sim[k] = clip(sim[0] + 0.5 * (sim[k] - sim[0]))
                fs[k] = q(sim[k])
    except BudgetExhausted:
        pass
    return trace


# ------------------------------------------------- Gaussian-process model

class GpModel:
    """Zero-mean GP with an isotropic squared-exponential kernel."""

    def __init__(self, X, y, lengthscale: float, signal: float, noise: float,
                 jitter: float = 1e-10, max_jitter: float = 1e-4):
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.y = np.asarray(y, dtype=float)
        self.lengthscale, self.signal, self.noise = lengthscale, signal, noise
        K = self.kernel(self.X, self.X)
        n = len(self.y)
        while True:
            try:
                self.chol = linalg.cho_factor(K + (noise + jitter) * np.eye(n), lower=True)
                break
            except linalg.LinAlgError:
                jitter *= 10
                if jitter > max_jitter:
                    raise
        self.jitter = jitter
        self.alpha = linalg.cho_solve(self.chol, self.y)

    def kernel(self, A, B) -> np.ndarray:
        d2 = (np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2 * A @ B.T)
        return self.signal * np.exp(-0.5 * np.maximum(d2, 0) / self.lengthscale ** 2)

    def predict(self, Xs) -> tuple[np.ndarray, np.ndarray]:
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        Ks = self.kernel(Xs, self.X)
        mean = Ks @ self.alpha
        v = linalg.solve_triangular(self.chol[0], Ks.T, lower=True)
        var = np.maximum(self.signal - np.sum(v * v, axis=0), 0.0)
        return mean, var

    def log_marginal_likelihood(self) -> float:
        L = self.chol[0]
        return float(-0.5 * self.y @ self.alpha - np.sum(np.log(np.diag(L)))
                     - 0.5 * len(self.y) * math.log(2 * math.pi))

    @classmethod
    def fit(cls, X, y, lengthscales=None, noise_ratios=None) -> "GpModel":
        """Grid-search the length scale and noise ratio by marginal likelihood;
        the signal variance is profiled out in closed form."""
        lengthscales = np.geomspace(0.1, 5.0, 9) if lengthscales is None else lengthscales
        noise_ratios = (1e-8, 1e-4, 1e-2, 1e-1, 1.0) if noise_ratios is None else noise_ratios
        y = np.asarray(y, dtype=float)
        n = len(y)
        best, best_ll = None, -np.inf
        for ell in lengthscales:
            for r in noise_ratios:
                unit = cls(X, y, ell, 1.0, r)
                s2 = max(float(y @ unit.alpha) / n, 1e-12)
                model = cls(X, y, ell, s2, r * s2)
                ll = model.log_marginal_likelihood()
                if ll > best_ll:
                    best, best_ll = model, ll
        return best


def expected_improvement(mean, var, best: float, xi: float = 0.0) -> np.ndarray:
    """EI for minimization; zero wherever the posterior variance vanishes."""
    mean, var = np.asarray(mean, float), np.asarray(var, float)
    sd = np.sqrt(var)
    imp = best - mean - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, imp / np.where(sd > 0, sd, 1), 0.0)
    ei = imp * stats.norm.cdf(z) + sd * stats.norm.pdf(z)
    return np.where(sd > 0, np.maximum(ei, 0.0), 0.0)


def gp_bayesopt(f: Callable, m: int, budget: int, rng: np.random.Generator,
                bounds: tuple[float, float] = QAOA_BOX, n_candidates: int = 256, n_starts: int = 4,
                trace: OptimizerTrace | None = None, truth: Callable | None = None) -> OptimizerTrace:
    """Bayesian optimization from ``theta = 0`` with expected improvement."""
    if budget < 2:
        raise ValueError("gp_bayesopt needs a budget of at least 2")
    if trace is None:
        trace = OptimizerTrace("gpr", budget)
    else:
        trace.budget = len(trace) + budget
    lo, hi = bounds
    start = len(trace)
    try:
        trace.query(f, np.zeros(m), truth)
        while True:
            X = np.array(trace.thetas[start:])
            y = np.array(trace.ys[start:])
            mu, sd = y.mean(), y.std()
            sd = sd if sd > 0 else 1.0
            gp = GpModel.fit(X, (y - mu) / sd)
            best = float(np.min((y - mu) / sd))

            def neg_ei(x):
                mean, var = gp.predict(x[None, :])
                return -float(expected_improvement(mean, var, best)[0])

            cand = rng.uniform(lo, hi, (n_candidates, m))
            mean, var = gp.predict(cand)
            ei = expected_improvement(mean, var, best)
            starts = cand[np.argsort(-ei, kind="stable")[:n_starts]]
            x_best, v_best = starts[0], -ei.max()
            for s in starts:
                res = optimize.minimize(neg_ei, s, method="L-BFGS-B", bounds=[(lo, hi)] * m,
                                        options={"maxiter": 50})
                if res.fun < v_best:
                    x_best, v_best = res.x, res.fun
            trace.query(f, np.clip(x_best, lo, hi), truth)
    except BudgetExhausted:
        pass
    return trace


# -------------------------------------------------------------- seeding

def random_seed(f: Callable, m: int, k: int, rng: np.random.Generator,
                box: tuple[float, float] = QAOA_BOX, trace: OptimizerTrace | None = None,
                truth: Callable | None = None) -> np.ndarray:
    """Best of ``k`` uniform draws in ``box**m``; all ``k`` queries are logged."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if trace is None:
        trace = OptimizerTrace("random_seed", k)
    elif trace.remaining < k:
        trace.budget = len(trace) + k
    draws = rng.uniform(box[0], box[1], (k, m))
    ys = [trace.query(f, x, truth) for x in draws]
    return draws[int(np.argmin(ys))].copy()


def heuristic_seed(kind: str, p_steps: int | None = None, training_optima=None,
                   ramp: float = 1.0) -> np.ndarray:
    """Problem-specific starting point.

    QAOA classes: coordinatewise mean of the training-set optima.
    Hubbard VQE: linear kinetic-to-interaction ramp over the ``P`` steps,
    per-step layout ``(hop_h, hop_v, interaction)``.
    """
    if kind == "hubbard":
        if p_steps is None or p_steps < 1:
            raise ValueError("the ramp heuristic needs p_steps >= 1")
        s = np.arange(1, p_steps + 1) / (p_steps + 1)
        return np.column_stack([ramp * (1 - s), ramp * (1 - s), ramp * s]).ravel()
    if training_optima is None or len(training_optima) == 0:
        raise ValueError("empty optima table")
    return np.mean(np.asarray(training_optima, dtype=float), axis=0)


def seeding_box(kind: str) -> tuple[float, float]:
    return VQE_BOX if kind == "hubbard" else QAOA_BOX
