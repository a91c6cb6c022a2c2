"""Reference optima: basin hopping on the ansatz landscape, exact ground
energies of Hubbard lattices, and parameter-space distances."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.sparse.linalg import eigsh

from .baselines import QAOA_BOX, nelder_mead
from .problems import HubbardInstance, ProblemInstance, build_cost_hamiltonian
from .sim import pauli_coefficient_norm

ED_MAX_QUBITS = 16


@dataclass
class OracleResult:
    theta_star: np.ndarray
    fbar_star: float
    method: str
    restarts: int = 0
    instance_id: str = ""


def parameter_periods(inst: ProblemInstance) -> np.ndarray:
    """Per-coordinate period of the squashed cost (``inf`` where aperiodic).

    MaxCut has an integer cost spectrum (period 2 pi in cost angles) and a
    cut function invariant under flipping every bit (period pi/2 in mixer
    angles).  For SK only the mixer is periodic, with period pi.
    """
    m = inst.num_params
    out = np.full(m, np.inf)
    if inst.kind == "maxcut":
        out[0::2] = 2 * math.pi
        out[1::2] = math.pi / 2
    elif inst.kind == "sk":
        out[1::2] = math.pi
    return out


def wrap(x, periods) -> np.ndarray:
    """Reduce coordinates into ``[-p/2, p/2)``; infinite periods are left alone."""
    x = np.asarray(x, dtype=float)
    periods = np.broadcast_to(np.asarray(periods, dtype=float), x.shape)
    finite = np.isfinite(periods)
    out = x.copy()
    p = periods[finite]
    out[finite] = (x[finite] + p / 2) % p - p / 2
    return out


def canonicalize(theta, periods) -> np.ndarray:
    """Pick a fixed representative of ``theta`` under the landscape symmetries.

    The cost Hamiltonians, mixers and initial states here are all real, so
    ``f(-theta) = f(theta)``; combined with the periods this gives a canonical
    form: wrap, then keep whichever of ``+-theta`` is lexicographically larger.
    """
    a = wrap(theta, periods)
    b = wrap(-np.asarray(theta, dtype=float), periods)
    return a if tuple(np.round(a, 9)) >= tuple(np.round(b, 9)) else b


def param_distance(theta, theta_star, periods=None, sign_symmetric: bool = False) -> float:
    """Euclidean distance ``||theta - theta_star||``.

    With ``periods`` each coordinate difference is first reduced modulo its
    period; with ``sign_symmetric`` the nearer of ``+-theta_star`` is used.
    """
    theta = np.asarray(theta, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    if theta.shape != theta_star.shape:
        raise ValueError(f"length mismatch: {theta.shape} vs {theta_star.shape}")
    refs = [theta_star, -theta_star] if sign_symmetric else [theta_star]
    best = np.inf
    for r in refs:
        d = theta - r
        if periods is not None:
            d = wrap(d, periods)
        best = min(best, float(np.linalg.norm(d)))
    return best


def _local_descent(cost, x0, nm_budget: int, polish: bool):
    tr = nelder_mead(cost.evaluate, x0, nm_budget, step=0.1, xtol=1e-8)
    x, fx = tr.best()
    if polish and hasattr(cost, "value_and_gradient"):
        res = optimize.minimize(cost.value_and_gradient, x, jac=True, method="L-BFGS-B",
                                options={"maxiter": 500, "gtol": 1e-10, "ftol": 1e-15})
        if res.fun < fx:
            x, fx = res.x, float(res.fun)
    return np.asarray(x, dtype=float), float(fx)


def basin_hopping(cost, restarts: int, rng: np.random.Generator, box=QAOA_BOX,
                  hop_size: float = 0.75, nm_budget: int = 1000, polish: bool = True,
                  stable_restarts: int | None = 20, stable_tol: float = 1e-6,
                  periods=None, screen: int = 32) -> OracleResult:
    """Global search over the ansatz landscape.

    Restart 0 descends from the best of ``screen`` uniform points in
    ``box**m``.  Each later restart either hops from the incumbent (a uniform
    kick of size ``hop_size``) or, with probability 1/2, starts afresh from a
    new screened point; the local result replaces the
    incumbent only if it is better.  Local descent is Nelder-Mead followed by
    a gradient polish when the cost exposes ``value_and_gradient``.  Stops
    early once the incumbent has been stable for ``stable_restarts`` rounds.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    m = cost.num_params
    lo, hi = box
    best_x, best_f = None, np.inf
    last_gain = 0
    used = 0
    for r in range(restarts):
        fresh = rng.random() < 0.5
        pool = rng.uniform(lo, hi, (max(screen, 1), m))
        kick = rng.uniform(-hop_size, hop_size, m)
        start = min(pool, key=cost.evaluate) if best_x is None or fresh else best_x + kick
        x, fx = _local_descent(cost, start, nm_budget, polish)
        used = r + 1
        if fx < best_f - stable_tol:
            last_gain = r
        if fx < best_f:
            best_x, best_f = x, fx
        if stable_restarts is not None and r - last_gain >= stable_restarts:
            break
    if periods is not None:
        best_x = canonicalize(best_x, periods)
    return OracleResult(best_x, best_f, "basin_hopping", used, getattr(cost, "instance_id", ""))


def sector_indices(nsites: int, n_up: int, n_dn: int) -> np.ndarray:
    """Basis indices with ``n_up`` spin-up and ``n_dn`` spin-down particles."""
    ups = [sum(1 << s for s in occ) for occ in itertools.combinations(range(nsites), n_up)]
    dns = [sum(1 << (nsites + s) for s in occ) for occ in itertools.combinations(range(nsites), n_dn)]
    return np.sort((np.array(ups)[:, None] | np.array(dns)[None, :]).ravel())


def exact_ground_energy(hb: HubbardInstance, n_up: int | None = None, n_dn: int | None = None) -> float:
    """Lowest eigenvalue of the lattice Hamiltonian at half filling, S_z = 0."""
    if hb.num_qubits > ED_MAX_QUBITS:
        raise ValueError(f"exact diagonalization capped at {ED_MAX_QUBITS} qubits, got {hb.num_qubits}")
    N = hb.nsites
    n_up = N // 2 if n_up is None else n_up
    n_dn = N - N // 2 if n_dn is None else n_dn
    H = build_cost_hamiltonian(ProblemInstance(hb, 1)).to_sparse(hb.num_qubits)
    idx = sector_indices(N, n_up, n_dn)
    block = H[idx][:, idx].real
    if block.shape[0] <= 600:
        return float(np.linalg.eigvalsh(block.toarray())[0])
    # a constant start vector can be orthogonal to the ground state's symmetry sector
    v0 = np.random.default_rng(0).standard_normal(block.shape[0])
    val = eigsh(block.tocsc(), k=1, which="SA", tol=1e-12, v0=v0)[0]
    return float(val[0])


def exact_squashed_floor(inst: ProblemInstance) -> OracleResult:
    """Squashed ground energy ``E0 / ||H||_*`` of a Hubbard instance."""
    h = build_cost_hamiltonian(inst)
    e0 = exact_ground_energy(inst.payload)
    return OracleResult(np.full(inst.num_params, np.nan), e0 / pauli_coefficient_norm(h),
                        "exact_diag", 0, inst.instance_id)


# -------------------------------------------------------------- optima CSV

def write_optima_table(path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        m = max(len(r.theta_star) for r in results)
        w.writerow(["instance_id", "method", "fbar_star"] + [f"theta_{k}" for k in range(m)])
        for r in results:
            w.writerow([r.instance_id, r.method, f"{r.fbar_star:.17g}"]
                       + [f"{v:.17g}" for v in r.theta_star])


def read_optima_table(path) -> dict[tuple[str, str], OracleResult]:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            theta = np.array([float(row[k]) for k in row if k.startswith("theta_") and row[k] != ""])
            res = OracleResult(theta, float(row["fbar_star"]), row["method"], 0, row["instance_id"])
            out[(res.instance_id, res.method)] = res
    return out


def load_or_none(path) -> dict | None:
    return read_optima_table(path) if path is not None and Path(path).exists() else None
