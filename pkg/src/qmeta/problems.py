"""Instance samplers, cost Hamiltonians, ansatz layouts and initial states.

Three problem classes are supported:

* ``maxcut`` -- QAOA on Erdos-Renyi graphs, cost ``sum_edges (I - Z_j Z_k) / 2``.
* ``sk`` -- QAOA on fully connected Sherrington-Kirkpatrick spin glasses.
* ``hubbard`` -- Trotter-style VQE on an open-boundary 2D Fermi-Hubbard lattice.

Hubbard sites are numbered in snake order (row ``y`` runs left to right when
``y`` is even, right to left when odd).  Spin-up orbital of site ``s`` lives on
qubit ``s``; spin-down on qubit ``nsites + s``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .sim import PauliSum, PauliTerm, plus_state

SCHEMA_VERSION = 1

DEFAULT_P_STEPS = {"maxcut": 2, "sk": 3, "hubbard": 5}


@dataclass(frozen=True)
class GraphInstance:
    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        norm = set()
        for j, k in self.edges:
            if j == k:
                raise ValueError(f"self-loop on vertex {j}")
            if not (0 <= j < self.n and 0 <= k < self.n):
                raise ValueError(f"edge ({j}, {k}) out of range for n={self.n}")
            e = (min(j, k), max(j, k))
            if e in norm:
                raise ValueError(f"duplicate edge {e}")
            norm.add(e)
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    @property
    def num_qubits(self) -> int:
        return self.n


@dataclass(frozen=True, eq=False)
class SkInstance:
    n: int
    J: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if J.shape != (self.n, self.n) or h.shape != (self.n,):
            raise ValueError("coupling/bias shapes do not match n")
        if not np.allclose(J, J.T, atol=0) or np.any(np.diag(J) != 0):
            raise ValueError("J must be symmetric with zero diagonal")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h", h)

    @property
    def num_qubits(self) -> int:
        return self.n


@dataclass(frozen=True)
class HubbardInstance:
    nx: int
    ny: int
    t: float = 1.0
    U: float = 1.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("lattice dimensions must be positive")
        if self.t <= 0 or self.U < 0:
            raise ValueError("need t > 0 and U >= 0")

    @property
    def nsites(self) -> int:
        return self.nx * self.ny

    @property
    def num_qubits(self) -> int:
        return 2 * self.nsites

    def site(self, x: int, y: int) -> int:
        return y * self.nx + (x if y % 2 == 0 else self.nx - 1 - x)

    def bonds(self) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
        horizontal = [(self.site(x, y), self.site(x + 1, y))
                      for y in range(self.ny) for x in range(self.nx - 1)]
        vertical = [(self.site(x, y), self.site(x, y + 1))
                    for y in range(self.ny - 1) for x in range(self.nx)]
        return horizontal, vertical


Payload = Union[GraphInstance, SkInstance, HubbardInstance]

_KIND = {GraphInstance: "maxcut", SkInstance: "sk", HubbardInstance: "hubbard"}


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    payload: Payload
    p_steps: int
    instance_id: str = ""
    rng_seed: int | None = None

    @property
    def kind(self) -> str:
        return _KIND[type(self.payload)]

    @property
    def num_qubits(self) -> int:
        return self.payload.num_qubits

    @property
    def num_params(self) -> int:
        return (3 if self.kind == "hubbard" else 2) * self.p_steps

    def to_dict(self) -> dict:
        d = {"schema_version": SCHEMA_VERSION, "kind": self.kind,
             "instance_id": self.instance_id, "p_steps": self.p_steps,
             "rng_seed": self.rng_seed}
        p = self.payload
        if isinstance(p, GraphInstance):
            d.update(n=p.n, edges=[list(e) for e in p.edges])
        elif isinstance(p, SkInstance):
            d.update(n=p.n, J=p.J.tolist(), h=p.h.tolist())
        else:
            d.update(nx=p.nx, ny=p.ny, t=p.t, U=p.U)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported instance schema_version {d.get('schema_version')!r}")
        kind = d["kind"]
        if kind == "maxcut":
            payload = GraphInstance(int(d["n"]), tuple(tuple(e) for e in d["edges"]))
        elif kind == "sk":
            payload = SkInstance(int(d["n"]), np.array(d["J"], dtype=float), np.array(d["h"], dtype=float))
        elif kind == "hubbard":
            payload = HubbardInstance(int(d["nx"]), int(d["ny"]), float(d["t"]), float(d["U"]))
        else:
            raise ValueError(f"unknown problem kind {kind!r}")
        return cls(payload, int(d["p_steps"]), d.get("instance_id", ""), d.get("rng_seed"))


def save_instance(inst: ProblemInstance, path: str | Path) -> None:
    # json writes floats via repr, which round-trips exactly
    Path(path).write_text(json.dumps(inst.to_dict(), indent=1, sort_keys=True) + "\n")


def load_instance(path: str | Path) -> ProblemInstance:
    return ProblemInstance.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------- samplers

def _draw_n(n_range, rng: np.random.Generator) -> int:
    if isinstance(n_range, (int, np.integer)):
        lo = hi = int(n_range)
    else:
        lo, hi = (int(v) for v in n_range)
    if lo > hi or lo < 1:
        raise ValueError(f"invalid size range {n_range!r}")
    return int(rng.integers(lo, hi + 1))


def sample_maxcut(n_range, seed: int, p_steps: int = 2, instance_id: str = "") -> ProblemInstance:
    """Random G(n, p) graph with ``p = k / n`` and ``k`` uniform in ``[3, n - 1]``."""
    lo = n_range if isinstance(n_range, (int, np.integer)) else n_range[0]
    if lo < 3:
        raise ValueError(f"invalid size range {n_range!r}")
    if lo < 4:
        raise ValueError("degenerate k range: k in [3, n-1] is empty for n < 4")
    rng = np.random.default_rng(seed)
    n = _draw_n(n_range, rng)
    k = int(rng.integers(3, n))
    p = k / n
    pairs = list(itertools.combinations(range(n), 2))
    while True:
        keep = rng.random(len(pairs)) < p
        edges = tuple(e for e, on in zip(pairs, keep) if on)
        if edges:
            break
    return ProblemInstance(GraphInstance(n, edges), p_steps, instance_id, seed)


def sample_sk(n_range, seed: int, p_steps: int = 3, instance_id: str = "") -> ProblemInstance:
    """Complete-graph SK model with standard normal couplings and biases."""
    rng = np.random.default_rng(seed)
    n = _draw_n(n_range, rng)
    upper = rng.standard_normal((n, n))
    J = np.triu(upper, 1)
    J = J + J.T
    h = rng.standard_normal(n)
    return ProblemInstance(SkInstance(n, J, h), p_steps, instance_id, seed)


def sample_hubbard(seed: int, split: str = "train", p_steps: int = 5, instance_id: str = "",
                   lattices=None, u_range=(0.1, 4.0)) -> ProblemInstance:
    """Hubbard lattice with ``t = 1`` and ``U ~ Uniform(u_range)``.

    ``split="train"`` picks 2x2 or 3x2 with equal probability, ``"test"`` uses 4x2.
    ``lattices`` overrides the candidate list.
    """
    rng = np.random.default_rng(seed)
    if lattices is None:
        lattices = [(2, 2), (3, 2)] if split == "train" else [(4, 2)]
    nx, ny = lattices[int(rng.integers(len(lattices)))]
    U = float(rng.uniform(*u_range))
    return ProblemInstance(HubbardInstance(nx, ny, 1.0, U), p_steps, instance_id, seed)


# ----------------------------------------------------------- Hamiltonians

def maxcut_hamiltonian(g: GraphInstance) -> PauliSum:
    terms = []
    for j, k in g.edges:
        terms.append(PauliTerm(0.5))
        terms.append(PauliTerm(-0.5, ((j, "Z"), (k, "Z"))))
    return PauliSum(tuple(terms))


def sk_hamiltonian(sk: SkInstance) -> PauliSum:
    scale = 1.0 / math.sqrt(sk.n)
    terms = [PauliTerm(scale * sk.J[j, k], ((j, "Z"), (k, "Z")))
             for j, k in itertools.combinations(range(sk.n), 2)]
    terms += [PauliTerm(float(sk.h[j]), ((j, "Z"),)) for j in range(sk.n)]
    return PauliSum(tuple(terms))


def hopping_terms(p: int, q: int, coeff: float) -> list[PauliTerm]:
    """JW image of ``coeff (a_p^dag a_q + a_q^dag a_p)``."""
    if p > q:
        p, q = q, p
    zs = tuple((r, "Z") for r in range(p + 1, q))
    return [PauliTerm(coeff / 2, ((p, "X"),) + zs + ((q, "X"),)),
            PauliTerm(coeff / 2, ((p, "Y"),) + zs + ((q, "Y"),))]


def hubbard_parts(hb: HubbardInstance) -> tuple[PauliSum, PauliSum, PauliSum]:
    """(T_h, T_v, V) as qubit operators."""
    N = hb.nsites
    horizontal, vertical = hb.bonds()

    def kinetic(bonds):
        terms = []
        for i, j in bonds:
            for off in (0, N):
                terms += hopping_terms(i + off, j + off, -hb.t)
        return PauliSum(tuple(terms))

    v = []
    quarter = hb.U / 4
    for s in range(N):
        up, dn = s, N + s
        v += [PauliTerm(quarter), PauliTerm(-quarter, ((up, "Z"),)),
              PauliTerm(-quarter, ((dn, "Z"),)), PauliTerm(quarter, ((up, "Z"), (dn, "Z")))]
    return kinetic(horizontal), kinetic(vertical), PauliSum(tuple(v))


def build_cost_hamiltonian(inst: ProblemInstance) -> PauliSum:
    p = inst.payload
    if isinstance(p, GraphInstance):
        return maxcut_hamiltonian(p)
    if isinstance(p, SkInstance):
        return sk_hamiltonian(p)
    th, tv, v = hubbard_parts(p)
    return th + tv + v


def number_operator(num_qubits: int, qubits=None) -> PauliSum:
    qubits = range(num_qubits) if qubits is None else qubits
    terms = []
    for q in qubits:
        terms += [PauliTerm(0.5), PauliTerm(-0.5, ((q, "Z"),))]
    return PauliSum(tuple(terms))


# ---------------------------------------------------------------- ansatz

@dataclass(frozen=True)
class Layer:
    """One factor ``exp(-i theta[param] G)``; ``kind`` selects the fast path."""

    kind: str  # "cost" | "mixer" | "hop_h" | "hop_v" | "interaction"
    generator: PauliSum
    param: int


@dataclass(frozen=True)
class AnsatzSpec:
    layers: tuple[Layer, ...]  # application order (first applied first)
    num_params: int
    param_names: tuple[str, ...] = field(default=())


def build_ansatz(inst: ProblemInstance) -> AnsatzSpec:
    P = inst.p_steps
    if P < 1:
        raise ValueError("p_steps must be >= 1")
    if inst.kind == "hubbard":
        th, tv, v = hubbard_parts(inst.payload)
        layers = []
        names = []
        for j in range(P):
            names += [f"hop_h_{j}", f"hop_v_{j}", f"interaction_{j}"]
            # exp(-i th T_h) exp(-i tv T_v) exp(-i tU V): V acts first
            layers += [Layer("interaction", v, 3 * j + 2), Layer("hop_v", tv, 3 * j + 1),
                       Layer("hop_h", th, 3 * j)]
        return AnsatzSpec(tuple(layers), 3 * P, tuple(names))
    cost = build_cost_hamiltonian(inst)
    n = inst.num_qubits
    mixer = PauliSum(tuple(PauliTerm(1.0, ((q, "X"),)) for q in range(n)))
    layers = []
    names = []
    for j in range(P):
        names += [f"cost_{j}", f"mixer_{j}"]
        layers += [Layer("cost", cost, 2 * j), Layer("mixer", mixer, 2 * j + 1)]
    return AnsatzSpec(tuple(layers), 2 * P, tuple(names))


# ---------------------------------------------------------- initial states

def hopping_matrix(hb: HubbardInstance) -> np.ndarray:
    N = hb.nsites
    K = np.zeros((N, N))
    horizontal, vertical = hb.bonds()
    for i, j in horizontal + vertical:
        K[i, j] = K[j, i] = -hb.t
    return K


def _sign_fix(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-10)
    return -v if nz.size and v[nz[0]] < 0 else v


def canonical_orbitals(K: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a real symmetric matrix with a deterministic basis for
    degenerate eigenspaces.

    Each degenerate block is re-spanned by Gram-Schmidt on the projections of
    the unit vectors ``e_0, e_1, ...``, sign-fixed so the first nonzero entry
    is positive, and sorted lexicographically (descending) within the block.
    """
    w, V = np.linalg.eigh(K)
    vals, vecs = [], []
    i = 0
    while i < len(w):
        j = i
        while j + 1 < len(w) and abs(w[j + 1] - w[i]) < tol:
            j += 1
        block = V[:, i:j + 1]
        d = block.shape[1]
        proj = block @ block.T
        basis: list[np.ndarray] = []
        for e in np.eye(K.shape[0]):
            v = proj @ e
            for b in basis:
                v = v - (b @ v) * b
            nv = np.linalg.norm(v)
            if nv > 1e-6:
                basis.append(v / nv)
            if len(basis) == d:
                break
        basis = [_sign_fix(b) for b in basis]
        basis.sort(key=lambda b: tuple(np.round(-b, 10)))
        vals += [float(np.mean(w[i:j + 1]))] * d
        vecs += basis
        i = j + 1
    return np.array(vals), np.column_stack(vecs)


def slater_determinant(orbitals: np.ndarray, n_modes: int, offset: int, dim_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    """Occupation indices and amplitudes of one spin species' Slater determinant.

    ``orbitals`` is ``(n_modes, k)``: the ``k`` occupied single-particle
    orbitals.  The amplitude of occupied mode set ``S`` is ``det(orbitals[S])``.
    """
    k = orbitals.shape[1]
    idx, amp = [], []
    for occ in itertools.combinations(range(n_modes), k):
        a = np.linalg.det(orbitals[list(occ), :]) if k else 1.0
        idx.append(sum(1 << (offset + s) for s in occ))
        amp.append(a)
    return np.array(idx, dtype=np.int64), np.array(amp)


def hubbard_initial_state(hb: HubbardInstance) -> np.ndarray:
    """Half-filled, S_z = 0 product of up/down Slater determinants of the
    lowest kinetic orbitals."""
    N = hb.nsites
    if N % 2:
        raise ValueError("half filling with equal up/down counts needs an even number of sites")
    _, orbs = canonical_orbitals(hopping_matrix(hb))
    occ = orbs[:, : N // 2]
    up_idx, up_amp = slater_determinant(occ, N, 0, 2 * N)
    dn_idx, dn_amp = slater_determinant(occ, N, N, 2 * N)
    state = np.zeros(1 << (2 * N), dtype=complex)
    state[(up_idx[:, None] | dn_idx[None, :]).ravel()] = np.outer(up_amp, dn_amp).ravel()
    return state / np.linalg.norm(state)


def initial_state(inst: ProblemInstance) -> np.ndarray:
    if inst.kind == "hubbard":
        return hubbard_initial_state(inst.payload)
    return plus_state(inst.num_qubits)


# --------------------------------------------------------------- datasets

DEFAULT_SIZES = {
    ("maxcut", "train"): (6, 9), ("maxcut", "test"): (12, 12),
    ("sk", "train"): (6, 8), ("sk", "test"): (9, 11),
}


def instance_seeds(seed: int, count: int) -> list[int]:
    """Independent per-instance integer seeds derived from one root seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def sample_instances(kind: str, count: int, seed: int, split: str = "train",
                     n_range=None, p_steps: int | None = None, lattices=None) -> list[ProblemInstance]:
    """``count`` instances of one class, reproducible from ``seed``."""
    if count < 1:
        raise ValueError("instance count must be positive")
    p_steps = DEFAULT_P_STEPS[kind] if p_steps is None else p_steps
    if kind != "hubbard" and n_range is None:
        n_range = DEFAULT_SIZES[(kind, split)]
    out = []
    for i, s in enumerate(instance_seeds(seed, count)):
        iid = f"{kind}-{split}-{i:05d}"
        if kind == "maxcut":
            out.append(sample_maxcut(n_range, s, p_steps, iid))
        elif kind == "sk":
            out.append(sample_sk(n_range, s, p_steps, iid))
        elif kind == "hubbard":
            out.append(sample_hubbard(s, split, p_steps, iid, lattices=lattices))
        else:
            raise ValueError(f"unknown problem kind {kind!r}")
    return out
