"""Statevector primitives for QAOA and Trotter-style circuits.

Amplitudes are stored little-endian: qubit ``q`` is bit ``q`` of the basis
index, so ``|z>`` with ``z = sum_q b_q 2**q``.  Statevectors are plain
``complex128`` numpy arrays of length ``2**n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

MAX_QUBITS = 24

_PAULI_LABELS = ("X", "Y", "Z")


def _check_qubits(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_QUBITS:
        raise ValueError(f"invalid qubit count: {n}")


def num_qubits_of(state: np.ndarray) -> int:
    n = int(state.shape[0]).bit_length() - 1
    if 1 << n != state.shape[0]:
        raise ValueError(f"state length {state.shape[0]} is not a power of two")
    return n


@dataclass(frozen=True)
class PauliTerm:
    """``coefficient * P`` with ``P`` a tensor product of X/Y/Z on some qubits."""

    coefficient: float
    ops: tuple[tuple[int, str], ...] = ()

    @classmethod
    def from_dict(cls, coefficient: float, ops: Mapping[int, str]) -> "PauliTerm":
        return cls(float(coefficient), _canonical_ops(ops))

    @property
    def is_diagonal(self) -> bool:
        return all(p == "Z" for _, p in self.ops)

    @property
    def label(self) -> str:
        return " ".join(f"{p}{q}" for q, p in self.ops) or "I"

    def masks(self) -> tuple[int, int, int]:
        """Return (flip_mask, phase_mask, y_count) for the basis-state action."""
        flip = phase = 0
        ny = 0
        for q, p in self.ops:
            if p in ("X", "Y"):
                flip |= 1 << q
            if p in ("Z", "Y"):
                phase |= 1 << q
            if p == "Y":
                ny += 1
        return flip, phase, ny


def _canonical_ops(ops: Mapping[int, str] | Iterable[tuple[int, str]]) -> tuple[tuple[int, str], ...]:
    items = ops.items() if isinstance(ops, Mapping) else ops
    out = {}
    for q, p in items:
        q = int(q)
        p = p.upper()
        if p == "I":
            continue
        if p not in _PAULI_LABELS:
            raise ValueError(f"unknown Pauli label {p!r}")
        if q < 0:
            raise ValueError(f"negative qubit index {q}")
        if q in out:
            raise ValueError(f"qubit {q} appears twice in one Pauli string")
        out[q] = p
    return tuple(sorted(out.items()))


@dataclass(frozen=True)
class PauliSum:
    """Real-weighted sum of Pauli strings.  Identical strings are merged."""

    terms: tuple[PauliTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        merged: dict[tuple, float] = {}
        for t in self.terms:
            if not math.isfinite(t.coefficient):
                raise ValueError("non-finite Pauli coefficient")
            merged[t.ops] = merged.get(t.ops, 0.0) + float(t.coefficient)
        object.__setattr__(
            self, "terms", tuple(PauliTerm(c, ops) for ops, c in merged.items() if c != 0.0)
        )

    @classmethod
    def from_list(cls, items: Iterable[tuple[float, Mapping[int, str]]]) -> "PauliSum":
        return cls(tuple(PauliTerm.from_dict(c, ops) for c, ops in items))

    def __add__(self, other: "PauliSum") -> "PauliSum":
        return PauliSum(self.terms + other.terms)

    def scale(self, factor: float) -> "PauliSum":
        return PauliSum(tuple(PauliTerm(t.coefficient * factor, t.ops) for t in self.terms))

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def is_diagonal(self) -> bool:
        return all(t.is_diagonal for t in self.terms)

    def max_qubit(self) -> int:
        return max((q for t in self.terms for q, _ in t.ops), default=-1)

    def _check_range(self, n: int) -> None:
        if self.max_qubit() >= n:
            raise ValueError(f"Pauli index {self.max_qubit()} out of range for {n} qubits")

    def to_sparse(self, n: int) -> sparse.csr_matrix:
        """Sparse ``2**n x 2**n`` matrix of the sum."""
        self._check_range(n)
        dim = 1 << n
        idx = np.arange(dim, dtype=np.int64)
        by_flip: dict[int, np.ndarray] = {}
        for t in self.terms:
            flip, phase, ny = t.masks()
            # P|z> = i^ny (-1)^{popcount(z & phase)} |z ^ flip>
            vals = t.coefficient * (1j ** ny) * _parity_sign(idx & phase)
            by_flip[flip] = by_flip.get(flip, 0) + vals
        if not by_flip:
            return sparse.csr_matrix((dim, dim), dtype=complex)
        rows, cols, data = [], [], []
        for flip, vals in by_flip.items():
            rows.append(idx ^ flip)
            cols.append(idx)
            data.append(np.broadcast_to(vals, (dim,)))
        mat = sparse.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim),
            dtype=complex,
        )
        mat.eliminate_zeros()
        return mat


def _parity_sign(x: np.ndarray) -> np.ndarray:
    """(-1)**popcount(x) elementwise, for int64 arrays."""
    x = x.copy()
    parity = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        parity ^= x & 1
        x >>= 1
    return 1.0 - 2.0 * parity


def plus_state(n: int) -> np.ndarray:
    _check_qubits(n)
    dim = 1 << n
    return np.full(dim, dim ** -0.5, dtype=complex)


def basis_state(n: int, index: int = 0) -> np.ndarray:
    _check_qubits(n)
    s = np.zeros(1 << n, dtype=complex)
    s[index] = 1.0
    return s


def diagonalize(h: PauliSum, n: int) -> np.ndarray:
    """Eigenvalue of a Z/I-only sum on every computational basis state."""
    _check_qubits(n)
    if not h.is_diagonal:
        raise ValueError("diagonalize requires a Z/I-only PauliSum; found a non-diagonal term")
    h._check_range(n)
    idx = np.arange(1 << n, dtype=np.int64)
    values = np.zeros(1 << n)
    for t in h.terms:
        _, phase, _ = t.masks()
        values += t.coefficient * _parity_sign(idx & phase)
    return values


def apply_diagonal_phase(state: np.ndarray, values: np.ndarray, angle: float) -> np.ndarray:
    """``exp(-i angle D) |state>`` for a diagonal operator ``D``."""
    if state.shape != values.shape:
        raise ValueError(f"length mismatch: state {state.shape} vs diagonal {values.shape}")
    return state * np.exp(-1j * angle * values)


def apply_mixer(state: np.ndarray, angle: float) -> np.ndarray:
    """``exp(-i angle sum_q X_q) |state>``, one Rx(2*angle) per qubit."""
    n = num_qubits_of(state)
    c, s = math.cos(angle), math.sin(angle)
    out = np.array(state, dtype=complex, copy=True)
    for q in range(n):
        v = out.reshape(-1, 2, 1 << q)
        a0 = v[:, 0, :].copy()
        a1 = v[:, 1, :]
        v[:, 0, :] = c * a0 - 1j * s * a1
        v[:, 1, :] = c * a1 - 1j * s * a0
    return out


def mixer_action(state: np.ndarray) -> np.ndarray:
    """``(sum_q X_q) |state>``."""
    n = num_qubits_of(state)
    out = np.zeros_like(state)
    for q in range(n):
        v = state.reshape(-1, 2, 1 << q)
        o = out.reshape(-1, 2, 1 << q)
        o[:, 0, :] += v[:, 1, :]
        o[:, 1, :] += v[:, 0, :]
    return out


def _as_operator(h, n: int):
    if isinstance(h, PauliSum):
        return h.to_sparse(n), pauli_coefficient_norm(h)
    mat = sparse.csr_matrix(h)
    return mat, float(abs(mat).sum(axis=0).max()) if mat.nnz else 0.0


def expm_action(matvec, state: np.ndarray, angle: float, norm_bound: float,
                tol: float = 1e-10, max_terms: int = 60) -> np.ndarray:
    """``exp(-i angle H) |state>`` by truncated Taylor series.

    The evolution is split into ``s`` substeps with ``|angle| * norm_bound / s <= 1``
    so that each substep's series converges fast; each substep is summed until
    the next term's norm drops below ``tol / s``.
    """
    if angle == 0.0 or norm_bound == 0.0:
        return np.array(state, dtype=complex, copy=True)
    steps = max(1, math.ceil(abs(angle) * norm_bound))
    tau = -1j * angle / steps
    target = tol / steps
    out = np.array(state, dtype=complex, copy=True)
    for _ in range(steps):
        term = out
        acc = out.copy()
        for k in range(1, max_terms + 1):
            term = matvec(term) * (tau / k)
            acc += term
            if np.linalg.norm(term) < target:
                break
        else:
            raise RuntimeError(
                f"Taylor series did not converge within {max_terms} terms; tol={tol} too tight"
            )
        out = acc
    return out


def apply_hermitian_exponential(state: np.ndarray, h, angle: float, tol: float = 1e-10) -> np.ndarray:
    """``exp(-i angle H) |state>`` for a Hermitian PauliSum (or sparse matrix) ``H``."""
    n = num_qubits_of(state)
    mat, bound = _as_operator(h, n)
    return expm_action(mat.dot, state, angle, bound, tol)


def expectation(state: np.ndarray, h) -> float:
    """``<state| H |state>``; the imaginary residue is discarded."""
    n = num_qubits_of(state)
    if isinstance(h, PauliSum):
        h._check_range(n)
        if h.is_diagonal:
            return float(np.dot(np.abs(state) ** 2, diagonalize(h, n)))
        h = h.to_sparse(n)
    val = np.vdot(state, h.dot(state))
    if abs(val.imag) > 1e-9:
        raise ValueError(f"expectation has imaginary part {val.imag:.3g}; operator not Hermitian?")
    return float(val.real)


def pauli_coefficient_norm(h: PauliSum) -> float:
    return float(sum(abs(t.coefficient) for t in h.terms))


def noisy_readout(value: float, variance: float, rng: np.random.Generator) -> float:
    """Draw from ``Normal(value, variance)``; exact passthrough at zero variance."""
    if variance < 0:
        raise ValueError(f"negative variance {variance}")
    if variance == 0:
        return value
    return float(rng.normal(value, math.sqrt(variance)))


def repetition_estimate(norm: float, epsilon: float) -> int:
    """Repetitions bounding the estimator error by ``epsilon``: ceil(norm**2 / epsilon**2)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    q = (norm * norm) / (epsilon * epsilon)
    # guard against 400.00000000000006-style rounding
    return int(math.ceil(q - 1e-12 * max(1.0, q)))
