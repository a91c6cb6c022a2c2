"""Dense-matrix reference constructions for small systems.

Used as an independent check on the bitmask/statevector routines in
:mod:`qmeta.sim`; everything here builds explicit ``2**n x 2**n`` matrices
with Kronecker products, so keep ``n`` small.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .sim import PauliSum

DENSE_MAX_QUBITS = 10

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _check(n: int) -> None:
    if n > DENSE_MAX_QUBITS:
        raise ValueError(f"dense construction capped at {DENSE_MAX_QUBITS} qubits, got {n}")


def pauli_string_matrix(ops: dict[int, str], n: int) -> np.ndarray:
    _check(n)
    mat = np.eye(1, dtype=complex)
    # little-endian: qubit n-1 is the leftmost Kronecker factor
    for q in reversed(range(n)):
        mat = np.kron(mat, _SINGLE[ops.get(q, "I")])
    return mat


def pauli_sum_matrix(h: PauliSum, n: int) -> np.ndarray:
    _check(n)
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    for t in h.terms:
        out += t.coefficient * pauli_string_matrix(dict(t.ops), n)
    return out


def mixer_matrix(n: int) -> np.ndarray:
    return sum(pauli_string_matrix({q: "X"}, n) for q in range(n))


def qaoa_unitary(cost: np.ndarray, n: int, gammas, betas) -> np.ndarray:
    """``prod_j exp(-i beta_j H_M) exp(-i gamma_j H_C)`` with the first factor applied first."""
    hm = mixer_matrix(n)
    u = np.eye(1 << n, dtype=complex)
    for g, b in zip(gammas, betas):
        u = expm(-1j * b * hm) @ expm(-1j * g * cost) @ u
    return u


def fermion_annihilator(p: int, n: int) -> np.ndarray:
    """Jordan-Wigner ``a_p = Z_0 ... Z_{p-1} (X_p + i Y_p) / 2`` as a dense matrix."""
    _check(n)
    lowering = np.array([[0, 1], [0, 0]], dtype=complex)  # |1> -> |0>
    mat = np.eye(1, dtype=complex)
    for q in reversed(range(n)):
        if q < p:
            f = _SINGLE["Z"]
        elif q == p:
            f = lowering
        else:
            f = _SINGLE["I"]
        mat = np.kron(mat, f)
    return mat
