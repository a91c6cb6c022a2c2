"""Squashed QNN cost ``f(theta) = <H>_theta / ||H||_*`` and its exact gradient."""

from __future__ import annotations

import numpy as np

from . import sim
from .problems import ProblemInstance, build_ansatz, build_cost_hamiltonian, initial_state


class _CompiledLayer:
    """A layer with its generator lowered to the cheapest available action."""

    def __init__(self, layer, n: int):
        self.param = layer.param
        self.kind = layer.kind
        if layer.kind == "mixer":
            self.mode = "mixer"
        elif layer.generator.is_diagonal:
            self.mode = "diag"
            self.values = sim.diagonalize(layer.generator, n)
        else:
            self.mode = "sparse"
            self.matrix = layer.generator.to_sparse(n)
            self.bound = sim.pauli_coefficient_norm(layer.generator)

    def apply(self, state: np.ndarray, angle: float, tol: float) -> np.ndarray:
        if self.mode == "mixer":
            return sim.apply_mixer(state, angle)
        if self.mode == "diag":
            return sim.apply_diagonal_phase(state, self.values, angle)
        return sim.expm_action(self.matrix.dot, state, angle, self.bound, tol)

    def generate(self, state: np.ndarray) -> np.ndarray:
        if self.mode == "mixer":
            return sim.mixer_action(state)
        if self.mode == "diag":
            return self.values * state
        return self.matrix.dot(state)


class QnnCost:
    """Immutable optimizee for one problem instance.

    ``evaluate`` returns the squashed expectation in ``[-1, 1]``;
    ``gradient`` is the exact derivative from one reverse (adjoint) sweep.
    """

    def __init__(self, instance: ProblemInstance, hamiltonian: sim.PauliSum | None = None,
                 tol: float = 1e-12):
        self.instance = instance
        self.hamiltonian = build_cost_hamiltonian(instance) if hamiltonian is None else hamiltonian
        self.ansatz = build_ansatz(instance)
        self.num_qubits = instance.num_qubits
        self.num_params = self.ansatz.num_params
        self.norm = sim.pauli_coefficient_norm(self.hamiltonian)
        self.initial = initial_state(instance)
        self.tol = tol
        n = self.num_qubits
        self._layers = [_CompiledLayer(layer, n) for layer in self.ansatz.layers]
        if self.hamiltonian.is_diagonal:
            self._hdiag = sim.diagonalize(self.hamiltonian, n)
            self._hmat = None
        else:
            self._hdiag = None
            self._hmat = self.hamiltonian.to_sparse(n)

    @property
    def instance_id(self) -> str:
        return self.instance.instance_id

    @property
    def kind(self) -> str:
        return self.instance.kind

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got shape {theta.shape}")
        return theta

    def state(self, theta) -> np.ndarray:
        theta = self._check(theta)
        psi = self.initial
        for layer in self._layers:
            psi = layer.apply(psi, theta[layer.param], self.tol)
        return psi

    def _h_action(self, psi: np.ndarray) -> np.ndarray:
        if self._hdiag is not None:
            return self._hdiag * psi
        return self._hmat.dot(psi)

    def energy(self, theta) -> float:
        """Unsquashed expectation ``<H>_theta``."""
        psi = self.state(theta)
        return float(np.vdot(psi, self._h_action(psi)).real)

    def evaluate(self, theta) -> float:
        if self.norm == 0:
            self._check(theta)
            return 0.0
        return self.energy(theta) / self.norm

    def evaluate_noisy(self, theta, variance: float, rng: np.random.Generator) -> float:
        return sim.noisy_readout(self.evaluate(theta), variance, rng)

    def value_and_gradient(self, theta) -> tuple[float, np.ndarray]:
        theta = self._check(theta)
        grad = np.zeros(self.num_params)
        if self.norm == 0:
            return 0.0, grad
        psi = self.state(theta)
        lam = self._h_action(psi)
        value = float(np.vdot(psi, lam).real) / self.norm
        # reverse sweep: at layer k, psi = psi_k (after layer k), lam = U_{k+1..L}^dag H psi_L
        for layer in reversed(self._layers):
            a = theta[layer.param]
            grad[layer.param] += 2.0 * np.vdot(lam, layer.generate(psi)).imag
            psi = layer.apply(psi, -a, self.tol)
            lam = layer.apply(lam, -a, self.tol)
        return value, grad / self.norm

    def gradient(self, theta) -> np.ndarray:
        return self.value_and_gradient(theta)[1]


def relative_error(fbar: float, fbar_min: float, tol: float = 1e-9) -> float:
    """``fbar - fbar_min`` clamped at zero; values below the floor by more than
    ``tol`` mean the floor is wrong."""
    diff = fbar - fbar_min
    if diff < -tol:
        raise ValueError(f"value {fbar!r} lies below the optimum floor {fbar_min!r}; broken oracle")
    return max(diff, 0.0)
