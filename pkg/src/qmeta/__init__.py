"""Meta-learned parameter initialization for variational quantum algorithms.

A statevector simulator, QAOA/VQE problem classes, an LSTM optimizer trained
by backpropagation through time, and the classical baselines it is compared
against.
"""

from .cost import QnnCost, relative_error
from .lstm import LstmParams, unroll
from .problems import ProblemInstance, build_ansatz, build_cost_hamiltonian, sample_instances
from .sim import PauliSum, PauliTerm

__version__ = "0.1.0"

__all__ = [
    "LstmParams", "PauliSum", "PauliTerm", "ProblemInstance", "QnnCost",
    "build_ansatz", "build_cost_hamiltonian", "relative_error", "sample_instances", "unroll",
]
