"""qsatlab: random quantum satisfiability (k-QSAT) toolkit.

Random hypergraph ensembles, Haar-random projector instances, exact kernel
dimension and ground-state energy solvers, transfer-matrix product-state
constructions, first-moment counting bounds and Monte Carlo drivers.
"""

__version__ = "0.1.0"

from .errors import DegeneracyError, QsatError, ValidationError
from .hypergraph import Hypergraph, hypercore, sample_hypergraph
from .instance import ProductState, QsatInstance, build_instance
from .kernel import ground_state_energy, kernel_dimension, verify_state

__all__ = [
    "DegeneracyError",
    "Hypergraph",
    "ProductState",
    "QsatError",
    "QsatInstance",
    "ValidationError",
    "__version__",
    "build_instance",
    "ground_state_energy",
    "hypercore",
    "kernel_dimension",
    "sample_hypergraph",
    "verify_state",
]
