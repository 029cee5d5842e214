"""Block Jacobi eigensolvers, pivot-strategy algebra and convergence bounds."""

from __future__ import annotations

__version__ = "0.1.0"

from .annihilators import Annihilator, OperatorProduct, build_operator, operator_norm
from .block_jacobi import BlockJacobiResult, SolverConfig, solve
from .bounds import BoundConstants, eta_elementwise, eta_recursion, gamma_ij, mu_for_sequence
from .jjacobi import JSignature, jjacobi_solve
from .linalg import jacobi_eigensolve, off_norm
from .orderings import PivotSequence, find_witness, generate_class, recognize_class
from .partition import Partition, vec, vec0_inverse

__all__ = [
    "Annihilator",
    "BlockJacobiResult",
    "BoundConstants",
    "JSignature",
    "OperatorProduct",
    "Partition",
    "PivotSequence",
    "SolverConfig",
    "build_operator",
    "eta_elementwise",
    "eta_recursion",
    "find_witness",
    "gamma_ij",
    "generate_class",
    "jacobi_eigensolve",
    "jjacobi_solve",
    "mu_for_sequence",
    "off_norm",
    "operator_norm",
    "recognize_class",
    "solve",
    "vec",
    "vec0_inverse",
]
