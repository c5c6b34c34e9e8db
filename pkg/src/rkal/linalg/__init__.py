"""Sparse kernels and the approximate inverses used inside the preconditioner."""

from .chebyshev import ChebyshevMass, chebyshev_apply, jacobi_spectrum_bounds
from .direct import LUFactors, lu_factor, lu_solve
from .ilu import ILU0, ILUGmresSolve, ilu0
from .io import read_matrix_market, write_matrix_market
from .kron import KronOperator, kron_apply, stage_blocks
from .multigrid import PressurePoisson, pressure_poisson_apply, q1_prolongation

__all__ = [
    "ChebyshevMass",
    "ILU0",
    "ILUGmresSolve",
    "KronOperator",
    "LUFactors",
    "PressurePoisson",
    "chebyshev_apply",
    "ilu0",
    "jacobi_spectrum_bounds",
    "kron_apply",
    "lu_factor",
    "lu_solve",
    "pressure_poisson_apply",
    "q1_prolongation",
    "read_matrix_market",
    "stage_blocks",
    "write_matrix_market",
]
