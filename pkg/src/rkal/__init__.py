"""Implicit Runge-Kutta time stepping for incompressible Navier-Stokes with an
augmented Lagrangian preconditioned Newton-Krylov stage solver."""

from .al_precond import (
    ALPreconditioner,
    AugmentationParams,
    AugmentedSystem,
    BlockGaussSeidel,
    DiagSolve,
    GSConfig,
    SchurApprox,
    WMode,
    apply_gauss_seidel_11,
    apply_preconditioner,
    apply_schur_inverse,
    build_augmented,
    verify_smw_identity,
)
from .errors import RKALError
from .krylov import KrylovConfig, KrylovResult, fgmres
from .problems import ProblemSpec, cavity, manufactured, steps_for_level
from .stage_system import (
    Discretization,
    LinearSolverConfig,
    NewtonConfig,
    StageVector,
    TimeState,
    assemble_newton_system,
    consistent_pressure,
    newton_solve,
    rk_update,
    time_loop,
)
from .tableau import ButcherTableau, Family, check_order_conditions, make_tableau

__version__ = "0.1.0"

__all__ = [
    "ALPreconditioner",
    "AugmentationParams",
    "AugmentedSystem",
    "BlockGaussSeidel",
    "ButcherTableau",
    "DiagSolve",
    "Discretization",
    "Family",
    "GSConfig",
    "KrylovConfig",
    "KrylovResult",
    "LinearSolverConfig",
    "NewtonConfig",
    "ProblemSpec",
    "RKALError",
    "SchurApprox",
    "StageVector",
    "TimeState",
    "WMode",
    "apply_gauss_seidel_11",
    "apply_preconditioner",
    "apply_schur_inverse",
    "assemble_newton_system",
    "build_augmented",
    "cavity",
    "check_order_conditions",
    "consistent_pressure",
    "fgmres",
    "make_tableau",
    "manufactured",
    "newton_solve",
    "rk_update",
    "steps_for_level",
    "time_loop",
    "verify_smw_identity",
]
