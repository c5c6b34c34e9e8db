"""Structured-mesh Taylor--Hood Q2-Q1 discretisation."""

from .assembly import (
    Operators,
    assemble_convection,
    assemble_convection_jacobian,
    assemble_divergence,
    assemble_load,
    assemble_mass_p,
    assemble_mass_u,
    assemble_pressure_gradient_load,
    assemble_pressure_load,
    assemble_stiffness_p,
    assemble_stiffness_u,
    quadrature_points,
    velocity_at_quadrature,
    velocity_laplacian_at_quadrature,
)
from .boundary import apply_dirichlet
from .mesh import FESpaces, StructuredMesh, build_mesh, build_spaces
from .stabilization import assemble_lps, lps_parameters, patch_layout
from .transfer import (
    evaluate_pressure,
    evaluate_velocity,
    interpolate_pressure,
    interpolate_velocity,
    mean_free,
    project_pressure,
    project_velocity,
)

__all__ = [
    "FESpaces",
    "Operators",
    "StructuredMesh",
    "apply_dirichlet",
    "assemble_convection",
    "assemble_convection_jacobian",
    "assemble_divergence",
    "assemble_load",
    "assemble_lps",
    "assemble_mass_p",
    "assemble_mass_u",
    "assemble_pressure_gradient_load",
    "assemble_pressure_load",
    "assemble_stiffness_p",
    "assemble_stiffness_u",
    "build_mesh",
    "build_spaces",
    "evaluate_pressure",
    "evaluate_velocity",
    "interpolate_pressure",
    "interpolate_velocity",
    "lps_parameters",
    "mean_free",
    "patch_layout",
    "project_pressure",
    "project_velocity",
    "quadrature_points",
    "velocity_at_quadrature",
    "velocity_laplacian_at_quadrature",
]
