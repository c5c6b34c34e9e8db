"""Moving between functions and coefficient vectors."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_load, assemble_mass_p, assemble_mass_u, assemble_pressure_load
from .mesh import FESpaces
from .reference import q1_basis, q2_basis


def interpolate_velocity(spaces: FESpaces, f, t: float = 0.0):
    """Nodal Q2 interpolant of ``f(x, y, t) -> (fx, fy)``."""
    fx, fy = f(spaces.vnode_x, spaces.vnode_y, t)
    shape = spaces.vnode_x.shape
    return np.concatenate([np.broadcast_to(fx, shape), np.broadcast_to(fy, shape)]).astype(float)


def interpolate_pressure(spaces: FESpaces, g):
    return np.broadcast_to(g(spaces.pnode_x, spaces.pnode_y), spaces.pnode_x.shape).astype(float)


def project_velocity(spaces: FESpaces, f, t: float = 0.0, *, boundary=None, solenoidal=False, ops=None):
    """L2 projection of a velocity field onto vector Q2.

    ``boundary`` (a callable like ``f``) fixes the boundary dofs to nodal values
    and projects the interior only.  ``solenoidal=True`` projects onto the
    discretely divergence-free subspace ``{v : B v = 0}`` instead.
    """
    M = ops.M_u if ops is not None else assemble_mass_u(spaces)
    rhs = assemble_load(spaces, f, t)
    if boundary is None and not solenoidal:
        return spla.spsolve(M.tocsc(), rhs)

    if boundary is None:
        bdofs = np.empty(0, dtype=np.int64)
        free = np.arange(spaces.n_u)
    else:
        bdofs = spaces.boundary_dofs
        free = spaces.free_dofs
    u = np.zeros(spaces.n_u)
    if len(bdofs):
        u[bdofs] = interpolate_velocity(spaces, boundary, t)[bdofs]
    rhs_f = rhs[free] - M[free][:, bdofs] @ u[bdofs]
    Mff = M[free][:, free]
    if not solenoidal:
        u[free] = spla.spsolve(Mff.tocsc(), rhs_f)
        return u

    from .assembly import assemble_divergence

    B = ops.B if ops is not None else assemble_divergence(spaces)
    Bf = B[:, free]
    g = -(B[:, bdofs] @ u[bdofs])
    # the constant pressure mode is a null vector of Bf^T; drop one constraint
    Bf, g = Bf[1:], g[1:]
    K = sp.bmat([[Mff, Bf.T], [Bf, None]], format="csc")
    sol = spla.spsolve(K, np.concatenate([rhs_f, g]))
    u[free] = sol[: len(free)]
    return u


def project_pressure(spaces: FESpaces, g, ops=None):
    M = ops.M_p if ops is not None else assemble_mass_p(spaces)
    return spla.spsolve(M.tocsc(), assemble_pressure_load(spaces, g))


def _locate(spaces, x, y):
    m = spaces.mesh
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ci = np.clip(np.floor((x - m.ax) / m.hx).astype(int), 0, m.nx - 1)
    cj = np.clip(np.floor((y - m.ay) / m.hy).astype(int), 0, m.ny - 1)
    cell = cj * m.nx + ci
    xi = 2.0 * (x - (m.ax + ci * m.hx)) / m.hx - 1.0
    eta = 2.0 * (y - (m.ay + cj * m.hy)) / m.hy - 1.0
    return cell, xi, eta


def evaluate_velocity(spaces: FESpaces, coeffs, x, y):
    """Point values ``(ux, uy)`` of a Q2 velocity field."""
    cell, xi, eta = _locate(spaces, x, y)
    phi = q2_basis(xi, eta)["v"]
    nodes = spaces.cell_vnodes[cell]
    nv = spaces.n_vnodes
    coeffs = np.asarray(coeffs)
    return (
        np.sum(phi * coeffs[nodes], axis=-1),
        np.sum(phi * coeffs[nodes + nv], axis=-1),
    )


def evaluate_pressure(spaces: FESpaces, coeffs, x, y):
    cell, xi, eta = _locate(spaces, x, y)
    psi = q1_basis(xi, eta)["v"]
    return np.sum(psi * np.asarray(coeffs)[spaces.cell_pnodes[cell]], axis=-1)


def mean_free(spaces_or_Mp, p):
    """Shift ``p`` to zero mean in the L2 sense."""
    Mp = spaces_or_Mp if sp.issparse(spaces_or_Mp) else assemble_mass_p(spaces_or_Mp)
    one = np.ones(Mp.shape[0])
    return p - (one @ (Mp @ p)) / (one @ (Mp @ one))
