"""Vectorised assembly of the Taylor--Hood operators.

Every cell is an axis-aligned rectangle of the same size, so the geometric map
is a constant diagonal Jacobian and element matrices are tensor contractions of
the tabulated reference data with per-cell field values.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionMismatch
from .mesh import FESpaces
from .reference import REFERENCE


def _geometry(spaces: FESpaces):
    m = spaces.mesh
    return 2.0 / m.hx, 2.0 / m.hy, 0.25 * m.hx * m.hy


def scatter(rows, cols, vals, shape, order=None):
    """Sum per-cell element blocks into a canonical CSR matrix.

    ``rows`` (n_cells, nr), ``cols`` (n_cells, nc), ``vals`` (n_cells, nr, nc).
    ``order`` permutes the cell traversal (used to check order independence).
    """
    nc = rows.shape[0]
    vals = np.broadcast_to(vals, (nc, rows.shape[1], cols.shape[1]))
    if order is not None:
        rows, cols, vals = rows[order], cols[order], vals[order]
    R = np.broadcast_to(rows[:, :, None], vals.shape).ravel()
    C = np.broadcast_to(cols[:, None, :], vals.shape).ravel()
    A = sp.coo_matrix((vals.ravel(), (R, C)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def quadrature_points(spaces: FESpaces):
    """Physical coordinates ``(X, Y)`` of the Gauss points, each shaped (n_cells, 9)."""
    m = spaces.mesh
    X = spaces.cell_origin[:, 0:1] + 0.5 * (REFERENCE.xi[None, :] + 1.0) * m.hx
    Y = spaces.cell_origin[:, 1:2] + 0.5 * (REFERENCE.eta[None, :] + 1.0) * m.hy
    return X, Y


def _q2_scalar_operator(spaces, elem, order=None):
    cells = spaces.cell_vnodes
    n = spaces.n_vnodes
    return scatter(cells, cells, elem, (n, n), order)


def _vector(Ks):
    return sp.block_diag([Ks, Ks], format="csr")


def _mass_elem(phi, detJ):
    w = REFERENCE.weights * detJ
    return np.einsum("q,qk,ql->kl", w, phi, phi)


def _stiff_elem(basis, jx, jy, detJ):
    w = REFERENCE.weights * detJ
    gx, gy = basis["dx"] * jx, basis["dy"] * jy
    return np.einsum("q,qk,ql->kl", w, gx, gx) + np.einsum("q,qk,ql->kl", w, gy, gy)


def assemble_mass_scalar_q2(spaces, order=None):
    _, _, detJ = _geometry(spaces)
    return _q2_scalar_operator(spaces, _mass_elem(REFERENCE.q2["v"], detJ), order)


def assemble_mass_u(spaces: FESpaces, order=None):
    return _vector(assemble_mass_scalar_q2(spaces, order))


def assemble_mass_p(spaces: FESpaces, order=None):
    _, _, detJ = _geometry(spaces)
    cells = spaces.cell_pnodes
    n = spaces.n_p
    return scatter(cells, cells, _mass_elem(REFERENCE.q1["v"], detJ), (n, n), order)


def assemble_stiffness_scalar_q2(spaces, order=None):
    jx, jy, detJ = _geometry(spaces)
    return _q2_scalar_operator(spaces, _stiff_elem(REFERENCE.q2, jx, jy, detJ), order)


def assemble_stiffness_u(spaces: FESpaces, order=None):
    """Vector Laplacian Gram matrix ``(grad phi_j, grad phi_l)`` without the viscosity."""
    return _vector(assemble_stiffness_scalar_q2(spaces, order))


def assemble_stiffness_p(spaces: FESpaces, order=None):
    jx, jy, detJ = _geometry(spaces)
    cells = spaces.cell_pnodes
    n = spaces.n_p
    return scatter(cells, cells, _stiff_elem(REFERENCE.q1, jx, jy, detJ), (n, n), order)


def assemble_divergence(spaces: FESpaces, order=None):
    """``B[l, j] = -(div phi_j, psi_l)``, shape ``(n_p, n_u)``."""
    jx, jy, detJ = _geometry(spaces)
    w = REFERENCE.weights * detJ
    psi = REFERENCE.q1["v"]
    bx = -np.einsum("q,ql,qk->lk", w, psi, REFERENCE.q2["dx"] * jx)
    by = -np.einsum("q,ql,qk->lk", w, psi, REFERENCE.q2["dy"] * jy)
    rows = spaces.cell_pnodes
    shape = (spaces.n_p, spaces.n_u)
    Bx = scatter(rows, spaces.cell_vdofs(0), bx, shape, order)
    By = scatter(rows, spaces.cell_vdofs(1), by, shape, order)
    B = (Bx + By).tocsr()
    B.sort_indices()
    return B


def _check_wind(spaces, w):
    w = np.asarray(w, dtype=float)
    if w.shape != (spaces.n_u,):
        raise DimensionMismatch(f"wind has shape {w.shape}, expected ({spaces.n_u},)")
    return w


def velocity_at_quadrature(spaces: FESpaces, w):
    """Velocity components and their gradients at the Gauss points.

    Returns ``(u, grad)`` with ``u[comp]`` of shape (n_cells, 9) and
    ``grad[comp][axis]`` likewise.
    """
    w = _check_wind(spaces, w)
    jx, jy, _ = _geometry(spaces)
    q2 = REFERENCE.q2
    vals, grads = [], []
    for comp in range(2):
        loc = w[spaces.cell_vdofs(comp)]  # (n_cells, 9)
        vals.append(loc @ q2["v"].T)
        grads.append((loc @ q2["dx"].T * jx, loc @ q2["dy"].T * jy))
    return vals, grads


def assemble_convection_scalar(spaces, w, order=None):
    jx, jy, detJ = _geometry(spaces)
    (wx, wy), _ = velocity_at_quadrature(spaces, w)
    q2 = REFERENCE.q2
    wq = REFERENCE.weights * detJ
    # (w . grad phi_j)(q) phi_l(q)
    adv = wx[:, :, None] * (q2["dx"] * jx)[None] + wy[:, :, None] * (q2["dy"] * jy)[None]
    elem = np.einsum("q,ql,cqj->clj", wq, q2["v"], adv)
    return _q2_scalar_operator(spaces, elem, order)


def assemble_convection(spaces: FESpaces, w, order=None):
    """``N_u(w)[l, j] = ((w . grad) phi_j, phi_l)``, block diagonal in the components."""
    return _vector(assemble_convection_scalar(spaces, w, order))


def assemble_convection_jacobian(spaces: FESpaces, w, order=None):
    """``H_u(w)[l, j] = ((phi_j . grad) w, phi_l)``.

    ``N_u(w) + H_u(w)`` is the derivative of ``u -> N_u(u) u`` at ``w``.
    """
    _, _, detJ = _geometry(spaces)
    _, grads = velocity_at_quadrature(spaces, w)
    q2v = REFERENCE.q2["v"]
    wq = REFERENCE.weights * detJ
    shape = (spaces.n_u, spaces.n_u)
    H = sp.csr_matrix(shape)
    for comp_b in range(2):  # test function component
        for axis_a in range(2):  # trial function component
            g = grads[comp_b][axis_a]  # d w_b / d x_a
            elem = np.einsum("q,cq,ql,qj->clj", wq, g, q2v, q2v)
            H = H + scatter(spaces.cell_vdofs(comp_b), spaces.cell_vdofs(axis_a), elem, shape, order)
    H = H.tocsr()
    H.sort_indices()
    return H


def assemble_load(spaces: FESpaces, f, t: float):
    """Load vector ``(f(., t), phi_l)`` for a vector field ``f(x, y, t) -> (fx, fy)``."""
    _, _, detJ = _geometry(spaces)
    X, Y = quadrature_points(spaces)
    fx, fy = f(X, Y, t)
    q2v = REFERENCE.q2["v"]
    wq = REFERENCE.weights * detJ
    out = np.zeros(spaces.n_u)
    for comp, fc in enumerate((fx, fy)):
        fc = np.broadcast_to(np.asarray(fc, dtype=float), X.shape)
        loc = (fc * wq[None, :]) @ q2v
        np.add.at(out, spaces.cell_vdofs(comp), loc)
    return out


def assemble_pressure_load(spaces: FESpaces, g):
    """``(g, psi_l)`` for a scalar function ``g(x, y)``."""
    _, _, detJ = _geometry(spaces)
    X, Y = quadrature_points(spaces)
    vals = np.broadcast_to(np.asarray(g(X, Y), dtype=float), X.shape)
    loc = (vals * (REFERENCE.weights * detJ)[None, :]) @ REFERENCE.q1["v"]
    out = np.zeros(spaces.n_p)
    np.add.at(out, spaces.cell_pnodes, loc)
    return out


class Operators:
    """Wind-independent matrices of one discretisation, assembled once."""

    def __init__(self, spaces: FESpaces):
        self.spaces = spaces
        self.M_u = assemble_mass_u(spaces)
        self.K_u = assemble_stiffness_u(spaces)
        self.M_p = assemble_mass_p(spaces)
        self.K_p = assemble_stiffness_p(spaces)
        self.B = assemble_divergence(spaces)

    def L_u(self, w, nu, Q=None):
        """``nu K_u + N_u(w) + H_u(w)`` (plus a stabilisation matrix when given)."""
        L = nu * self.K_u + assemble_convection(self.spaces, w) + assemble_convection_jacobian(self.spaces, w)
        if Q is not None:
            L = L + Q
        return L.tocsr()


def velocity_laplacian_at_quadrature(spaces: FESpaces, w):
    """``(Lap w_x, Lap w_y)`` of a Q2 field at the Gauss points (cellwise second derivatives)."""
    w = _check_wind(spaces, w)
    jx, jy, _ = _geometry(spaces)
    q2 = REFERENCE.q2
    out = []
    for comp in range(2):
        loc = w[spaces.cell_vdofs(comp)]
        out.append(loc @ q2["dxx"].T * jx**2 + loc @ q2["dyy"].T * jy**2)
    return out


def assemble_pressure_gradient_load(spaces: FESpaces, Fx, Fy):
    """``(F, grad psi_l)`` for a vector field given by its Gauss-point values (n_cells, 9)."""
    jx, jy, detJ = _geometry(spaces)
    q1 = REFERENCE.q1
    wq = REFERENCE.weights * detJ
    loc = (np.asarray(Fx) * wq) @ q1["dx"] * jx + (np.asarray(Fy) * wq) @ q1["dy"] * jy
    out = np.zeros(spaces.n_p)
    np.add.at(out, spaces.cell_pnodes, loc)
    return out
