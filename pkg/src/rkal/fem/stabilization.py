"""Local projection stabilisation on 2x2 macro-cell patches."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import OddCellCount
from .assembly import _geometry, _check_wind, scatter, velocity_at_quadrature
from .mesh import FESpaces
from .reference import REFERENCE


def patch_layout(spaces: FESpaces):
    """Patch index of every cell and the velocity node at each patch centroid."""
    m = spaces.mesh
    if m.nx % 2 or m.ny % 2:
        raise OddCellCount(f"LPS patches need even cell counts, got {m.nx} x {m.ny}")
    ci, cj = np.meshgrid(np.arange(m.nx), np.arange(m.ny), indexing="xy")
    patch = ((cj // 2) * (m.nx // 2) + ci // 2).ravel()
    pi, pj = np.meshgrid(np.arange(m.nx // 2), np.arange(m.ny // 2), indexing="xy")
    centroid = ((4 * pj + 2) * (2 * m.nx + 1) + 4 * pi + 2).ravel()
    return patch, centroid


def lps_parameters(spaces: FESpaces, w, nu: float):
    """Per-patch ``(delta, peclet)`` for wind ``w`` and viscosity ``nu``."""
    w = _check_wind(spaces, w)
    _, centroid = patch_layout(spaces)
    m = spaces.mesh
    h_patch = 2.0 * m.h_p
    nv = spaces.n_vnodes
    speed = np.hypot(w[centroid], w[centroid + nv])
    peclet = speed * h_patch / (2.0 * nu)
    delta = np.zeros_like(speed)
    on = peclet > 1.0
    delta[on] = h_patch / (2.0 * speed[on]) * (1.0 - 1.0 / peclet[on])
    return delta, peclet


def assemble_lps(spaces: FESpaces, w, nu: float, order=None):
    """Stabilisation matrix ``sum_m delta_m (kappa(w.grad phi_i), kappa(w.grad phi_j))_{P_m}``.

    ``kappa = Id - pi`` with ``pi`` the patch mean. Block diagonal in the
    velocity components; zero whenever no patch Peclet number exceeds one.
    """
    patch, _ = patch_layout(spaces)
    delta, _ = lps_parameters(spaces, w, nu)
    n = spaces.n_vnodes
    if not np.any(delta > 0):
        return sp.csr_matrix((2 * n, 2 * n))

    jx, jy, detJ = _geometry(spaces)
    (wx, wy), _ = velocity_at_quadrature(spaces, w)
    q2 = REFERENCE.q2
    wq = REFERENCE.weights * detJ
    adv = wx[:, :, None] * (q2["dx"] * jx)[None] + wy[:, :, None] * (q2["dy"] * jy)[None]
    d_cell = delta[patch]

    full = np.einsum("q,cql,cqj->clj", wq, adv, adv) * d_cell[:, None, None]
    Qs = scatter(spaces.cell_vnodes, spaces.cell_vnodes, full, (n, n), order)

    # patch means of w.grad phi_j
    means = np.einsum("q,cqj->cj", wq, adv)
    n_patch = len(delta)
    if order is not None:
        means, cells, pidx = means[order], spaces.cell_vnodes[order], patch[order]
    else:
        cells, pidx = spaces.cell_vnodes, patch
    rows = np.broadcast_to(pidx[:, None], cells.shape).ravel()
    Cm = sp.coo_matrix((means.ravel(), (rows, cells.ravel())), shape=(n_patch, n)).tocsr()
    Cm.sum_duplicates()
    patch_area = 4.0 * spaces.mesh.hx * spaces.mesh.hy
    Qs = (Qs - Cm.T @ sp.diags(delta / patch_area) @ Cm).tocsr()
    Qs.sum_duplicates()
    Qs.sort_indices()
    return sp.block_diag([Qs, Qs], format="csr")
