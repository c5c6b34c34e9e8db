"""Dirichlet constraints by row replacement."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import MissingBoundaryValue


def apply_dirichlet(A, rhs, dofs, values, symmetric=False):
    """Replace the rows ``dofs`` of ``A x = rhs`` by ``x[dofs] = values``.

    With ``symmetric=True`` the matching columns are eliminated as well and the
    known values are moved to the right-hand side, so an SPD matrix stays SPD.
    Returns new ``(A, rhs)``; the inputs are not modified.
    """
    dofs = np.asarray(dofs, dtype=np.int64)
    if values is None:
        raise MissingBoundaryValue("no boundary values supplied")
    values = np.asarray(values, dtype=float)
    if values.shape != dofs.shape or not np.all(np.isfinite(values)):
        raise MissingBoundaryValue(
            f"need one finite value per constrained dof ({len(dofs)}), got shape {values.shape}"
        )
    A = sp.csr_matrix(A)
    n = A.shape[0]
    rhs = np.array(rhs, dtype=float)
    keep = np.ones(n)
    keep[dofs] = 0.0
    K = sp.diags(keep)
    if symmetric:
        x = np.zeros(n)
        x[dofs] = values
        rhs -= A @ x
        A = K @ A @ K
    else:
        A = K @ A
    A = (A + sp.diags(1.0 - keep)).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    rhs[dofs] = values
    return A, rhs
