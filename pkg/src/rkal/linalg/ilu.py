"""ILU(0) preconditioning and the inexact diagonal-block solver built on it."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from ..errors import DiagonalBreakdown


class ILU0:
    """Incomplete LU with zero fill on the sparsity pattern of ``A``.

    A zero or missing pivot triggers one retry with the diagonal shifted by
    ``shift_factor * ||A||_inf``; a second failure raises ``DiagonalBreakdown``.
    """

    def __init__(self, A, shift_factor=1e-8, kernels=None):
        self._k = kernels or _kernels
        A = sp.csr_matrix(A, dtype=float)
        A.sum_duplicates()
        A.sort_indices()
        self.shape = A.shape
        self.shift = 0.0
        lu, diag, bad = self._factor(A)
        if bad >= 0:
            self.shift = shift_factor * abs(A).sum(axis=1).max()
            A = (A + self.shift * sp.eye(A.shape[0], format="csr")).tocsr()
            A.sort_indices()
            lu, diag, bad = self._factor(A)
            if bad >= 0:
                raise DiagonalBreakdown(f"zero pivot in row {bad} after diagonal shift")
        self.lu, self.diag = lu, diag

    def _factor(self, A):
        self.indptr = np.ascontiguousarray(A.indptr, dtype=np.intp)
        self.indices = np.ascontiguousarray(A.indices, dtype=np.intp)
        return self._k.ilu0_factor(self.indptr, self.indices, np.ascontiguousarray(A.data))

    def solve(self, b):
        return self._k.ilu0_solve(
            self.indptr, self.indices, self.lu, self.diag, np.ascontiguousarray(b, dtype=float)
        )

    __call__ = solve


def ilu0(A, **kw) -> ILU0:
    return ILU0(A, **kw)


class ILUGmresSolve:
    """Approximate ``A^{-1}``: a fixed number of ILU(0)-preconditioned GMRES steps from zero.

    Parameters
    ----------
    A : sparse matrix
    iterations : int
        GMRES steps per application.
    pivot_floor : float
        For a positive diagonal, the factors are accepted only if every pivot
        satisfies ``U_ii >= pivot_floor * A_ii``.  Otherwise ``A + alpha diag(A)``
        is factored instead, with ``alpha = 0.1, 0.2, 0.4, ...``.  Small or
        negative pivots make the triangular solves blow up on grad-div
        dominated blocks, where plain ILU(0) is useless as a preconditioner.
        ``0`` disables the check.
    """

    def __init__(self, A, iterations=10, pivot_floor=0.5, max_shift=100.0):
        from ..krylov import KrylovConfig

        self.A = sp.csr_matrix(A)
        self.M = ILU0(self.A)
        self.alpha = 0.0
        d = self.A.diagonal()
        if pivot_floor > 0 and np.all(d > 0):
            while np.any(self.M.lu[self.M.diag] < pivot_floor * d):
                self.alpha = 0.1 if self.alpha == 0 else 2 * self.alpha
                if self.alpha > max_shift:
                    raise DiagonalBreakdown(f"ILU(0) pivots stay below {pivot_floor} diag(A) up to shift {max_shift}")
                self.M = ILU0(self.A + self.alpha * sp.diags(d, format="csr"))
        self.cfg = KrylovConfig(rel_tol=1e-14, abs_tol=1e-300, max_iters=iterations)

    def solve(self, b):
        from ..krylov import fgmres

        return fgmres(self.A.dot, self.M.solve, b, cfg=self.cfg).x

    __call__ = solve
