"""Sparse direct factorisations (SuperLU behind a small interface)."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import DimensionMismatch, SingularPivot


class LUFactors:
    """``P A Q = L U`` computed by SuperLU with partial pivoting."""

    def __init__(self, A):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"LU needs a square matrix, got {A.shape}")
        self.shape = A.shape
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:  # "Factor is exactly singular"
            raise SingularPivot(str(exc)) from exc
        if not np.all(np.isfinite(self._lu.U.diagonal())) or np.any(self._lu.U.diagonal() == 0):
            raise SingularPivot("zero pivot in U")

    @property
    def perm_r(self):
        return self._lu.perm_r

    @property
    def perm_c(self):
        return self._lu.perm_c

    @property
    def L(self):
        return self._lu.L

    @property
    def U(self):
        return self._lu.U

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))

    __call__ = solve


def lu_factor(A) -> LUFactors:
    return LUFactors(A)


def lu_solve(F: LUFactors, b):
    return F.solve(b)
