"""Kronecker-structured operators on stage-stacked vectors.

A stacked vector ``x = [x_1; ...; x_s]`` is viewed as an ``(s, n)`` array whose
rows are the stage blocks; ``(L kron R) x`` then has block ``i`` equal to
``sum_j L[i, j] R x_j``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionMismatch


class KronOperator:
    """``scalar * (left kron right)`` applied without forming the product.

    ``right`` may be a matrix (dense or sparse) or a callable acting on one block;
    in the latter case ``shape`` gives its ``(rows, cols)``.
    """

    def __init__(self, left, right, scalar=1.0, shape=None):
        self.left = np.atleast_2d(np.asarray(left, dtype=float))
        self.right = right
        self.scalar = float(scalar)
        if callable(right) and not hasattr(right, "shape"):
            if shape is None:
                raise ValueError("shape is required for a callable right factor")
            self.right_shape = tuple(shape)
            self._apply_right = right
        else:
            self.right_shape = tuple(right.shape)
            self._apply_right = right.dot

    @property
    def shape(self):
        s_out, s_in = self.left.shape
        return (s_out * self.right_shape[0], s_in * self.right_shape[1])

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        s_in = self.left.shape[1]
        m = self.right_shape[1]
        if x.shape != (s_in * m,):
            raise DimensionMismatch(f"expected a vector of length {s_in * m}, got {x.shape}")
        blocks = x.reshape(s_in, m)
        Rx = np.stack([self._apply_right(blk) for blk in blocks])
        return (self.scalar * (self.left @ Rx)).ravel()

    __call__ = apply
    dot = apply

    def __matmul__(self, x):
        return self.apply(x)

    def todense(self):
        R = self.right
        if callable(R) and not hasattr(R, "shape"):
            R = np.column_stack([R(e) for e in np.eye(self.right_shape[1])])
        R = R.toarray() if sp.issparse(R) else np.asarray(R)
        return self.scalar * np.kron(self.left, R)


def kron_apply(K: KronOperator, x):
    return K.apply(x)


def stage_blocks(x, s):
    """View a stacked vector as an ``(s, n)`` array of stage blocks."""
    x = np.asarray(x)
    return x.reshape(s, -1)
