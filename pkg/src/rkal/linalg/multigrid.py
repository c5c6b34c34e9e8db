"""Geometric multigrid for the Q1 pressure Laplacian with one pinned node."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .direct import LUFactors


def q1_prolongation_1d(n_coarse_cells):
    """Linear interpolation from ``n+1`` coarse nodes to ``2n+1`` fine nodes."""
    nc = n_coarse_cells + 1
    nf = 2 * n_coarse_cells + 1
    rows, cols, vals = [], [], []
    for i in range(nc):
        rows.append(2 * i)
        cols.append(i)
        vals.append(1.0)
    for i in range(n_coarse_cells):
        rows += [2 * i + 1, 2 * i + 1]
        cols += [i, i + 1]
        vals += [0.5, 0.5]
    return sp.csr_matrix((vals, (rows, cols)), shape=(nf, nc))


def q1_prolongation(nx_coarse, ny_coarse):
    """Bilinear Q1 embedding for lexicographic (x fastest) node numbering."""
    return sp.kron(q1_prolongation_1d(ny_coarse), q1_prolongation_1d(nx_coarse), format="csr")


class PressurePoisson:
    """Approximate the pinned ``K_p^{-1}`` by a fixed number of V(1,1) cycles.

    The pinned operator has identity row and column at ``pin``, so
    ``apply(b)[pin] == b[pin]`` and the other entries solve ``K_rr x_r = b_r``.
    Rather than cycling on ``K_rr`` (whose point constraint spoils the h-independence
    of the smoother) the cycles act on the singular Neumann operator with a
    compatible right-hand side, ``c_r = b_r`` and ``c_pin = -sum(b_r)``, and the
    result is shifted so that its pinned entry vanishes.  With exact inner solves
    this reproduces the pinned inverse; every step is linear in ``b``.

    Coarse operators are Galerkin products; the coarsest level is solved by LU
    with its node 0 removed.
    """

    def __init__(self, K_p, nx, ny, pin=0, cycles=2, omega=2.0 / 3.0, coarsest_cells=2):
        if pin != 0:
            raise ValueError("only node 0 (a grid corner shared by every level) can be pinned")
        self.pin = pin
        self.cycles = int(cycles)
        self.omega = float(omega)
        K = sp.csr_matrix(K_p)
        self.n = K.shape[0]
        self.keep = np.arange(1, self.n)
        self.ops = [K]
        self.prolongations = []
        while nx > coarsest_cells and nx % 2 == 0 and ny % 2 == 0:
            P = q1_prolongation(nx // 2, ny // 2)
            self.prolongations.append(P)
            self.ops.append((P.T @ self.ops[-1] @ P).tocsr())
            nx, ny = nx // 2, ny // 2
        self.dinv = [1.0 / A.diagonal() for A in self.ops]
        self.coarse = LUFactors(self.ops[-1][1:, 1:])

    @property
    def n_levels(self):
        return len(self.ops)

    def _coarse_solve(self, b):
        x = np.zeros_like(b)
        x[1:] = self.coarse.solve(b[1:])
        return x

    def _vcycle(self, level, b):
        if level == self.n_levels - 1:
            return self._coarse_solve(b)
        A, dinv, w = self.ops[level], self.dinv[level], self.omega
        x = w * dinv * b
        r = b - A @ x
        P = self.prolongations[level]
        x += P @ self._vcycle(level + 1, P.T @ r)
        x += w * dinv * (b - A @ x)
        return x

    def apply(self, b):
        b = np.asarray(b, dtype=float)
        c = b.copy()
        c[self.pin] = -(b.sum() - b[self.pin])
        A = self.ops[0]
        x = np.zeros_like(c)
        for _ in range(self.cycles):
            x += self._vcycle(0, c - A @ x)
        x -= x[self.pin]
        x[self.pin] = b[self.pin]
        return x

    __call__ = apply

    def pinned_operator(self):
        """``K_p`` with the pinned row and column replaced by the identity."""
        K = self.ops[0].tolil()
        K[self.pin, :] = 0.0
        K[:, self.pin] = 0.0
        K[self.pin, self.pin] = 1.0
        return K.tocsr()


def pressure_poisson_apply(P: PressurePoisson, b):
    return P.apply(b)
