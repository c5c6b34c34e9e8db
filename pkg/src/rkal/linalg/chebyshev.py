"""Jacobi-preconditioned Chebyshev semi-iteration for SPD mass matrices."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .direct import LUFactors


def jacobi_spectrum_bounds(M, iterations=50, margin=0.01, seed=0):
    """Estimate ``[lmin, lmax]`` of ``D^{-1} M`` by power and inverse power iteration.

    Both estimates approach the extremes from inside the spectrum, so the
    interval is widened by ``margin`` (relative) on each side.
    """
    M = sp.csr_matrix(M)
    d = M.diagonal()
    s = 1.0 / np.sqrt(d)
    S = sp.diags(s) @ M @ sp.diags(s)  # similar to D^{-1} M, symmetric
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(iterations):
        v = S @ v
        v /= np.linalg.norm(v)
    lmax = float(v @ (S @ v))
    lu = LUFactors(S)
    v = rng.standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(iterations):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
    lmin = float(v @ (S @ v))
    return lmin * (1.0 - margin), lmax * (1.0 + margin)


class ChebyshevMass:
    """Fixed-degree Chebyshev approximation of ``M^{-1}``.

    A linear operator: no inner products are taken during ``apply``.
    """

    def __init__(self, M, iterations=20, bounds=None):
        self.M = sp.csr_matrix(M)
        self.dinv = 1.0 / self.M.diagonal()
        self.iterations = int(iterations)
        self.bounds = tuple(bounds) if bounds is not None else jacobi_spectrum_bounds(self.M)
        lmin, lmax = self.bounds
        if not 0.0 < lmin <= lmax:
            raise ValueError(f"invalid eigenvalue bracket {self.bounds}")

    def apply(self, b):
        b = np.asarray(b, dtype=float)
        lmin, lmax = self.bounds
        theta = 0.5 * (lmax + lmin)
        delta = 0.5 * (lmax - lmin)
        x = np.zeros_like(b)
        if self.iterations == 0:
            return x
        r = b.copy()
        d = self.dinv * r / theta
        if delta == 0.0:
            return d
        sigma = theta / delta
        rho = 1.0 / sigma
        for _ in range(self.iterations):
            x += d
            r -= self.M @ d
            rho_new = 1.0 / (2.0 * sigma - rho)
            d = (rho_new * rho) * d + (2.0 * rho_new / delta) * (self.dinv * r)
            rho = rho_new
        return x

    __call__ = apply


def chebyshev_apply(C: ChebyshevMass, b):
    return C.apply(b)
