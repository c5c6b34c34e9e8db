"""Augmented Lagrangian transformation and block-triangular preconditioner.

The stage system has the saddle-point form

    [ Phi  Psi1 ] [Y^u]   [b^u]
    [ Psi2  0   ] [Y^p] = [b^p],   Psi1 = dt A kron B^T,  Psi2 = dt A kron B.

With ``Wc = dt A kron W`` the augmented (1,1) block is
``Phi + gamma Psi1 Wc^{-1} Psi2 = Phi + gamma dt (A kron B^T W^{-1} B)`` and the
velocity right-hand side becomes ``b^u + gamma (I kron B^T W^{-1}) b^p``.  Both
systems share their solution.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, FullMpTooLarge, SingularInner
from .linalg import ChebyshevMass, ILUGmresSolve, KronOperator, LUFactors, PressurePoisson


class WMode(str, enum.Enum):
    DiagMp = "diag"
    FullMp = "full"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for m in cls:
            if key in (m.value, m.name.lower()):
                return m
        raise ValueError(f"unknown W mode {name!r}")


class DiagSolve(str, enum.Enum):
    ExactLU = "exact"
    InexactILUGmres = "inexact"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for m in cls:
            if key in (m.value, m.name.lower()):
                return m
        raise ValueError(f"unknown diagonal-solve mode {name!r}")


@dataclass(frozen=True)
class AugmentationParams:
    gamma: float = 1.0
    w_mode: WMode = WMode.DiagMp
    full_mp_limit: int = 300  # largest n_p for which the dense B^T M_p^{-1} B is allowed

    def __post_init__(self):
        if not self.gamma >= 0.0:
            raise ValueError("gamma must be non-negative")
        object.__setattr__(self, "w_mode", WMode.parse(self.w_mode))


@dataclass(frozen=True)
class GSConfig:
    sweeps: int = 1
    mode: DiagSolve = DiagSolve.ExactLU
    inner_iterations: int = 10

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        object.__setattr__(self, "mode", DiagSolve.parse(self.mode))


class WeightInverse:
    """Applies ``W^{-1}`` for ``W = diag(M_p)`` or ``W = M_p``."""

    def __init__(self, M_p, mode: WMode):
        self.mode = WMode.parse(mode)
        M_p = sp.csr_matrix(M_p)
        if self.mode is WMode.DiagMp:
            d = M_p.diagonal()
            if np.any(d <= 0):
                raise ValueError("diagonal of W must be positive")
            self.dinv = 1.0 / d
        else:
            self.lu = LUFactors(M_p)
        self.n = M_p.shape[0]

    def __call__(self, r):
        if self.mode is WMode.DiagMp:
            return self.dinv * r
        return self.lu.solve(r)

    def matrix(self):
        if self.mode is WMode.DiagMp:
            return sp.diags(self.dinv, format="csr")
        return np.column_stack([self.lu.solve(e) for e in np.eye(self.n)])


class AugmentedSystem:
    """Original and augmented stage operators over stacked ``[Y^u; Y^p]``.

    Parameters
    ----------
    Phi : list of lists of sparse matrices
        The ``s x s`` velocity block grid.
    B : sparse matrix
        Divergence matrix restricted to the unknown velocity dofs.
    A_rk : (s, s) array
    dt : float
    M_p : sparse matrix
        Pressure mass matrix, source of ``W``.
    params : AugmentationParams
    b_u, b_p : arrays, optional
        Right-hand side of the original system.
    """

    def __init__(self, Phi, B, A_rk, dt, M_p, params: AugmentationParams, b_u=None, b_p=None):
        self.A = np.asarray(A_rk, dtype=float)
        self.s = self.A.shape[0]
        if len(Phi) != self.s or any(len(row) != self.s for row in Phi):
            raise DimensionMismatch("Phi must be an s x s block grid")
        self.dt = float(dt)
        self.params = params
        self.B = sp.csr_matrix(B)
        self.n_p, self.n_u = self.B.shape
        self.Phi = [[sp.csr_matrix(blk) for blk in row] for row in Phi]
        for row in self.Phi:
            for blk in row:
                if blk.shape != (self.n_u, self.n_u):
                    raise DimensionMismatch(f"velocity block of shape {blk.shape}, expected {(self.n_u,) * 2}")

        if params.w_mode is WMode.FullMp and self.n_p > params.full_mp_limit:
            raise FullMpTooLarge(
                f"W = M_p gives a dense augmentation block; n_p = {self.n_p} exceeds {params.full_mp_limit}"
            )
        self.Winv = WeightInverse(M_p, params.w_mode)
        self.G = self._augmentation_block()
        g = params.gamma
        self.Phi_gamma = [
            [
                (self.Phi[i][j] + (g * self.dt * self.A[i, j]) * self.G).tocsr() if g and self.A[i, j] else self.Phi[i][j]
                for j in range(self.s)
            ]
            for i in range(self.s)
        ]
        self.Psi1 = KronOperator(self.A, self.B.T.tocsr(), scalar=self.dt)
        self.Psi2 = KronOperator(self.A, self.B, scalar=self.dt)

        self.b_u = None if b_u is None else np.asarray(b_u, dtype=float)
        self.b_p = None if b_p is None else np.asarray(b_p, dtype=float)
        self.b_u_hat = None
        if self.b_u is not None and self.b_p is not None:
            self.b_u_hat = self.augment_rhs(self.b_u, self.b_p)

    def _augmentation_block(self):
        """``G = B^T W^{-1} B``, assembled once and shared by every block."""
        if self.params.w_mode is WMode.DiagMp:
            return (self.B.T @ sp.diags(self.Winv.dinv) @ self.B).tocsr()
        WinvB = np.column_stack([self.Winv(col) for col in self.B.toarray().T])
        return sp.csr_matrix(self.B.T @ WinvB)

    @property
    def size_u(self):
        return self.s * self.n_u

    @property
    def size_p(self):
        return self.s * self.n_p

    @property
    def size(self):
        return self.size_u + self.size_p

    def augment_rhs(self, b_u, b_p):
        if self.params.gamma == 0.0:
            return np.array(b_u, dtype=float)
        Pb = np.asarray(b_p, dtype=float).reshape(self.s, self.n_p)
        corr = np.stack([self.B.T @ self.Winv(blk) for blk in Pb])
        return b_u + self.params.gamma * corr.ravel()

    def rhs(self, augmented=True):
        bu = self.b_u_hat if augmented else self.b_u
        return np.concatenate([bu, self.b_p])

    def _apply_blocks(self, grid, xu):
        X = xu.reshape(self.s, self.n_u)
        out = np.zeros_like(X)
        for i in range(self.s):
            for j in range(self.s):
                out[i] += grid[i][j] @ X[j]
        return out.ravel()

    def apply_phi(self, xu, augmented=True):
        return self._apply_blocks(self.Phi_gamma if augmented else self.Phi, xu)

    def apply(self, x, augmented=True):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise DimensionMismatch(f"expected length {self.size}, got {x.shape}")
        xu, xp = x[: self.size_u], x[self.size_u :]
        top = self.apply_phi(xu, augmented) + self.Psi1 @ xp
        bottom = self.Psi2 @ xu
        return np.concatenate([top, bottom])

    def apply_original(self, x):
        return self.apply(x, augmented=False)

    def phi_matrix(self, augmented=True):
        return sp.bmat(self.Phi_gamma if augmented else self.Phi, format="csr")

    def matrix(self, augmented=True):
        Psi1 = sp.kron(self.dt * self.A, self.B.T)
        Psi2 = sp.kron(self.dt * self.A, self.B)
        return sp.bmat([[self.phi_matrix(augmented), Psi1], [Psi2, None]], format="csr")

    def W_inv_stacked(self):
        """Dense ``Wc^{-1} = dt^{-1} A^{-1} kron W^{-1}``."""
        Wi = self.Winv.matrix()
        Wi = Wi.toarray() if sp.issparse(Wi) else Wi
        return np.kron(np.linalg.inv(self.A), Wi) / self.dt


def build_augmented(Phi, B, A_rk, dt, M_p, params: AugmentationParams, b_u=None, b_p=None) -> AugmentedSystem:
    return AugmentedSystem(Phi, B, A_rk, dt, M_p, params, b_u, b_p)


class BlockGaussSeidel:
    """Forward block Gauss-Seidel on the augmented velocity block grid."""

    def __init__(self, sys: AugmentedSystem, cfg: GSConfig = GSConfig()):
        self.sys = sys
        self.cfg = cfg
        if cfg.mode is DiagSolve.ExactLU:
            self.solvers = [LUFactors(sys.Phi_gamma[i][i]) for i in range(sys.s)]
        else:
            self.solvers = [ILUGmresSolve(sys.Phi_gamma[i][i], cfg.inner_iterations) for i in range(sys.s)]

    def apply(self, r):
        s, n = self.sys.s, self.sys.n_u
        R = np.asarray(r, dtype=float).reshape(s, n)
        Z = np.zeros_like(R)
        grid = self.sys.Phi_gamma
        for _ in range(self.cfg.sweeps):
            for i in range(s):
                rhs = R[i].copy()
                for j in range(s):
                    if j != i:
                        rhs -= grid[i][j] @ Z[j]
                Z[i] = self.solvers[i].solve(rhs)
        return Z.ravel()

    __call__ = apply


def apply_gauss_seidel_11(sys: AugmentedSystem, cfg: GSConfig, r):
    return BlockGaussSeidel(sys, cfg).apply(r)


class SchurApprox:
    """``S_gamma^{-1} ~ gamma Wc^{-1} + dt^{-2} (A^{-1} kron I) S_int^{-1} (A^{-1} kron I)``.

    ``S_int^{-1} ~ I kron K_p^{-1} + nu dt A kron M_p^{-1}``, where ``K_p^{-1}`` acts on the
    operator with one pinned node.  ``kp_inv`` and ``mp_inv`` are callables; use
    :meth:`build` for the default multigrid and Chebyshev appliers or exact LU.
    """

    def __init__(self, A_rk, dt, gamma, nu, w_inv, kp_inv, mp_inv):
        self.A = np.asarray(A_rk, dtype=float)
        self.A_inv = np.linalg.inv(self.A)
        self.s = self.A.shape[0]
        self.dt = float(dt)
        self.gamma = float(gamma)
        self.nu = float(nu)
        self.w_inv = w_inv
        self.kp_inv = kp_inv
        self.mp_inv = mp_inv

    @classmethod
    def build(cls, A_rk, dt, gamma, nu, M_p, K_p, nx, ny, w_inv, exact=False, pin=0):
        if exact:
            P = PressurePoisson(K_p, nx, ny, pin=pin)
            kp = LUFactors(P.pinned_operator()).solve
            mp = LUFactors(M_p).solve
        else:
            kp = PressurePoisson(K_p, nx, ny, pin=pin).apply
            mp = ChebyshevMass(M_p).apply
        return cls(A_rk, dt, gamma, nu, w_inv, kp, mp)

    def apply(self, r):
        R = np.asarray(r, dtype=float).reshape(self.s, -1)
        Y = self.A_inv @ R
        KY = np.stack([self.kp_inv(y) for y in Y])
        MY = np.stack([self.mp_inv(y) for y in Y])
        inner = KY + (self.nu * self.dt) * (self.A @ MY)
        z = (self.A_inv @ inner) / self.dt**2
        if self.gamma:
            z += (self.gamma / self.dt) * (self.A_inv @ np.stack([self.w_inv(blk) for blk in R]))
        return z.ravel()

    __call__ = apply


def apply_schur_inverse(S: SchurApprox, r):
    return S.apply(r)


class ALPreconditioner:
    """Block-triangular preconditioner with (1,1) block ``Phi_gamma`` and (2,2) block ``-S``.

    ``variant="upper"`` back-substitutes pressure first; ``"lower"`` solves the
    velocity block first.  ``velocity_solve`` and ``schur_inverse`` are callables.
    """

    def __init__(self, sys: AugmentedSystem, velocity_solve, schur_inverse, variant="upper"):
        if variant not in ("upper", "lower"):
            raise ValueError("variant must be 'upper' or 'lower'")
        self.sys = sys
        self.velocity_solve = velocity_solve
        self.schur_inverse = schur_inverse
        self.variant = variant

    def apply(self, r):
        r = np.asarray(r, dtype=float)
        n = self.sys.size_u
        ru, rp = r[:n], r[n:]
        if self.variant == "upper":
            zp = -self.schur_inverse(rp)
            zu = self.velocity_solve(ru - self.sys.Psi1 @ zp)
        else:
            zu = self.velocity_solve(ru)
            zp = -self.schur_inverse(rp - self.sys.Psi2 @ zu)
        return np.concatenate([zu, zp])

    __call__ = apply


def apply_preconditioner(sys, cfg: GSConfig, S: SchurApprox, residual, variant="upper"):
    return ALPreconditioner(sys, BlockGaussSeidel(sys, cfg), S, variant).apply(residual)


def ideal_preconditioner(sys: AugmentedSystem, variant="upper") -> ALPreconditioner:
    """Exact LU of the whole augmented (1,1) block and the dense ``S_gamma``.

    Only for small instances whose ``S_gamma`` is nonsingular (no constant
    pressure mode, e.g. one pressure dof removed).
    """
    lu = LUFactors(sys.phi_matrix(augmented=True))
    PhiInvPsi1 = np.column_stack([lu.solve(sys.Psi1 @ e) for e in np.eye(sys.size_p)])
    S = np.column_stack([sys.Psi2 @ col for col in PhiInvPsi1.T])
    _check_conditioning(S, "S_gamma")
    S_lu = np.linalg.inv(S)
    return ALPreconditioner(sys, lu.solve, lambda r: S_lu @ r, variant)


def _check_conditioning(S, label, limit=1e12):
    sv = np.linalg.svd(S, compute_uv=False)
    if sv[-1] <= limit**-1 * sv[0] or not np.isfinite(sv).all():
        raise SingularInner(f"{label} is numerically singular (cond = {sv[0] / max(sv[-1], 1e-300):.2e})")


def verify_smw_identity(Phi, Psi1, Psi2, W_inv, gamma):
    """Relative gap between both sides of ``S_gamma^{-1} = gamma Wc^{-1} + (Psi2 Phi^{-1} Psi1)^{-1}``.

    All arguments are dense; ``W_inv`` is the stacked ``Wc^{-1}``.
    """
    Phi, Psi1, Psi2, W_inv = (np.asarray(m.toarray() if sp.issparse(m) else m, dtype=float) for m in (Phi, Psi1, Psi2, W_inv))
    inner = Psi2 @ np.linalg.solve(Phi, Psi1)
    _check_conditioning(inner, "Psi2 Phi^{-1} Psi1")
    S_gamma = Psi2 @ np.linalg.solve(Phi + gamma * Psi1 @ W_inv @ Psi2, Psi1)
    _check_conditioning(S_gamma, "S_gamma")
    lhs = np.linalg.inv(S_gamma)
    rhs = gamma * W_inv + np.linalg.inv(inner)
    return float(np.linalg.norm(lhs - rhs, 2) / np.linalg.norm(lhs, 2))


def preconditioned_spectrum(sys: AugmentedSystem, precond) -> np.ndarray:
    """Eigenvalues of ``A P^{-1}`` (dense, small instances only)."""
    AP = np.column_stack([sys.apply(precond(e)) for e in np.eye(sys.size)])
    return np.linalg.eigvals(AP)


def dump_spectrum_csv(path, eigenvalues):
    ev = np.asarray(eigenvalues)
    order = np.lexsort((ev.imag, ev.real))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["real", "imag"])
        for z in ev[order]:
            w.writerow([f"{z.real:.6e}", f"{z.imag:.6e}"])
