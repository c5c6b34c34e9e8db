"""Dense-oracle identity checks on small stage systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .al_precond import AugmentationParams, AugmentedSystem, ideal_preconditioner, verify_smw_identity
from .krylov import KrylovConfig, fgmres
from .problems import manufactured, steps_for_level
from .stage_system import Discretization, StageVector, assemble_newton_system, initial_state, stage_boundary_rates
from .tableau import Family, make_tableau


@dataclass
class Instance:
    system: AugmentedSystem
    nsys: object
    disc: Discretization


def stokes_instance(level=2, s=2, gamma=1.0, pin=True, family=Family.RADAU_IIA, seed=0):
    """Augmented Stokes stage system on the unit square with a random right-hand side.

    ``pin=True`` removes pressure dof 0 so that the Schur complements are
    nonsingular.
    """
    tab = make_tableau(family, s)
    prob = manufactured(n_t=steps_for_level(2.0, level, tab.order), convection=False)
    disc = Discretization(prob, level)
    state, _ = initial_state(disc, prob)
    Y = StageVector.zeros(s, disc.n_u, disc.n_p)
    Y.Yu[:, disc.fixed] = stage_boundary_rates(disc, prob, state, tab, prob.dt)[:, disc.fixed]
    nsys = assemble_newton_system(disc, prob, state, Y, tab)
    keep = np.arange(1 if pin else 0, disc.n_p)
    B = nsys.B_f[keep]
    M_p = disc.ops.M_p[keep][:, keep]
    rng = np.random.default_rng(seed)
    bu = rng.standard_normal(s * disc.n_free)
    bp = rng.standard_normal(s * len(keep))
    sys_ = AugmentedSystem(nsys.Phi, B, tab.A, prob.dt, M_p, AugmentationParams(gamma), bu, bp)
    return Instance(sys_, nsys, disc)


def _dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def ideal_iterations(level=2, s=2, gamma=1.0, tol=1e-10):
    """FGMRES iterations with the exact block-triangular preconditioner."""
    inst = stokes_instance(level, s, gamma)
    P = ideal_preconditioner(inst.system)
    res = fgmres(inst.system.apply, P.apply, inst.system.rhs(), cfg=KrylovConfig(rel_tol=tol, abs_tol=1e-300, max_iters=20))
    return res.iterations, res.residuals[-1] / res.residuals[0]


def smw_error(level=2, s=2, gamma=1.0):
    inst = stokes_instance(level, s, gamma)
    S = inst.system
    Phi = _dense(S.phi_matrix(augmented=False))
    return verify_smw_identity(Phi, S.Psi1.todense(), S.Psi2.todense(), S.W_inv_stacked(), gamma)


def kron_collapse_error(level=2, s=2, gamma=1.0):
    """``gamma Psi1 Wc^{-1} Psi2`` against ``gamma dt (A kron B^T W^{-1} B)``."""
    S = stokes_instance(level, s, gamma, pin=False).system
    lhs = gamma * S.Psi1.todense() @ S.W_inv_stacked() @ S.Psi2.todense()
    rhs = gamma * S.dt * np.kron(S.A, _dense(S.G))
    aug = _dense(S.phi_matrix(True)) - _dense(S.phi_matrix(False))
    return max(np.abs(lhs - rhs).max(), np.abs(aug - lhs).max()) / np.abs(rhs).max()


def factorization_error(level=2, s=2):
    """``Psi2 Phi^{-1} Psi1`` against ``dt^2 (A kron I) (I kron B) Phi^{-1} (I kron B^T) (A kron I)``."""
    S = stokes_instance(level, s, pin=False).system
    Phi = _dense(S.phi_matrix(augmented=False))
    lhs = S.Psi2.todense() @ np.linalg.solve(Phi, S.Psi1.todense())
    B = _dense(S.B)
    Ip = np.eye(S.n_p)
    IB = np.kron(np.eye(S.s), B)
    S_int = IB @ np.linalg.solve(Phi, IB.T)
    AI = np.kron(S.A, Ip)
    rhs = S.dt**2 * AI @ S_int @ AI
    return np.abs(lhs - rhs).max() / np.abs(lhs).max()


def newton_fd_slope(disc, prob, state, tab, rng, eps=(1e-3, 1e-4, 1e-5, 1e-6)):
    """Log-log slope of ``|(R(Y + e v) - R(Y)) / e - J v|`` against ``e`` at a random iterate.

    A correct Jacobian gives slope 1 (first-order truncation error).
    """
    Y = StageVector.zeros(tab.s, disc.n_u, disc.n_p)
    Y.Yu[:, disc.fixed] = stage_boundary_rates(disc, prob, state, tab, prob.dt)[:, disc.fixed]
    Y.Yu[:, disc.free] += rng.standard_normal((tab.s, disc.n_free))
    Y.Yp += rng.standard_normal((tab.s, disc.n_p))
    nsys = assemble_newton_system(disc, prob, state, Y, tab)
    R0 = np.concatenate([nsys.R_u.ravel(), nsys.R_p.ravel()])
    v = rng.standard_normal(len(R0))
    Jv = nsys.matrix() @ v
    nf = tab.s * disc.n_free
    errs = []
    for e in eps:
        Z = Y.copy()
        Z.Yu[:, disc.free] += e * v[:nf].reshape(tab.s, -1)
        Z.Yp += e * v[nf:].reshape(tab.s, -1)
        ns = assemble_newton_system(disc, prob, state, Z, tab)
        R = np.concatenate([ns.R_u.ravel(), ns.R_p.ravel()])
        errs.append(np.linalg.norm((R - R0) / e - Jv))
    return float(np.polyfit(np.log(eps), np.log(errs), 1)[0])


def toy_smw_error(n=8, m=3, gamma=1.0, seed=0):
    """SMW identity on random SPD ``Phi`` (n x n), full-rank ``B`` (m x n) and SPD ``W``."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n))
    Phi = X @ X.T + n * np.eye(n)
    B = rng.standard_normal((m, n))
    Y = rng.standard_normal((m, m))
    W = Y @ Y.T + m * np.eye(m)
    return verify_smw_identity(Phi, B.T, B, np.linalg.inv(W), gamma)


@dataclass
class CheckResult:
    name: str
    value: float
    limit: float

    @property
    def passed(self):
        return bool(self.value <= self.limit)

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<40s} {self.value:.3e}  (limit {self.limit:.1e})"


def run_all():
    out = [CheckResult("smw toy n=8 m=3", toy_smw_error(), 1e-10)]
    for s in (1, 2):
        out.append(CheckResult(f"smw stokes l=2 s={s}", smw_error(2, s), 1e-9))
    for s in (1, 2, 3):
        out.append(CheckResult(f"kron collapse l=2 s={s}", kron_collapse_error(2, s), 1e-11))
        out.append(CheckResult(f"factorization l=2 s={s}", factorization_error(2, s), 1e-11))
    its, rel = ideal_iterations(2, 2)
    out.append(CheckResult("ideal preconditioner iterations l=2 s=2", its, 2))
    out.append(CheckResult("ideal preconditioner residual", rel, 1e-10))
    return out
