"""Runge-Kutta stage equations for Navier-Stokes, Newton's method and the time loop.

Stage unknowns are the velocity and pressure rates ``Y^u_i``, ``Y^p_i``;
``w_i = x_n + dt sum_j a_ij Y_j``.  The stage equations are

    M_u Y^u_i + nu K_u w^u_i + N_u(w^u_i) w^u_i + B^T w^p_i = f(t_n + c_i dt)
    B w^u_i = 0

on the velocity dofs not fixed by Dirichlet data.  On boundary dofs ``Y^u_i``
equals the time derivative of the boundary data at the stage time, so the
Newton system only carries free velocity dofs and all pressure dofs.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .al_precond import (
    ALPreconditioner,
    AugmentationParams,
    AugmentedSystem,
    BlockGaussSeidel,
    GSConfig,
    SchurApprox,
    WMode,
)
from .errors import DimensionMismatch, NewtonDiverged, NotSolenoidal
from .fem import (
    Operators,
    assemble_convection,
    assemble_convection_jacobian,
    assemble_load,
    assemble_lps,
    assemble_pressure_gradient_load,
    build_mesh,
    mean_free,
    project_velocity,
    quadrature_points,
    velocity_at_quadrature,
    velocity_laplacian_at_quadrature,
)
from .krylov import KrylovConfig, fgmres
from .linalg import LUFactors
from .problems import ProblemSpec
from .tableau import ButcherTableau

log = logging.getLogger(__name__)

DIV_TOL = 1e-8


@dataclass
class TimeState:
    u: np.ndarray
    p: np.ndarray
    t: float
    n: int = 0


@dataclass
class StageVector:
    """Stage rates as ``(s, n_u)`` and ``(s, n_p)`` arrays."""

    Yu: np.ndarray
    Yp: np.ndarray

    @classmethod
    def zeros(cls, s, n_u, n_p):
        return cls(np.zeros((s, n_u)), np.zeros((s, n_p)))

    @property
    def s(self):
        return self.Yu.shape[0]

    def copy(self):
        return StageVector(self.Yu.copy(), self.Yp.copy())


@dataclass
class StageAuxiliary:
    wu: np.ndarray
    wp: np.ndarray

    @classmethod
    def from_stages(cls, state: TimeState, Y: StageVector, A, dt):
        return cls(state.u[None, :] + dt * (A @ Y.Yu), state.p[None, :] + dt * (A @ Y.Yp))


@dataclass
class NewtonConfig:
    rel_tol: float = 1e-5
    # two orders above the FGMRES absolute floor, so a nearly steady step cannot stall
    abs_tol: float = 1e-8
    max_iters: int = 20

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.max_iters < 1:
            raise ValueError("Newton tolerances and max_iters must be positive")


@dataclass
class LinearSolverConfig:
    """How each Newton system is solved.

    ``method="fgmres"`` uses the augmented Lagrangian preconditioner;
    ``method="direct"`` factorises the unaugmented system (one pressure dof
    per stage pinned) and is meant for small reference runs.
    """

    method: str = "fgmres"
    gamma: float = 1.0
    w_mode: WMode = WMode.DiagMp
    gs: GSConfig = field(default_factory=GSConfig)
    krylov: KrylovConfig = field(default_factory=KrylovConfig)
    exact_inner: bool = False
    variant: str = "upper"

    def __post_init__(self):
        if self.method not in ("fgmres", "direct"):
            raise ValueError(f"unknown linear solver {self.method!r}")
        self.w_mode = WMode.parse(self.w_mode)


class Discretization:
    """Mesh, spaces, wind-independent operators and the free/fixed dof split."""

    def __init__(self, problem: ProblemSpec, level: int):
        self.level = level
        self.mesh, self.spaces = build_mesh(problem.domain, level)
        self.ops = Operators(self.spaces)
        self.free = self.spaces.free_dofs
        self.fixed = self.spaces.boundary_dofs
        self.B_f = self.ops.B[:, self.free].tocsr()
        self.M_ff = self.ops.M_u[self.free][:, self.free].tocsr()

    @property
    def n_u(self):
        return self.spaces.n_u

    @property
    def n_p(self):
        return self.spaces.n_p

    @property
    def n_free(self):
        return len(self.free)

    def dof_count(self, s):
        return self.spaces.dof_count(s)


@dataclass
class NewtonSystem:
    """Jacobian blocks and residual of one Newton iteration.

    ``Phi[i][j] = delta_ij M_u + dt a_ij L_u(w_i)`` on free dofs; the coupling
    blocks are ``dt A kron B_f^T`` and ``dt A kron B_f``.  The linear system is
    ``J delta = -[R_u; R_p]``.
    """

    Phi: list
    B_f: sp.csr_matrix
    A: np.ndarray
    dt: float
    R_u: np.ndarray  # (s, n_free)
    R_p: np.ndarray  # (s, n_p)

    @property
    def s(self):
        return self.A.shape[0]

    @property
    def residual_norm(self):
        return float(np.sqrt(np.sum(self.R_u**2) + np.sum(self.R_p**2)))

    def rhs(self):
        return -self.R_u.ravel(), -self.R_p.ravel()

    def matrix(self):
        Psi1 = sp.kron(self.dt * self.A, self.B_f.T)
        Psi2 = sp.kron(self.dt * self.A, self.B_f)
        return sp.bmat([[sp.bmat(self.Phi), Psi1], [Psi2, None]], format="csr")


def stage_boundary_rates(disc: Discretization, problem: ProblemSpec, state: TimeState, tableau: ButcherTableau, dt):
    """Dirichlet values of ``Y^u_i`` (time derivative of the data at each stage)."""
    t_mid = state.t + 0.5 * dt
    out = np.zeros((tableau.s, disc.n_u))
    if problem.boundary_rate is None:
        return out
    sp_ = disc.spaces
    for i, c in enumerate(tableau.c):
        gx, gy = problem.boundary_rate(sp_.vnode_x, sp_.vnode_y, state.t + c * dt, t_mid)
        full = np.concatenate([np.broadcast_to(gx, sp_.vnode_x.shape), np.broadcast_to(gy, sp_.vnode_x.shape)])
        out[i, disc.fixed] = full[disc.fixed]
    return out


def _stage_loads(disc, problem, state, tableau, dt):
    if problem.forcing is None:
        return np.zeros((tableau.s, disc.n_u))
    return np.stack([assemble_load(disc.spaces, problem.forcing, state.t + c * dt) for c in tableau.c])


def _stage_residual(disc, problem, Y, aux, loads, Q):
    ops = disc.ops
    s = Y.s
    Ru = np.empty((s, disc.n_free))
    Rp = np.empty((s, disc.n_p))
    for i in range(s):
        w = aux.wu[i]
        r = ops.M_u @ Y.Yu[i] + problem.nu * (ops.K_u @ w) + ops.B.T @ aux.wp[i] - loads[i]
        if problem.convection:
            r += assemble_convection(disc.spaces, w) @ w
        if Q is not None:
            r += Q @ w
        Ru[i] = r[disc.free]
        Rp[i] = ops.B @ w
    return Ru, Rp


def assemble_newton_system(
    disc: Discretization,
    problem: ProblemSpec,
    state: TimeState,
    Y: StageVector,
    tableau: ButcherTableau,
    Q=None,
    loads=None,
) -> NewtonSystem:
    """Jacobian and residual at the iterate ``Y``.

    ``Q`` is the stabilisation matrix, frozen for the whole step.
    """
    s = tableau.s
    if Y.Yu.shape != (s, disc.n_u) or Y.Yp.shape != (s, disc.n_p):
        raise DimensionMismatch("stage vector does not match the discretisation")
    dt = problem.dt
    A = tableau.A
    if loads is None:
        loads = _stage_loads(disc, problem, state, tableau, dt)
    aux = StageAuxiliary.from_stages(state, Y, A, dt)
    Ru, Rp = _stage_residual(disc, problem, Y, aux, loads, Q)

    ops, free = disc.ops, disc.free
    Phi = [[None] * s for _ in range(s)]
    for i in range(s):
        L = problem.nu * ops.K_u
        if problem.convection:
            w = aux.wu[i]
            L = L + assemble_convection(disc.spaces, w) + assemble_convection_jacobian(disc.spaces, w)
        if Q is not None:
            L = L + Q
        L_ff = L.tocsr()[free][:, free]
        for j in range(s):
            blk = (dt * A[i, j]) * L_ff
            if i == j:
                blk = blk + disc.M_ff
            Phi[i][j] = blk.tocsr()
    return NewtonSystem(Phi, disc.B_f, np.asarray(A), dt, Ru, Rp)


@dataclass
class LinearSolveInfo:
    iterations: int
    seconds: float
    residuals: list
    converged: bool


class StageSolver:
    """Solves Newton systems with the configured linear solver."""

    def __init__(self, disc: Discretization, problem: ProblemSpec, cfg: LinearSolverConfig):
        self.disc = disc
        self.problem = problem
        self.cfg = cfg
        self._schur_cache = {}

    def _schur(self, A, dt, w_inv):
        key = (A.tobytes(), dt)
        if key not in self._schur_cache:
            d = self.disc
            self._schur_cache = {
                key: SchurApprox.build(
                    A, dt, self.cfg.gamma, self.problem.nu, d.ops.M_p, d.ops.K_p, d.mesh.nx, d.mesh.ny,
                    w_inv, exact=self.cfg.exact_inner,
                )
            }
        S = self._schur_cache[key]
        S.w_inv = w_inv
        return S

    def augmented(self, nsys: NewtonSystem) -> AugmentedSystem:
        bu, bp = nsys.rhs()
        params = AugmentationParams(self.cfg.gamma, self.cfg.w_mode)
        return AugmentedSystem(nsys.Phi, nsys.B_f, nsys.A, nsys.dt, self.disc.ops.M_p, params, bu, bp)

    def solve(self, nsys: NewtonSystem):
        start = time.perf_counter()
        if self.cfg.method == "direct":
            x = self._direct(nsys)
            info = LinearSolveInfo(1, time.perf_counter() - start, [], True)
            return x, info
        sys_ = self.augmented(nsys)
        gs = BlockGaussSeidel(sys_, self.cfg.gs)
        S = self._schur(nsys.A, nsys.dt, sys_.Winv)
        P = ALPreconditioner(sys_, gs, S, self.cfg.variant)
        res = fgmres(sys_.apply, P.apply, sys_.rhs(augmented=True), cfg=self.cfg.krylov)
        info = LinearSolveInfo(res.iterations, time.perf_counter() - start, res.residuals, res.converged)
        if not res.converged:
            log.warning("FGMRES stopped (%s) after %d iterations, residual %.3e", res.status, res.iterations,
                        res.final_residual)
        return res.x, info

    def _direct(self, nsys: NewtonSystem):
        s, nf, n_p = nsys.s, self.disc.n_free, self.disc.n_p
        J = nsys.matrix()
        bu, bp = nsys.rhs()
        b = np.concatenate([bu, bp])
        pinned = s * nf + n_p * np.arange(s)
        keep = np.setdiff1d(np.arange(J.shape[0]), pinned)
        x = np.zeros(J.shape[0])
        x[keep] = LUFactors(J[keep][:, keep]).solve(b[keep])
        return x


@dataclass
class NewtonResult:
    Y: StageVector
    iterations: int
    linear_iterations: list
    linear_seconds: float
    residuals: list
    unconverged_solves: int = 0


def newton_solve(
    disc: Discretization,
    problem: ProblemSpec,
    state: TimeState,
    tableau: ButcherTableau,
    newton_cfg: NewtonConfig = NewtonConfig(),
    solver: StageSolver | None = None,
    Y0: StageVector | None = None,
) -> NewtonResult:
    """Newton's method for the stage equations of one step, starting from ``Y = 0``."""
    solver = solver or StageSolver(disc, problem, LinearSolverConfig())
    s, dt = tableau.s, problem.dt
    Y = Y0.copy() if Y0 is not None else StageVector.zeros(s, disc.n_u, disc.n_p)
    Y.Yu[:, disc.fixed] = stage_boundary_rates(disc, problem, state, tableau, dt)[:, disc.fixed]
    Q = assemble_lps(disc.spaces, state.u, problem.nu) if problem.lps else None
    loads = _stage_loads(disc, problem, state, tableau, dt)

    nsys = assemble_newton_system(disc, problem, state, Y, tableau, Q, loads)
    r0 = nsys.residual_norm
    residuals = [r0]
    lin_its, lin_time, unconverged = [], 0.0, 0
    target = max(newton_cfg.rel_tol * r0, newton_cfg.abs_tol)
    k = 0
    while residuals[-1] > target:
        if k >= newton_cfg.max_iters:
            raise NewtonDiverged(
                f"Newton did not converge in {k} iterations (residual {residuals[-1]:.3e}, target {target:.3e})",
                step=state.n,
            )
        x, info = solver.solve(nsys)
        lin_its.append(info.iterations)
        unconverged += not info.converged
        lin_time += info.seconds
        nfree = s * disc.n_free
        Y.Yu[:, disc.free] += x[:nfree].reshape(s, disc.n_free)
        Y.Yp += x[nfree:].reshape(s, disc.n_p)
        k += 1
        nsys = assemble_newton_system(disc, problem, state, Y, tableau, Q, loads)
        residuals.append(nsys.residual_norm)
        log.debug("step %d newton %d residual %.3e", state.n, k, residuals[-1])
        if not np.isfinite(residuals[-1]):
            raise NewtonDiverged(f"non-finite Newton residual at iteration {k}", step=state.n)
    return NewtonResult(Y, k, lin_its, lin_time, residuals, unconverged)


def rk_update(state: TimeState, Y: StageVector, tableau: ButcherTableau, dt: float) -> TimeState:
    """``x_{n+1} = x_n + dt sum_i b_i Y_i``; the mass matrices cancel in the matrix form."""
    b = tableau.b
    return TimeState(state.u + dt * (b @ Y.Yu), state.p + dt * (b @ Y.Yp), state.t + dt, state.n + 1)


def consistent_pressure(disc: Discretization, u0, nu, forcing=None, t0=0.0, source=None, div_tol=DIV_TOL):
    """Pressure satisfying the hidden constraint of the initial data.

    Solves ``K_p p = (F, grad psi)`` with ``F = f + nu Lap u0 - (u0 . grad) u0``,
    node 0 pinned to zero, then shifts to zero mean.  ``source(x, y) -> (Fx, Fy)``
    replaces the discrete evaluation of ``F`` when the data are known in closed
    form.  Returns ``(p0, relative residual of the Poisson solve)``.
    """
    u0 = np.asarray(u0, dtype=float)
    div = np.linalg.norm(disc.ops.B @ u0)
    if div >= div_tol:
        raise NotSolenoidal(f"|B u0| = {div:.3e} exceeds {div_tol:.1e}")
    spaces = disc.spaces
    X, Y = quadrature_points(spaces)
    if source is not None:
        Fx, Fy = (np.broadcast_to(np.asarray(v, dtype=float), X.shape) for v in source(X, Y))
    else:
        (ux, uy), grads = velocity_at_quadrature(spaces, u0)
        lx, ly = velocity_laplacian_at_quadrature(spaces, u0)
        Fx = nu * lx - (ux * grads[0][0] + uy * grads[0][1])
        Fy = nu * ly - (ux * grads[1][0] + uy * grads[1][1])
        if forcing is not None:
            fx, fy = forcing(X, Y, t0)
            Fx = Fx + fx
            Fy = Fy + fy
    rhs = assemble_pressure_gradient_load(spaces, Fx, Fy)
    # sum(rhs) vanishes in exact arithmetic (partition of unity); drop the rounding residue
    rhs -= rhs.mean()
    K = disc.ops.K_p
    p = np.zeros(disc.n_p)
    if np.any(rhs):
        p[1:] = LUFactors(K[1:, 1:]).solve(rhs[1:])
    scale = np.linalg.norm(rhs)
    resid = float(np.linalg.norm(K @ p - rhs) / scale) if scale > 0 else 0.0
    return mean_free(disc.ops.M_p, p), resid


def initial_state(disc: Discretization, problem: ProblemSpec):
    """Solenoidal L2 projection of ``u0`` (boundary dofs interpolated) and the consistent pressure."""

    def u0(x, y, t):
        return problem.u0(x, y)

    if problem.u0 is None:
        u = np.zeros(disc.n_u)
    else:
        u = project_velocity(disc.spaces, u0, problem.t0, boundary=problem.boundary, solenoidal=True, ops=disc.ops)
    p, resid = consistent_pressure(disc, u, problem.nu, problem.forcing, problem.t0, problem.pressure_source)
    return TimeState(u, p, problem.t0, 0), resid


@dataclass
class RunStatistics:
    steps: int = 0
    newton_iterations: list = field(default_factory=list)
    linear_iterations: list = field(default_factory=list)
    linear_seconds: float = 0.0
    max_divergence: float = 0.0
    pressure_residual: float = 0.0
    unconverged_solves: int = 0

    @property
    def avg_linear_iterations(self):
        return float(np.mean(self.linear_iterations)) if self.linear_iterations else float("nan")

    @property
    def avg_newton_iterations(self):
        return float(np.mean(self.newton_iterations)) if self.newton_iterations else float("nan")

    @property
    def cpu_per_linear_iteration(self):
        total = sum(self.linear_iterations)
        return self.linear_seconds / total if total else float("nan")

    @property
    def cpu_per_step(self):
        return self.linear_seconds / self.steps if self.steps else float("nan")

    def as_dict(self):
        return {
            "steps": self.steps,
            "avg_its": self.avg_linear_iterations,
            "avg_nit": self.avg_newton_iterations,
            "cpu_per_it": self.cpu_per_linear_iteration,
            "cpu_per_step": self.cpu_per_step,
            "max_div": self.max_divergence,
            "unconverged_solves": self.unconverged_solves,
        }


@dataclass
class Trajectory:
    final: TimeState
    stats: RunStatistics
    states: list = field(default_factory=list)


def time_loop(
    disc: Discretization,
    problem: ProblemSpec,
    tableau: ButcherTableau,
    newton_cfg: NewtonConfig = NewtonConfig(),
    linear_cfg: LinearSolverConfig | None = None,
    observer=None,
    store: bool = False,
    state: TimeState | None = None,
) -> Trajectory:
    """Advance ``problem.n_t`` steps.  ``observer(state)`` sees the initial and every new state."""
    stats = RunStatistics()
    if state is None:
        state, stats.pressure_residual = initial_state(disc, problem)
    stats.max_divergence = float(np.linalg.norm(disc.ops.B @ state.u))
    states = [state] if store else []
    if observer is not None:
        observer(state)
    solver = StageSolver(disc, problem, linear_cfg or LinearSolverConfig())
    for _ in range(problem.n_t):
        try:
            res = newton_solve(disc, problem, state, tableau, newton_cfg, solver)
        except NewtonDiverged as exc:
            exc.step = state.n
            raise
        state = rk_update(state, res.Y, tableau, problem.dt)
        stats.steps += 1
        stats.newton_iterations.append(res.iterations)
        stats.linear_iterations.extend(res.linear_iterations)
        stats.linear_seconds += res.linear_seconds
        stats.unconverged_solves += res.unconverged_solves
        stats.max_divergence = max(stats.max_divergence, float(np.linalg.norm(disc.ops.B @ state.u)))
        log.info("step %d t=%.4f newton %d linear %s", state.n, state.t, res.iterations, res.linear_iterations)
        if store:
            states.append(state)
        if observer is not None:
            observer(state)
    return Trajectory(state, stats, states)


def write_snapshot(path, values, level: int, field_name: str, t: float):
    """Text snapshot: a three-line header then one value per line."""
    header = f"level {level}\nfield {field_name}\ntime {t:.17g}"
    np.savetxt(path, np.asarray(values, dtype=float), fmt="%.17e", header=header)


def read_snapshot(path):
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, val = line[1:].strip().partition(" ")
            meta[key] = val
    meta["level"] = int(meta["level"])
    meta["time"] = float(meta["time"])
    return meta, np.loadtxt(path, ndmin=1)
