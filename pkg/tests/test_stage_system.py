import numpy as np
import pytest

from rkal.errors import DimensionMismatch, NewtonDiverged, NotSolenoidal
from rkal.fem import assemble_convection, assemble_load
from rkal.problems import ProblemSpec, cavity, manufactured, steps_for_level
from rkal.stage_system import (
    Discretization,
    LinearSolverConfig,
    NewtonConfig,
    StageAuxiliary,
    StageSolver,
    StageVector,
    TimeState,
    assemble_newton_system,
    consistent_pressure,
    initial_state,
    newton_solve,
    read_snapshot,
    rk_update,
    stage_boundary_rates,
    time_loop,
    write_snapshot,
)
from rkal.tableau import Family, make_tableau
from rkal.verify import newton_fd_slope

RADAU2 = make_tableau(Family.RADAU_IIA, 2)


@pytest.fixture(scope="module")
def acc3():
    prob = manufactured(n_t=steps_for_level(2.0, 3, 3))
    disc = Discretization(prob, 3)
    state, _ = initial_state(disc, prob)
    return prob, disc, state


def start_iterate(disc, prob, state, tab):
    Y = StageVector.zeros(tab.s, disc.n_u, disc.n_p)
    Y.Yu[:, disc.fixed] = stage_boundary_rates(disc, prob, state, tab, prob.dt)[:, disc.fixed]
    return Y


def quiet(nu=0.1, n_t=2, convection=True):
    """No forcing, no boundary motion, zero initial data."""
    return ProblemSpec(name="quiet", nu=nu, T=1.0, n_t=n_t, convection=convection)


def test_dof_count():
    disc = Discretization(manufactured(), 3)
    assert disc.dof_count(2) == 1062
    assert Discretization(manufactured(), 2).dof_count(2) == 246


def test_auxiliary_consistency(acc3, rng):
    prob, disc, state = acc3
    Y = StageVector(rng.standard_normal((2, disc.n_u)), rng.standard_normal((2, disc.n_p)))
    aux = StageAuxiliary.from_stages(state, Y, RADAU2.A, prob.dt)
    for i in range(2):
        wu = state.u + prob.dt * sum(RADAU2.A[i, j] * Y.Yu[j] for j in range(2))
        assert np.abs(aux.wu[i] - wu).max() < 1e-14 * (1 + np.abs(wu).max())


def test_zero_problem_zero_residual():
    prob = quiet()
    disc = Discretization(prob, 2)
    state = TimeState(np.zeros(disc.n_u), np.zeros(disc.n_p), 0.0)
    nsys = assemble_newton_system(disc, prob, state, StageVector.zeros(2, disc.n_u, disc.n_p), RADAU2)
    assert nsys.residual_norm == 0.0
    res = newton_solve(disc, prob, state, RADAU2)
    assert res.iterations == 0 and not res.Y.Yu.any()
    with pytest.raises(DimensionMismatch):
        assemble_newton_system(disc, prob, state, StageVector.zeros(3, disc.n_u, disc.n_p), RADAU2)


def test_backward_euler_oracle(rng):
    # s = 1 Radau IIA against a directly coded backward-Euler step in rate form
    prob = manufactured(n_t=5)
    disc = Discretization(prob, 2)
    tab = make_tableau(Family.RADAU_IIA, 1)
    state, _ = initial_state(disc, prob)
    Y = start_iterate(disc, prob, state, tab)
    Y.Yu[0, disc.free] = rng.standard_normal(disc.n_free)
    Y.Yp[0] = rng.standard_normal(disc.n_p)
    nsys = assemble_newton_system(disc, prob, state, Y, tab)

    ops, dt, f = disc.ops, prob.dt, disc.free
    u1 = state.u + dt * Y.Yu[0]
    p1 = state.p + dt * Y.Yp[0]
    load = assemble_load(disc.spaces, prob.forcing, state.t + dt)
    N = assemble_convection(disc.spaces, u1)
    R_u = (ops.M_u @ ((u1 - state.u) / dt) + prob.nu * ops.K_u @ u1 + N @ u1 + ops.B.T @ p1 - load)[f]
    np.testing.assert_allclose(nsys.R_u[0], R_u, atol=1e-12)
    np.testing.assert_allclose(nsys.R_p[0], ops.B @ u1, atol=1e-12)

    J = (ops.M_u + dt * ops.L_u(u1, prob.nu))[f][:, f]
    top = np.hstack([J.toarray(), dt * ops.B[:, f].T.toarray()])
    bottom = np.hstack([dt * ops.B[:, f].toarray(), np.zeros((disc.n_p, disc.n_p))])
    assert np.abs(nsys.matrix().toarray() - np.vstack([top, bottom])).max() < 1e-13


def test_newton_jacobian_fd(rng):
    prob = manufactured(n_t=4)
    disc = Discretization(prob, 2)
    state, _ = initial_state(disc, prob)
    for tab in (RADAU2, make_tableau(Family.GAUSS, 2)):
        assert newton_fd_slope(disc, prob, state, tab, rng) >= 0.9


def test_constraint_rows_after_solve(acc3):
    prob, disc, state = acc3
    stokes = manufactured(n_t=prob.n_t, convection=False)
    res = newton_solve(disc, stokes, state, RADAU2, NewtonConfig(rel_tol=1e-12, abs_tol=1e-13),
                       StageSolver(disc, stokes, LinearSolverConfig(method="direct")))
    aux = StageAuxiliary.from_stages(state, res.Y, RADAU2.A, stokes.dt)
    for i in range(2):
        assert np.linalg.norm(disc.ops.B @ aux.wu[i]) < 1e-10


def test_stokes_one_newton_iteration(acc3):
    prob, disc, state = acc3
    stokes = manufactured(n_t=prob.n_t, convection=False)
    for method in ("fgmres", "direct"):
        res = newton_solve(disc, stokes, state, RADAU2, solver=StageSolver(disc, stokes, LinearSolverConfig(method=method)))
        assert res.iterations == 1


def test_newton_superlinear(acc3):
    prob, disc, state = acc3
    solver = StageSolver(disc, prob, LinearSolverConfig(method="direct"))
    res = newton_solve(disc, prob, state, RADAU2, NewtonConfig(rel_tol=1e-14, abs_tol=1e-14, max_iters=10), solver)
    r = np.array(res.residuals)
    r = r[r > 1e-13 * r[0]]  # above the rounding floor
    assert len(r) >= 4
    order = np.log(r[-1] / r[-2]) / np.log(r[-2] / r[-3])
    assert order >= 1.5


@pytest.mark.parametrize("gamma", [1.0, 10.0])
def test_augmented_solution_solves_original(acc3, gamma):
    prob, disc, state = acc3
    cfg = LinearSolverConfig(gamma=gamma)
    solver = StageSolver(disc, prob, cfg)
    nsys = assemble_newton_system(disc, prob, state, start_iterate(disc, prob, state, RADAU2), RADAU2)
    x, info = solver.solve(nsys)
    assert info.converged
    sys_ = solver.augmented(nsys)
    r_aug = sys_.rhs(True) - sys_.apply(x, True)
    r_org = sys_.rhs(False) - sys_.apply(x, False)
    # the augmented residual maps back to the original one through the same transformation
    n = sys_.size_u
    back = r_aug.copy()
    back[:n] = r_aug[:n] - (sys_.augment_rhs(np.zeros(n), r_aug[n:]))
    np.testing.assert_allclose(back, r_org, atol=1e-12 * np.linalg.norm(r_org) + 1e-14)
    # gamma Psi1 Wc^{-1} amplifies the pressure part of the residual
    if gamma == 1.0:
        assert np.linalg.norm(r_org) <= 10 * cfg.krylov.rel_tol * np.linalg.norm(sys_.rhs(False))


def test_newton_diverged():
    prob = manufactured(n_t=4)
    disc = Discretization(prob, 2)
    with pytest.raises(NewtonDiverged) as info:
        time_loop(disc, prob, RADAU2, NewtonConfig(rel_tol=1e-15, abs_tol=1e-300, max_iters=1),
                  LinearSolverConfig(method="direct"))
    assert info.value.step == 0


def test_rk_update(acc3, rng):
    prob, disc, state = acc3
    zero = rk_update(state, StageVector.zeros(2, disc.n_u, disc.n_p), RADAU2, 0.1)
    assert np.array_equal(zero.u, state.u) and np.array_equal(zero.p, state.p)
    assert zero.t == state.t + 0.1 and zero.n == state.n + 1
    Y = StageVector(rng.standard_normal((2, disc.n_u)), rng.standard_normal((2, disc.n_p)))
    new = rk_update(state, Y, RADAU2, prob.dt)
    aux = StageAuxiliary.from_stages(state, Y, RADAU2.A, prob.dt)
    assert np.abs(new.u - aux.wu[-1]).max() < 1e-12
    be = make_tableau(Family.RADAU_IIA, 1)
    Y1 = StageVector(Y.Yu[:1], Y.Yp[:1])
    np.testing.assert_allclose(rk_update(state, Y1, be, 0.3).u, state.u + 0.3 * Y1.Yu[0], rtol=0, atol=1e-15)


def test_consistent_pressure():
    prob = manufactured()
    disc = Discretization(prob, 2)
    p, resid = consistent_pressure(disc, np.zeros(disc.n_u), prob.nu)
    assert not p.any() and resid == 0.0
    with pytest.raises(NotSolenoidal):
        consistent_pressure(disc, np.ones(disc.n_u) * np.arange(disc.n_u), prob.nu)


def test_consistent_pressure_manufactured():
    prob = manufactured()
    disc = Discretization(prob, 4)
    state, resid = initial_state(disc, prob)
    Mp = disc.ops.M_p
    assert np.sqrt(state.p @ Mp @ state.p) < 1e-6  # zero mean and constant
    assert resid < 1e-10
    # without the closed-form source: discrete second derivatives of u0 leave an O(h^2) pressure
    p, resid = consistent_pressure(disc, state.u, prob.nu, prob.forcing, 0.0)
    assert resid < 1e-10
    assert np.sqrt(p @ Mp @ p) < 1e-3


def test_time_loop_zero_steps():
    prob = manufactured(n_t=0)
    disc = Discretization(prob, 2)
    traj = time_loop(disc, prob, RADAU2, store=True)
    assert traj.stats.steps == 0 and traj.stats.linear_iterations == []
    assert len(traj.states) == 1 and traj.final.t == 0.0
    assert np.isnan(traj.stats.avg_linear_iterations)


def test_time_loop_cavity_solenoidal():
    prob = cavity(nu=0.01, n_t=4)
    disc = Discretization(prob, 2)
    seen = []
    traj = time_loop(disc, prob, RADAU2, observer=lambda s: seen.append(np.linalg.norm(disc.ops.B @ s.u)))
    assert len(seen) == 5 and max(seen) < 1e-8
    assert traj.stats.max_divergence < 1e-6
    assert traj.stats.unconverged_solves == 0
    assert traj.final.t == pytest.approx(2.0)
    d = traj.stats.as_dict()
    assert set(d) >= {"avg_its", "avg_nit", "cpu_per_it", "cpu_per_step"}
    # the lid moves: the final velocity is nonzero
    assert np.abs(traj.final.u).max() == pytest.approx(1.0)


def test_boundary_rates():
    prob = cavity(n_t=4)
    disc = Discretization(prob, 2)
    tab = RADAU2
    sp_ = disc.spaces
    lid = np.flatnonzero(np.isclose(sp_.vnode_y, 1.0) & (np.abs(sp_.vnode_x) < 1.0))
    early = stage_boundary_rates(disc, prob, TimeState(np.zeros(disc.n_u), np.zeros(disc.n_p), 0.5), tab, 0.5)
    late = stage_boundary_rates(disc, prob, TimeState(np.zeros(disc.n_u), np.zeros(disc.n_p), 1.0), tab, 0.5)
    assert np.all(early[:, lid] == 1.0) and np.all(early[:, lid + sp_.n_vnodes] == 0.0)
    assert not late.any()
    # interior entries are never touched
    assert not early[:, disc.free].any()
    const = ProblemSpec("c", 0.1, 1.0, 2, boundary_rate=lambda x, y, t, tm: (0 * x, 0 * y))
    rates = stage_boundary_rates(Discretization(const, 2), const, TimeState(np.zeros(disc.n_u), None, 0.0), tab, 0.5)
    assert not rates.any()


def test_snapshot_roundtrip(tmp_path, rng):
    v = rng.standard_normal(17)
    path = tmp_path / "u.txt"
    write_snapshot(path, v, 3, "velocity", 0.125)
    meta, w = read_snapshot(path)
    assert meta == {"level": 3, "field": "velocity", "time": 0.125}
    assert np.array_equal(v, w)


def test_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(rel_tol=0)
    with pytest.raises(ValueError):
        LinearSolverConfig(method="cg")
