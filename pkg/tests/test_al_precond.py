import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from rkal.al_precond import (
    ALPreconditioner,
    AugmentationParams,
    AugmentedSystem,
    BlockGaussSeidel,
    DiagSolve,
    GSConfig,
    SchurApprox,
    WMode,
    apply_gauss_seidel_11,
    apply_preconditioner,
    apply_schur_inverse,
    build_augmented,
    dump_spectrum_csv,
    ideal_preconditioner,
    preconditioned_spectrum,
    verify_smw_identity,
)
from rkal.errors import DimensionMismatch, FullMpTooLarge, SingularInner
from rkal.krylov import KrylovConfig, fgmres
from rkal.linalg import LUFactors, PressurePoisson
from rkal.verify import factorization_error, kron_collapse_error, smw_error, stokes_instance, toy_smw_error

NU = 1.0 / 50.0  # viscosity of the instances built by stokes_instance


@pytest.fixture(scope="module")
def inst22():
    return stokes_instance(2, 2, 1.0)


def dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def test_gamma_zero_is_identity(inst22):
    S0 = stokes_instance(2, 2, 0.0).system
    for i in range(2):
        for j in range(2):
            assert abs(S0.Phi_gamma[i][j] - S0.Phi[i][j]).max() == 0.0
    assert np.array_equal(S0.b_u_hat, S0.b_u)


def test_augmented_block_formula():
    S = stokes_instance(2, 1, 3.0).system
    Wi = S.W_inv_stacked()
    expected = dense(S.phi_matrix(False)) + 3.0 * S.Psi1.todense() @ Wi @ S.Psi2.todense()
    assert np.abs(dense(S.phi_matrix(True)) - expected).max() < 1e-12 * np.abs(expected).max()
    # rhs: b_u + gamma Psi1 Wc^{-1} b_p
    np.testing.assert_allclose(S.b_u_hat, S.b_u + 3.0 * S.Psi1.todense() @ Wi @ S.b_p, rtol=1e-12, atol=1e-12)


def test_solution_equivalence(inst22):
    S = inst22.system
    x_aug = np.linalg.solve(dense(S.matrix(True)), S.rhs(True))
    x_org = np.linalg.solve(dense(S.matrix(False)), S.rhs(False))
    assert np.abs(x_aug - x_org).max() < 1e-10 * np.abs(x_org).max()
    assert np.linalg.norm(S.apply_original(x_aug) - S.rhs(False)) < 1e-10 * np.linalg.norm(S.rhs(False))


def test_apply_matches_matrix(inst22, rng):
    S = inst22.system
    x = rng.standard_normal(S.size)
    for aug in (True, False):
        np.testing.assert_allclose(S.apply(x, aug), S.matrix(aug) @ x, rtol=1e-12, atol=1e-12)
    with pytest.raises(DimensionMismatch):
        S.apply(np.ones(3))


def test_full_mp_mode():
    inst = stokes_instance(2, 2, 1.0)
    S = inst.system
    M_p = inst.disc.ops.M_p[1:, 1:]
    F = AugmentedSystem(S.Phi, S.B, S.A, S.dt, M_p, AugmentationParams(1.0, WMode.FullMp), S.b_u, S.b_p)
    G = dense(S.B).T @ np.linalg.solve(M_p.toarray(), dense(S.B))
    assert np.abs(dense(F.G) - G).max() < 1e-10 * np.abs(G).max()
    err = verify_smw_identity(F.phi_matrix(False), F.Psi1.todense(), F.Psi2.todense(), F.W_inv_stacked(), 1.0)
    assert err < 1e-9
    with pytest.raises(FullMpTooLarge):
        AugmentedSystem(S.Phi, S.B, S.A, S.dt, M_p, AugmentationParams(1.0, WMode.FullMp, full_mp_limit=10))


def test_params_validation():
    with pytest.raises(ValueError):
        AugmentationParams(-1.0)
    with pytest.raises(ValueError):
        GSConfig(sweeps=0)
    assert WMode.parse("full") is WMode.FullMp and DiagSolve.parse("inexact") is DiagSolve.InexactILUGmres


# -- Gauss-Seidel ------------------------------------------------------------


def test_gs_single_stage_exact(rng):
    S = stokes_instance(2, 1, 1.0).system
    r = rng.standard_normal(S.size_u)
    z = apply_gauss_seidel_11(S, GSConfig(), r)
    np.testing.assert_allclose(dense(S.Phi_gamma[0][0]) @ z, r, atol=1e-12 * np.abs(r).max())


def test_gs_dense_oracle(inst22, rng):
    S = inst22.system
    r = rng.standard_normal(S.size_u)
    P = dense(S.phi_matrix(True))
    n = S.n_u
    DL = P.copy()
    DL[:n, n:] = 0.0  # drop the strictly upper block
    z = BlockGaussSeidel(S, GSConfig()).apply(r)
    np.testing.assert_allclose(z, np.linalg.solve(DL, r), rtol=1e-10, atol=1e-12 * np.abs(z).max())


def test_gs_exact_on_block_lower(inst22, rng):
    S = inst22.system
    grid = [[S.Phi[0][0], S.Phi[0][1] * 0.0], [S.Phi[1][0], S.Phi[1][1]]]
    L = AugmentedSystem(grid, S.B, S.A, S.dt, inst22.disc.ops.M_p[1:, 1:],
                        AugmentationParams(0.0))
    r = rng.standard_normal(S.size_u)
    z = BlockGaussSeidel(L, GSConfig()).apply(r)
    np.testing.assert_allclose(L.apply_phi(z), r, atol=1e-12 * np.abs(r).max())


def test_gs_inexact_close(inst22, rng):
    S = inst22.system
    r = rng.standard_normal(S.size_u)
    exact = BlockGaussSeidel(S, GSConfig()).apply(r)
    inexact = BlockGaussSeidel(S, GSConfig(mode=DiagSolve.InexactILUGmres)).apply(r)
    assert np.linalg.norm(inexact - exact) < 1e-3 * np.linalg.norm(exact)


# -- Schur approximation -----------------------------------------------------


def schur_dense(S, gamma, K, M, dt, A):
    s = A.shape[0]
    Ai = np.linalg.inv(A)
    I = np.eye(K.shape[0])
    Winv = np.diag(1.0 / M.diagonal())
    inner = np.kron(np.eye(s), np.linalg.inv(K)) + NU * dt * np.kron(A, np.linalg.inv(M))
    return gamma / dt * np.kron(Ai, Winv) + np.kron(Ai, I) @ inner @ np.kron(Ai, I) / dt**2


def test_schur_exact_matches_formula(inst22, rng):
    S = inst22.system
    ops = inst22.disc.ops
    mesh = inst22.disc.mesh
    from rkal.al_precond import WeightInverse

    w_inv = WeightInverse(ops.M_p, WMode.DiagMp)
    sa = SchurApprox.build(S.A, S.dt, 1.0, NU, ops.M_p, ops.K_p, mesh.nx, mesh.ny, w_inv, exact=True)
    Kpin = PressurePoisson(ops.K_p, mesh.nx, mesh.ny).pinned_operator().toarray()
    ref = schur_dense(S, 1.0, Kpin, ops.M_p.toarray(), S.dt, S.A)
    r = rng.standard_normal(2 * ops.M_p.shape[0])
    z = apply_schur_inverse(sa, r)
    np.testing.assert_allclose(z, ref @ r, rtol=1e-11, atol=1e-11 * np.abs(z).max())
    assert not sa.apply(np.zeros_like(r)).any()


@pytest.mark.parametrize("gamma,limit", [(1.0, 0.9), (100.0, 0.25)])
def test_schur_quality_baseline(gamma, limit):
    inst = stokes_instance(2, 1, gamma)
    S = inst.system
    ops = inst.disc.ops
    sa = SchurApprox(S.A, S.dt, gamma, NU, S.Winv, LUFactors(ops.K_p[1:, 1:]).solve, LUFactors(ops.M_p[1:, 1:]).solve)
    Sg = S.Psi2.todense() @ np.linalg.solve(dense(S.phi_matrix(True)), S.Psi1.todense())
    E = np.column_stack([sa.apply(e) for e in np.eye(S.size_p)]) @ Sg
    assert np.linalg.norm(E - np.eye(S.size_p), 2) < limit
    ev = np.linalg.eigvals(E)
    assert ev.real.min() > 0.4 and np.abs(ev).max() < 1.0 + 1e-10


# -- preconditioner ----------------------------------------------------------


@pytest.mark.parametrize("variant", ["upper", "lower"])
def test_ideal_two_iterations(inst22, variant):
    S = inst22.system
    P = ideal_preconditioner(S, variant)
    res = fgmres(S.apply, P.apply, S.rhs(), cfg=KrylovConfig(rel_tol=1e-10, abs_tol=1e-300, max_iters=10))
    assert res.iterations <= 2
    assert res.residuals[-1] <= 1e-10 * res.residuals[0]


def test_gamma_zero_classical_schur(rng):
    S = stokes_instance(2, 1, 0.0).system
    Phi = dense(S.phi_matrix(False))
    B1, B2 = S.Psi1.todense(), S.Psi2.todense()
    Sd = B2 @ np.linalg.solve(Phi, B1)
    P = ideal_preconditioner(S)
    r = rng.standard_normal(S.size)
    ru, rp = r[: S.size_u], r[S.size_u :]
    zp = -np.linalg.solve(Sd, rp)
    zu = np.linalg.solve(Phi, ru - B1 @ zp)
    np.testing.assert_allclose(P.apply(r), np.concatenate([zu, zp]), rtol=1e-9, atol=1e-10 * np.abs(zu).max())
    # the upper factor [[Phi, Psi1], [0, -S]] inverts exactly
    upper = np.block([[Phi, B1], [np.zeros_like(B2), -Sd]])
    np.testing.assert_allclose(upper @ P.apply(r), r, atol=1e-9 * np.abs(r).max())


def test_preconditioner_linear(inst22, rng):
    S = inst22.system
    ops, mesh = inst22.disc.ops, inst22.disc.mesh
    sa = SchurApprox(S.A, S.dt, 1.0, NU, S.Winv, LUFactors(ops.K_p[1:, 1:]).solve, LUFactors(ops.M_p[1:, 1:]).solve)
    r = rng.standard_normal(S.size)
    z = apply_preconditioner(S, GSConfig(), sa, r)
    np.testing.assert_allclose(apply_preconditioner(S, GSConfig(), sa, -2.5 * r), -2.5 * z, rtol=1e-12, atol=1e-14)
    with pytest.raises(ValueError):
        ALPreconditioner(S, None, None, "diagonal")


def test_spectrum_dump(inst22, tmp_path):
    S = stokes_instance(2, 1, 1.0).system
    ev = preconditioned_spectrum(S, ideal_preconditioner(S).apply)
    # A P^{-1} = [[I, 0], [Psi2 Phi^-1, I]]: every eigenvalue is one
    assert np.abs(ev - 1.0).max() < 1e-6
    path = tmp_path / "ev.csv"
    dump_spectrum_csv(path, ev)
    lines = path.read_text().splitlines()
    assert lines[0] == "real,imag" and len(lines) == S.size + 1


# -- dense identities --------------------------------------------------------


def test_smw():
    assert toy_smw_error() < 1e-10
    for s in (1, 2):
        assert smw_error(2, s) < 1e-9
    S = stokes_instance(2, 2, 1.0).system
    Phi = dense(S.phi_matrix(False))
    assert verify_smw_identity(Phi, S.Psi1.todense(), S.Psi2.todense(), S.W_inv_stacked(), 0.0) < 1e-10


def test_smw_singular_reported():
    S = stokes_instance(2, 1, 1.0, pin=False).system
    with pytest.raises(SingularInner):
        verify_smw_identity(dense(S.phi_matrix(False)), S.Psi1.todense(), S.Psi2.todense(), S.W_inv_stacked(), 1.0)
    with pytest.raises(SingularInner):
        ideal_preconditioner(S)


@pytest.mark.parametrize("s", [1, 2, 3])
def test_kron_collapse_and_factorization(s):
    assert kron_collapse_error(2, s) < 1e-12
    assert factorization_error(2, s) < 1e-11


@settings(max_examples=15, deadline=None)
@given(gamma=st.floats(0.0, 1e3), seed=st.integers(0, 2**16))
def test_augmented_rhs_linear(gamma, seed):
    S = stokes_instance(2, 1, 1.0).system
    r = np.random.default_rng(seed)
    T = build_augmented(S.Phi, S.B, S.A, S.dt, stokes_instance(2, 1).disc.ops.M_p[1:, 1:], AugmentationParams(gamma))
    bu, bp = r.standard_normal(S.size_u), r.standard_normal(S.size_p)
    lhs = T.augment_rhs(2 * bu, 2 * bp)
    assert np.abs(lhs - 2 * T.augment_rhs(bu, bp)).max() <= 1e-12 * (1 + np.abs(lhs).max())
