import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochafd.basis import OrthonormalSystem
from stochafd.kl import (apply_T, degree, energy_bound, hcj_norm, kl_basis, kl_decompose,
                         kl_optimality_check, kl_partial_sum, mercer_reconstruct, relative_frobenius,
                         spectral_apply, variance_identities)
from stochafd.numerics import InnerProductMode, norm, rel_error, trapezoid_grid
from stochafd.processes import bridge_covariance, kl_bridge_reference, simulate_bridges
from stochafd.stochastic import CovarianceKernel

LEB = InnerProductMode.LEBESGUE
G513 = trapezoid_grid(513)
C513 = bridge_covariance(G513)
B513 = kl_basis(C513, G513)


def _random_orthonormal(rng, grid, n):
    A = rng.normal(size=(grid.size, n))
    Q, _ = np.linalg.qr(np.sqrt(grid.weights)[:, None] * A)
    return (Q / np.sqrt(grid.weights)[:, None]).T


def test_apply_T_zero():
    assert np.all(apply_T(C513, np.zeros(G513.size), G513) == 0)


def test_apply_T_on_constant():
    s = G513.nodes
    assert np.max(np.abs(apply_T(C513, np.ones(G513.size), G513) - s * (2 * math.pi - s) / 2)) < 1e-4


def test_apply_T_eigenpairs():
    for k in range(10):
        lam, phi = B513.eigenvalues[k], B513.functions[k]
        assert np.max(np.abs(apply_T(C513, phi, G513) - lam * phi)) <= 1e-6 * B513.eigenvalues[0]


def test_apply_T_grid_mismatch():
    with pytest.raises(ValueError):
        apply_T(C513, np.ones(10), trapezoid_grid(10))


def test_basis_is_orthonormal_and_sorted():
    phi = B513.functions
    G = (G513.weights * phi) @ phi.T
    assert np.max(np.abs(G - np.eye(G513.size))) < 1e-8
    assert np.all(np.diff(B513.eigenvalues) <= 1e-15)


def test_rank_one_covariance():
    g = trapezoid_grid(65)
    f = np.sin(g.nodes) + 0.2
    b = kl_basis(CovarianceKernel(g, factor=f), g)
    assert b.rank == 1
    assert b.eigenvalues[0] == pytest.approx(norm(f, g) ** 2)
    assert np.allclose(b.functions[0], f / norm(f, g))


def test_bridge_eigenvalues_and_trace():
    g = trapezoid_grid(1025)
    b = kl_basis(bridge_covariance(g), g, count=10)
    for j in range(1, 11):
        assert b.eigenvalues[j - 1] == pytest.approx(kl_bridge_reference(j)[0], rel=5e-3)
    lam = B513.eigenvalues
    trace = float(np.diag(C513.matrix) @ G513.weights)
    assert lam.sum() == pytest.approx(trace, rel=1e-8)
    assert trace == pytest.approx(2 * math.pi ** 2 / 3, rel=1e-5)


def test_bridge_eigenfunctions_match_reference():
    for j in range(1, 6):
        phi = kl_bridge_reference(j)[1](G513.nodes)
        assert abs((G513.weights * phi) @ B513.functions[j - 1]) == pytest.approx(1.0, abs=1e-4)


def test_sign_convention_is_stable():
    b = kl_basis(C513, G513, count=5)
    for k in range(5):
        first = b.functions[k][np.argmax(np.abs(b.functions[k]) > 1e-8 * np.max(np.abs(b.functions[k])))]
        assert first > 0


def test_jacobi_and_lapack_bases_agree():
    g = trapezoid_grid(41)
    C = bridge_covariance(g)
    a = kl_basis(C, g, method="jacobi")
    b = kl_basis(C, g)
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)
    assert np.allclose(np.abs(a.functions[:5]), np.abs(b.functions[:5]), atol=1e-8)


def test_mercer_examples():
    R = B513.rank
    assert relative_frobenius(mercer_reconstruct(B513, R), C513.matrix) < 1e-8
    assert np.all(mercer_reconstruct(B513, 0) == 0)
    assert relative_frobenius(mercer_reconstruct(B513, 50), C513.matrix) < 0.05
    errs = [relative_frobenius(mercer_reconstruct(B513, n), C513.matrix) for n in (5, 10, 20, 40)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_partial_sum_examples():
    g = trapezoid_grid(126)
    C = bridge_covariance(g)
    b = kl_basis(C, g)
    path = simulate_bridges(g, 1, seed=4).paths[0]
    assert rel_error(path, kl_partial_sum(path, b, g.size), g) < 1e-10
    mu = 0.1 * np.sin(g.nodes)
    assert np.array_equal(kl_partial_sum(path, b, 0, mu), mu)
    errs = [rel_error(path, kl_partial_sum(path, b, n), g) for n in (25, 50, 100)]
    assert errs[0] > errs[1] > errs[2]


def test_kl_decompose_energy():
    g = trapezoid_grid(126)
    C = bridge_covariance(g)
    ens = simulate_bridges(g, 3, seed=1)
    d = kl_decompose(C, ens, 20)
    assert np.allclose(d.captured_energy, np.cumsum(d.eigenvalues))
    assert np.all(np.diff(d.residual_energy) <= 1e-12)
    assert d.method == "KL"


def test_optimality_gap_zero_for_eigenfunctions():
    n = 8
    assert abs(kl_optimality_check(C513, B513.system(n), B513, n)) < 1e-8


def test_optimality_gap_zero_for_rotated_eigenspace():
    rng = np.random.default_rng(0)
    n = 6
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    psi = Q @ B513.functions[:n]
    gap = kl_optimality_check(C513, OrthonormalSystem(psi, G513, LEB), B513, n)
    assert abs(gap) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 20))
def test_optimality_gap_nonnegative(seed, n):
    rng = np.random.default_rng(seed)
    psi = _random_orthonormal(rng, G513, n)
    gap = kl_optimality_check(C513, OrthonormalSystem(psi, G513, LEB), B513, n)
    assert gap >= -1e-8 * C513.trace()


def test_optimality_rejects_non_orthonormal():
    psi = np.vstack([np.ones(G513.size), np.ones(G513.size)])
    with pytest.raises(ValueError):
        kl_optimality_check(C513, OrthonormalSystem(psi, G513, LEB), B513, 2)


def test_optimality_accepts_normalised_arc_systems():
    from stochafd.dictionary import tm_system
    s = tm_system([0.1, 0.5j, -0.3], G513)
    assert kl_optimality_check(C513, s, B513, 3) >= 0


def test_hcj_examples():
    phi1 = B513.functions[0]
    val, div = hcj_norm(phi1, B513, 0)
    assert val == pytest.approx(1 / B513.eigenvalues[0], rel=1e-8)
    assert not div
    assert hcj_norm(np.zeros(G513.size), B513, 2) == (0.0, False)
    with pytest.raises(ValueError):
        hcj_norm(phi1, B513, -1)


def test_hcj_null_space_is_ignored():
    g = trapezoid_grid(65)
    f = np.sin(g.nodes)
    b = kl_basis(CovarianceKernel(g, factor=f), g)
    orth = np.cos(g.nodes) - (g.weights * np.cos(g.nodes)) @ b.functions[0] * b.functions[0]
    assert hcj_norm(orth, b, 0)[0] < 1e-20


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0, 1]))
def test_hcj_shift_identity(seed, j):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=12)
    F = c @ B513.functions[:12]
    TF = spectral_apply(F, B513)
    a = hcj_norm(TF, B513, j + 2)[0]
    b = hcj_norm(F, B513, j)[0]
    assert a == pytest.approx(b, rel=1e-8)


def test_imbedding_bound():
    rng = np.random.default_rng(2)
    F = rng.normal(size=30) @ B513.functions[:30]
    h0 = math.sqrt(hcj_norm(F, B513, 0)[0])
    h1 = math.sqrt(hcj_norm(F, B513, 1)[0])
    assert h0 <= B513.eigenvalues[0] * h1 * (1 + 1e-12) or h0 <= math.sqrt(B513.eigenvalues[0]) * h1


def test_degree_examples():
    assert degree(B513.functions[0], B513) == 6
    R = B513.rank
    lam = B513.eigenvalues[:R]
    rough = np.sqrt(lam) @ B513.functions[:R]
    smooth = lam @ B513.functions[:R]
    smoother = lam ** 2 @ B513.functions[:R]
    assert degree(rough, B513) == -1
    assert degree(smooth, B513) == 0
    assert degree(smoother, B513) == 2


def test_variance_identities():
    R = B513.rank
    resid, checks = variance_identities(C513, B513, R)
    assert np.max(np.abs(resid)) < 1e-8
    resid, checks = variance_identities(C513, B513, 0)
    assert np.allclose(resid, np.diag(C513.matrix))
    assert checks["trace"] == pytest.approx(checks["residual_energy"])
    for n in (20, 50):
        resid, checks = variance_identities(C513, B513, n)
        assert np.min(resid) >= -1e-8
        assert checks["residual_energy"] == pytest.approx(checks["eigenvalue_tail"], rel=1e-8)
        assert checks["eigenvalue_tail"] == pytest.approx(4 / n, rel=0.05)


def test_energy_bound_is_partial_eigenvalue_sum():
    assert energy_bound(B513, 5) == pytest.approx(np.sum(B513.eigenvalues[:5]))
