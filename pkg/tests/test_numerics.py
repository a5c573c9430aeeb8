import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochafd.errors import NumericalFailure
from stochafd.numerics import (InnerProductMode, Grid, inner_product, jacobi_eig, norm, rel_error,
                               sym_eig, trapezoid_grid)

LEB = InnerProductMode.LEBESGUE
ARC = InnerProductMode.NORMALIZED_ARC


def test_trapezoid_small_grid():
    g = trapezoid_grid(3, 0, 2)
    assert g.nodes.tolist() == [0.0, 1.0, 2.0]
    assert g.weights.tolist() == [0.5, 1.0, 0.5]


@given(st.integers(2, 3000))
def test_trapezoid_weights_sum_and_symmetry(m):
    g = trapezoid_grid(m)
    assert abs(g.weights.sum() - 2 * math.pi) < 1e-11
    assert np.array_equal(g.weights, g.weights[::-1])


def test_trapezoid_spacing_128():
    g = trapezoid_grid(128)
    assert g.nodes[1] - g.nodes[0] == pytest.approx(2 * math.pi / 127)
    assert abs(g.nodes[1] - 0.0495) < 5e-4


@pytest.mark.parametrize("m,a,b", [(1, 0, 1), (0, 0, 1), (5, 1, 1), (5, 2, 1)])
def test_trapezoid_rejects_bad_input(m, a, b):
    with pytest.raises(ValueError):
        trapezoid_grid(m, a, b)


def test_grid_rejects_unsorted_nodes():
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 2.0, 1.0]), np.ones(3))


def test_inner_product_constants():
    g = trapezoid_grid(64)
    one = np.ones(g.size)
    assert inner_product(one, one, g, LEB) == pytest.approx(2 * math.pi)
    assert inner_product(one, one, g, ARC) == pytest.approx(1.0)


def test_inner_product_sin_cos_orthogonal():
    g = trapezoid_grid(1024)
    assert abs(inner_product(np.sin(g.nodes), np.cos(g.nodes), g)) < 1e-10


def test_inner_product_size_mismatch():
    g = trapezoid_grid(16)
    with pytest.raises(ValueError):
        inner_product(np.ones(16), np.ones(15), g)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_inner_product_conjugate_symmetric_and_positive(seed):
    rng = np.random.default_rng(seed)
    g = trapezoid_grid(33)
    f = rng.normal(size=33) + 1j * rng.normal(size=33)
    h = rng.normal(size=33) + 1j * rng.normal(size=33)
    assert inner_product(f, h, g) == pytest.approx(np.conj(inner_product(h, f, g)))
    ff = inner_product(f, f, g)
    assert abs(ff.imag) < 1e-12 and ff.real > 0
    assert ff.real == pytest.approx(norm(f, g) ** 2)
    assert inner_product(0 * f, 0 * f, g) == 0


def test_rel_error_examples():
    g = trapezoid_grid(20)
    f = np.sin(g.nodes) + 2.0
    assert rel_error(f, f, g) == 0.0
    assert rel_error(f, np.zeros_like(f), g) == pytest.approx(1.0)
    e = np.zeros(20)
    e[0] = 1.0
    assert rel_error(e, 0.9 * e, g) == pytest.approx(0.1)
    assert rel_error(e, 0.9 * e, g, squared=True) == pytest.approx(0.01)


def test_rel_error_zero_target_warns():
    g = trapezoid_grid(8)
    with pytest.warns(RuntimeWarning):
        assert rel_error(np.zeros(8), np.ones(8), g) == math.inf
    with pytest.warns(RuntimeWarning):
        assert rel_error(np.zeros(8), np.zeros(8), g) == 0.0


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_sym_eig_examples(method):
    lam, V = sym_eig(np.eye(3), method=method)
    assert np.allclose(lam, 1.0)
    lam, V = sym_eig(np.diag([1.0, 3.0]), method=method)
    assert np.allclose(lam, [3.0, 1.0])
    assert np.allclose(np.abs(V), [[0, 1], [1, 0]])
    lam, V = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]), method=method)
    assert np.allclose(lam, [3.0, 1.0])
    s = 1 / math.sqrt(2)
    assert np.allclose(np.abs(V[:, 0]), [s, s])
    assert V[0, 1] * V[1, 1] < 0 and np.allclose(np.abs(V[:, 1]), [s, s])


def test_sym_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_jacobi_reports_non_convergence():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(12, 12))
    with pytest.raises(NumericalFailure):
        jacobi_eig(A + A.T, tol=1e-15, max_sweeps=1)


def _random_hermitian(rng, n, complex_):
    A = rng.normal(size=(n, n))
    if complex_:
        A = A + 1j * rng.normal(size=(n, n))
    return 0.5 * (A + A.conj().T)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 40), st.booleans(), st.integers(0, 2**32 - 1))
def test_jacobi_reconstruction(n, complex_, seed):
    A = _random_hermitian(np.random.default_rng(seed), n, complex_)
    tol = 1e-12
    lam, V = sym_eig(A, tol=tol, method="jacobi")
    assert np.all(np.diff(lam) <= 1e-12)
    assert np.linalg.norm(A - (V * lam) @ V.conj().T) <= 10 * tol * np.linalg.norm(A) + 1e-14
    assert np.allclose(V.conj().T @ V, np.eye(n), atol=1e-10)


@pytest.mark.parametrize("n", [64, 256])
def test_lapack_reconstruction(n):
    A = _random_hermitian(np.random.default_rng(n), n, True)
    lam, V = sym_eig(A)
    assert np.linalg.norm(A - (V * lam) @ V.conj().T) <= 1e-11 * np.linalg.norm(A)


def test_jacobi_matches_lapack():
    A = _random_hermitian(np.random.default_rng(3), 31, False)
    l1, _ = sym_eig(A, method="jacobi")
    l2, _ = sym_eig(A)
    assert np.allclose(l1, l2, atol=1e-11)
