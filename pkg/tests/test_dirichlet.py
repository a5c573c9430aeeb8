import math

import numpy as np
import pytest

from stochafd.basis import Decomposition
from stochafd.core import poafd_decompose, system_from_params
from stochafd.dirichlet import dirichlet_lift, poisson_integral, polar_laplacian, raw_coefficients
from stochafd.numerics import rel_error, trapezoid_grid
from stochafd.search import SearchConfig

GRID = trapezoid_grid(1025)
CFG = SearchConfig(radial_points=16, angular_points=64)
F = np.exp(np.cos(GRID.nodes)) + 0.3 * np.sin(2 * GRID.nodes)
DEC = poafd_decompose(F, 6, CFG, GRID, family="poisson")


def _single(x, coeff=1.0):
    s = system_from_params([x], "poisson", GRID)
    a = np.array([coeff * s.triangular[0, 0]])
    return Decomposition("POAFD", "poisson", s, a)


def test_single_kernel_at_origin():
    u = dirichlet_lift(_single(0.0), [(0.0, 0.0), (0.5, 1.0)])
    assert np.allclose(u, 1 / (2 * math.pi))


def test_single_kernel_matches_closed_form():
    x = 0.4 * np.exp(0.7j)
    pts = np.array([(0.2, 0.1), (0.6, 2.0), (0.95, 0.7)])
    y = pts[:, 0] * np.exp(1j * pts[:, 1])
    ref = np.real((1 + np.conj(x) * y) / (1 - np.conj(x) * y)) / (2 * math.pi)
    assert np.allclose(dirichlet_lift(_single(x), pts), ref, rtol=1e-10)


def test_raw_coefficients_solve_triangular_relation():
    c = raw_coefficients(DEC)
    U = DEC.system.triangular
    assert np.allclose(U @ c, DEC.coefficients[0])
    raw = sum(ck * k for ck, k in zip(c, _raw_kernels(DEC)))
    assert np.allclose(DEC.mean + raw, DEC.reconstruct(path=0), atol=1e-10)


def _raw_kernels(dec):
    from stochafd.dictionary import kernel_eval
    return [kernel_eval(d, dec.grid) for d in dec.params]


def test_lift_equals_poisson_integral_of_boundary_sum():
    pts = np.array([(0.0, 0.0), (0.3, 1.0), (0.6, 4.0), (0.8, 5.5)])
    y = pts[:, 0] * np.exp(1j * pts[:, 1])
    ref = poisson_integral(DEC.reconstruct(path=0), GRID, y)
    assert np.allclose(dirichlet_lift(DEC, pts), ref.real, atol=1e-9)


def test_lift_approaches_boundary_values():
    theta = GRID.nodes[:-1:8]
    fn = DEC.reconstruct(path=0)[:-1:8]
    errs = []
    for r in (0.9, 0.99):
        u = dirichlet_lift(DEC, np.column_stack([np.full(theta.size, r), theta]))
        errs.append(np.max(np.abs(u - fn)))
    assert errs[1] < errs[0]


def test_lift_is_harmonic():
    def u(pts):
        return dirichlet_lift(DEC, pts)

    res = [abs(polar_laplacian(u, 0.5, 1.3, h)) for h in (1e-2, 5e-3)]
    assert res[0] < 1e-2
    # second-order stencil: halving h quarters the residual
    assert res[1] < res[0] / 3 or res[1] < 1e-6


def test_partial_lift_uses_first_terms():
    pts = [(0.4, 0.2)]
    assert np.allclose(dirichlet_lift(DEC, pts, n=3), dirichlet_lift(DEC.truncated(3), pts))
    assert not np.allclose(dirichlet_lift(DEC, pts, n=3), dirichlet_lift(DEC, pts))


def test_rejections():
    szego = poafd_decompose(np.exp(1j * GRID.nodes), 2, CFG, GRID)
    with pytest.raises(ValueError):
        dirichlet_lift(szego, [(0.5, 0.0)])
    with pytest.raises(ValueError):
        dirichlet_lift(DEC, [(1.0, 0.0)])
    with pytest.raises(ValueError):
        dirichlet_lift(DEC, [(0.5, 0.0, 1.0)])
    with pytest.raises(ValueError):
        polar_laplacian(lambda p: np.zeros(len(p)), 0.995, 0.0, 0.01)


def test_boundary_reconstruction_is_accurate():
    assert rel_error(F, DEC.reconstruct(path=0), GRID) < 0.05
