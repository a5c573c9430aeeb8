import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochafd.kl import apply_T
from stochafd.numerics import norm, trapezoid_grid
from stochafd.processes import (BridgeSpec, bridge_covariance, bridge_grid, brownian_bridge_cov,
                                kl_bridge_reference, simulate_bridge, simulate_bridges)
from stochafd.stochastic import covariance_from_ensemble

T = 2 * math.pi


def test_covariance_examples():
    assert brownian_bridge_cov(math.pi, math.pi) == pytest.approx(math.pi / 2)
    assert brownian_bridge_cov(0.0, 1.0) == 0.0
    assert brownian_bridge_cov(T, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert brownian_bridge_cov(1.0, 2.0) == pytest.approx(1.0 - 2.0 / T)


@pytest.mark.parametrize("s,t", [(-0.1, 1.0), (1.0, T + 0.1), (7.0, 7.0)])
def test_covariance_rejects_out_of_range(s, t):
    with pytest.raises(ValueError):
        brownian_bridge_cov(s, t)


@settings(max_examples=40)
@given(st.floats(0, T), st.floats(0, T))
def test_covariance_symmetry_and_reversal(s, t):
    c = brownian_bridge_cov(s, t)
    assert c == pytest.approx(brownian_bridge_cov(t, s))
    assert c == pytest.approx(brownian_bridge_cov(T - s, T - t), abs=1e-12)
    assert c >= -1e-15


def test_closed_form_matrix_is_psd():
    g = bridge_grid(129)
    C = bridge_covariance(g).matrix
    assert np.allclose(C, C.T)
    assert np.min(np.linalg.eigvalsh(C)) > -1e-12


def test_paths_are_pinned():
    g = bridge_grid(257)
    e = simulate_bridges(g, 50, seed=3)
    assert np.all(e.paths[:, 0] == 0.0) and np.all(e.paths[:, -1] == 0.0)
    assert np.all(e.mean == 0)
    b = simulate_bridge(BridgeSpec(g, seed=3))
    assert b[0] == 0.0 and b[-1] == 0.0
    assert np.array_equal(b, e.paths[0])


def test_simulation_is_seeded():
    g = bridge_grid(65)
    assert np.array_equal(simulate_bridges(g, 5, seed=8).paths, simulate_bridges(g, 5, seed=8).paths)
    assert not np.array_equal(simulate_bridges(g, 5, seed=8).paths, simulate_bridges(g, 5, seed=9).paths)


def test_midpoint_variance():
    g = bridge_grid(65)
    p = 100_000
    x = simulate_bridges(g, p, seed=11).paths[:, 32]
    assert g.nodes[32] == pytest.approx(math.pi)
    # Var of the sample variance of N(0, s2) is 2 s2^2 / p
    assert abs(np.var(x, ddof=1) - math.pi / 2) < 3 * math.sqrt(2 * (math.pi / 2) ** 2 / p)


def test_empirical_covariance_matches_closed_form():
    g = bridge_grid(64)
    p = 10_000
    e = simulate_bridges(g, p, seed=5)
    emp = covariance_from_ensemble(e).matrix
    ref = bridge_covariance(g).matrix
    # standard error of a Gaussian product moment: sqrt((C_ss C_tt + C_st^2) / p)
    d = np.diag(ref)
    se = np.sqrt((np.outer(d, d) + ref ** 2) / p)
    mask = se > 1e-8
    assert np.max(np.abs(emp - ref)[mask] / se[mask]) < 5
    assert np.max(np.abs(emp[~mask])) < 1e-12


def test_time_reversal_moments():
    g = bridge_grid(65)
    p = 20_000
    x = simulate_bridges(g, p, seed=21).paths
    v = np.var(x, axis=0, ddof=1)
    ref = np.diag(bridge_covariance(g).matrix)
    se = np.sqrt(2 * ref ** 2 / p)
    inner = slice(1, -1)
    diff = np.abs(v - v[::-1])[inner]
    assert np.max(diff / (math.sqrt(2) * se[inner])) < 5


def test_reference_eigenpairs():
    lam1, _ = kl_bridge_reference(1)
    lam2, _ = kl_bridge_reference(2)
    assert lam1 == pytest.approx(4.0)
    assert lam2 == pytest.approx(1.0)
    g = trapezoid_grid(2049, 0, T)
    for j in (1, 2, 7):
        assert norm(kl_bridge_reference(j)[1](g.nodes), g) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        kl_bridge_reference(0)


def test_reference_solves_eigen_equation():
    g = bridge_grid(1025)
    C = bridge_covariance(g)
    for j in range(1, 11):
        lam, phi = kl_bridge_reference(j)
        f = phi(g.nodes)
        assert np.max(np.abs(apply_T(C, f, g) - lam * f)) < 1e-3 * 4.0


def test_bridge_spec_rejects_wrong_span():
    with pytest.raises(ValueError):
        BridgeSpec(trapezoid_grid(33, 0, 1.0))
    with pytest.raises(ValueError):
        simulate_bridges(bridge_grid(33), 0)
