"""Brownian bridge on [0, 2pi]: simulation, closed-form covariance and KL reference."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import TWO_PI, Grid, trapezoid_grid
from .stochastic import CovarianceKernel, SamplePathEnsemble

HORIZON = TWO_PI


def brownian_bridge_cov(s, t, horizon: float = HORIZON):
    """``min(s, t) - s t / T``; arrays broadcast."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    eps = 1e-12 * horizon
    if np.any((s < -eps) | (s > horizon + eps) | (t < -eps) | (t > horizon + eps)):
        raise ValueError(f"bridge times must lie in [0, {horizon}]")
    out = np.minimum(s, t) - s * t / horizon
    return float(out) if out.ndim == 0 else out


def bridge_covariance(grid: Grid, horizon: float = HORIZON) -> CovarianceKernel:
    return CovarianceKernel.from_function(lambda s, t: brownian_bridge_cov(s, t, horizon), grid,
                                          descriptor=f"brownian_bridge(T={horizon!r})")


@dataclass(frozen=True)
class BridgeSpec:
    grid: Grid
    seed: int = 0
    horizon: float = HORIZON

    def __post_init__(self):
        a, b = self.grid.span
        if abs(a) > 1e-12 or abs(b - self.horizon) > 1e-12 * self.horizon:
            raise ValueError("bridge grid must span [0, T]")


def _bridge_paths(rng, nodes, horizon, count):
    dt = np.diff(nodes)
    steps = rng.standard_normal((count, dt.size)) * np.sqrt(dt)
    W = np.concatenate([np.zeros((count, 1)), np.cumsum(steps, axis=1)], axis=1)
    B = W - (nodes / horizon)[None, :] * W[:, -1:]
    B[:, 0] = 0.0
    B[:, -1] = 0.0
    return B


def simulate_bridge(spec: BridgeSpec) -> np.ndarray:
    """One path: random walk with ``N(0, dt)`` increments, then pinned at ``T``."""
    rng = np.random.default_rng(spec.seed)
    return _bridge_paths(rng, spec.grid.nodes, spec.horizon, 1)[0]


def simulate_bridges(grid: Grid, count: int, seed: int = 0, horizon: float = HORIZON) -> SamplePathEnsemble:
    """``count`` independent paths from one seeded generator; mean fixed at zero."""
    if count < 1:
        raise ValueError("need at least one path")
    BridgeSpec(grid, seed, horizon)
    rng = np.random.default_rng(seed)
    paths = _bridge_paths(rng, grid.nodes, horizon, count)
    return SamplePathEnsemble(paths, grid, np.zeros(grid.size))


def kl_bridge_reference(j: int, horizon: float = HORIZON):
    """Exact eigenpair ``(lambda_j, phi_j)`` of the bridge covariance operator.

    ``lambda_j = T^2 / (j pi)^2`` and ``phi_j(t) = sqrt(2/T) sin(j pi t / T)``,
    i.e. ``4/j^2`` and ``sin(j t / 2) / sqrt(pi)`` on ``[0, 2pi]``.
    """
    if int(j) != j or j < 1:
        raise ValueError("eigen-index starts at 1")
    lam = horizon ** 2 / (j * math.pi) ** 2
    amp = math.sqrt(2.0 / horizon)

    def phi(t):
        return amp * np.sin(j * math.pi * np.asarray(t, dtype=float) / horizon)

    return lam, phi


def bridge_grid(m: int) -> Grid:
    return trapezoid_grid(m, 0.0, HORIZON)
