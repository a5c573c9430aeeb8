"""Harmonic extension of Poisson-dictionary expansions into the disc.

A boundary expansion ``f_n = mu + sum_k a_k E_k`` in Gram-Schmidt
orthonormalised Poisson kernels is rewritten in raw kernels,
``sum_j c_j P_{x_j}``, by solving the triangular Gram-Schmidt relation.
Each raw kernel is the boundary value of an explicit harmonic function, so
the lift is a finite sum of closed forms; the mean is extended by the
discrete Poisson integral.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .basis import Decomposition
from .dictionary import Family, poisson_values


def _interior_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != 2:
        raise ValueError("interior points are (r, theta) pairs")
    r, theta = pts[:, 0], pts[:, 1]
    if np.any(r < 0) or np.any(r >= 1.0):
        raise ValueError("interior points need 0 <= r < 1")
    return r * np.exp(1j * theta)


def raw_coefficients(decomposition: Decomposition, path: int = 0) -> np.ndarray:
    """Coefficients on the raw kernels: ``c = U^-1 a`` by back substitution."""
    system = decomposition.system
    U = system.triangular
    if U is None or U.shape[0] != len(system):
        raise ValueError("decomposition carries no Gram-Schmidt triangular relation")
    a = decomposition.coefficients[path]
    n = a.size
    c = np.zeros(n, dtype=complex)
    for k in range(n - 1, -1, -1):
        c[k] = (a[k] - U[k, k + 1:] @ c[k + 1:]) / U[k, k]
    return c


def poisson_integral(boundary, grid, y) -> np.ndarray:
    """Discrete Poisson integral ``sum_i w_i P(y, e^{i t_i}) g_i`` at interior points ``y``."""
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    P = poisson_values(y, grid.points)
    return P @ (grid.weights * np.asarray(boundary))


def dirichlet_lift(decomposition: Decomposition, points, path: int = 0,
                   n: Optional[int] = None) -> np.ndarray:
    """Harmonic field with boundary values ``f_n`` at interior ``(r, theta)`` points."""
    if decomposition.family != Family.POISSON.value:
        raise ValueError("the Dirichlet lift needs a Poisson-dictionary decomposition")
    y = _interior_points(points)
    if n is not None:
        decomposition = decomposition.truncated(n)
    c = raw_coefficients(decomposition, path)
    out = poisson_integral(decomposition.mean, decomposition.grid, y).astype(complex)
    for desc, ck in zip(decomposition.params, c):
        out += ck * poisson_values(desc.parameter, y, desc.order)
    if np.all(np.abs(out.imag) <= 1e-12 * max(1.0, float(np.max(np.abs(out.real))))):
        return out.real
    return out


def polar_laplacian(u, r: float, theta: float, h: float) -> float:
    """Five-point polar Laplacian ``u_rr + u_r / r + u_tt / r^2`` with steps ``h``.

    ``u`` maps arrays of ``(r, theta)`` pairs to values.
    """
    if not (0 < r - h and r + h < 1):
        raise ValueError("stencil leaves the disc")
    pts = np.array([[r, theta], [r + h, theta], [r - h, theta], [r, theta + h], [r, theta - h]])
    v = np.real(np.asarray(u(pts)))
    u_rr = (v[1] - 2 * v[0] + v[2]) / h ** 2
    u_r = (v[1] - v[2]) / (2 * h)
    u_tt = (v[3] - 2 * v[0] + v[4]) / h ** 2
    return float(u_rr + u_r / r + u_tt / r ** 2)
