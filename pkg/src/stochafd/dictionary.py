"""Parameterised kernel dictionaries on the unit circle.

Two families are provided:

* Szego kernels ``k_a(z) = 1 / (1 - conj(a) z)`` of the Hardy space, with
  multiple kernels given by ``d/d conj(a)`` derivatives;
* Poisson kernels ``P_x(e^{it}) = (1/2pi)(1 - r^2) / (1 - 2 r cos(t - theta) + r^2)``
  normalised to unit mass on the circle, with multiple kernels given by
  radial derivatives.

Both are evaluated through the identity ``P_x(z) = (2 Re k_x(z) - 1) / 2pi``
so that derivatives and interior (harmonic) evaluations share one closed form.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .basis import OrthonormalSystem
from .errors import NumericalFailure
from .numerics import TWO_PI, Grid, InnerProductMode, check_on_grid, norm

DEFAULT_R_MAX = 0.98


class Family(str, enum.Enum):
    SZEGO = "szego"
    POISSON = "poisson"

    @property
    def default_mode(self) -> InnerProductMode:
        if self is Family.SZEGO:
            return InnerProductMode.NORMALIZED_ARC
        return InnerProductMode.LEBESGUE


@dataclass(frozen=True)
class KernelDescriptor:
    """Dictionary element: family, disc parameter and multiplicity ``order >= 1``."""

    family: Family
    parameter: complex
    order: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "parameter", complex(self.parameter))
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"kernel order must be a positive integer, got {self.order}")
        object.__setattr__(self, "order", int(self.order))
        if not abs(self.parameter) < 1.0:
            raise ValueError(f"parameter {self.parameter} is not inside the unit disc")


def multiplicities(params: Sequence[complex]) -> list[int]:
    """``l(j)``: how many times ``params[j]`` occurs among ``params[:j+1]``."""
    seen: Counter = Counter()
    out = []
    for q in params:
        q = complex(q)
        seen[q] += 1
        out.append(seen[q])
    return out


def descriptors(params: Sequence[complex], family) -> list[KernelDescriptor]:
    """Descriptors for a parameter tuple, orders derived from repeats."""
    family = Family(family)
    return [KernelDescriptor(family, q, l) for q, l in zip(params, multiplicities(params))]


def _check_disc(a):
    a = np.asarray(a, dtype=complex)
    if np.any(np.abs(a) >= 1.0):
        raise ValueError("kernel parameters must satisfy |a| < 1")
    return a


def szego_values(a, z, order: int = 1) -> np.ndarray:
    """``(l-1)! z^(l-1) / (1 - conj(a) z)^l`` for parameters ``a`` (broadcast) at points ``z``."""
    a = _check_disc(a)
    z = np.asarray(z, dtype=complex)
    l = int(order)
    denom = 1.0 - np.conj(a)[..., None] * z
    if l == 1:
        return 1.0 / denom
    return math.factorial(l - 1) * z ** (l - 1) / denom ** l


def poisson_values(x, z, order: int = 1) -> np.ndarray:
    """Poisson kernel of parameter ``x`` at points ``z`` (``|z| <= 1``).

    For ``|z| < 1`` this is the harmonic extension of the boundary kernel;
    order ``l > 1`` is the ``(l-1)``-th derivative in the radial direction of ``x``.
    """
    x = _check_disc(x)
    z = np.asarray(z, dtype=complex)
    l = int(order)
    w = x[..., None] * np.conj(z)
    if l == 1:
        return (2.0 * np.real(1.0 / (1.0 - w)) - 1.0) / TWO_PI
    r = np.abs(x)
    direction = np.where(r > 0, x / np.where(r > 0, r, 1.0), 1.0)
    u = direction[..., None] * np.conj(z)
    return 2.0 * np.real(math.factorial(l - 1) * u ** (l - 1) / (1.0 - w) ** l) / TWO_PI


def kernel_values(family, params, z, order: int = 1) -> np.ndarray:
    family = Family(family)
    if family is Family.SZEGO:
        return szego_values(params, z, order)
    return poisson_values(params, z, order).astype(complex)


def szego_eval(desc: KernelDescriptor, grid: Grid) -> np.ndarray:
    if desc.family is not Family.SZEGO:
        raise ValueError("szego_eval needs a Szego descriptor")
    return szego_values(desc.parameter, grid.points, desc.order)


def poisson_eval(desc: KernelDescriptor, grid: Grid) -> np.ndarray:
    if desc.family is not Family.POISSON:
        raise ValueError("poisson_eval needs a Poisson descriptor")
    return poisson_values(desc.parameter, grid.points, desc.order)


def kernel_eval(desc: KernelDescriptor, grid: Grid) -> np.ndarray:
    """Samples of the (possibly multiple) kernel on the grid, as a complex vector."""
    return kernel_values(desc.family, desc.parameter, grid.points, desc.order)


def kernel_matrix(family, params, grid: Grid, orders=None) -> np.ndarray:
    """Rows of kernel samples for an array of parameters (``orders`` default 1)."""
    params = np.atleast_1d(np.asarray(params, dtype=complex))
    if orders is None:
        return kernel_values(family, params, grid.points, 1)
    orders = np.broadcast_to(np.asarray(orders, dtype=int), params.shape)
    out = np.empty((params.size, grid.size), dtype=complex)
    for l in np.unique(orders):
        sel = orders == l
        out[sel] = kernel_values(family, params[sel], grid.points, int(l))
    return out


def normalized_element(desc: KernelDescriptor, grid: Grid, mode=None) -> np.ndarray:
    """Kernel divided by its discrete norm in ``mode`` (family default when None)."""
    mode = desc.family.default_mode if mode is None else InnerProductMode(mode)
    k = kernel_eval(desc, grid)
    nk = norm(k, grid, mode)
    if not nk > 0.0 or not math.isfinite(nk):
        raise NumericalFailure(f"kernel {desc} has zero or non-finite norm")
    return k / nk


def szego_unit(a, z) -> np.ndarray:
    """Analytically normalised Szego kernel ``sqrt(1-|a|^2) / (1 - conj(a) z)`` (normalized arc)."""
    a = _check_disc(a)
    return np.sqrt(1.0 - np.abs(a) ** 2)[..., None] * szego_values(a, z)


def blaschke_factor(a: complex, z) -> np.ndarray:
    return (z - a) / (1.0 - np.conj(a) * z)


def blaschke_product(params: Iterable[complex], z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    for a in params:
        out = out * blaschke_factor(complex(a), z)
    return out


def tm_system(params: Sequence[complex], grid: Grid) -> OrthonormalSystem:
    """Takenaka-Malmquist functions ``B_k = e_{a_k} prod_{l<k} (z - a_l)/(1 - conj(a_l) z)``.

    Orthonormal at the continuous level in normalized-arc measure; the
    discrete Gram defect on ``grid`` is stored on the result.
    """
    params = [complex(a) for a in params]
    _check_disc(params)
    z = grid.points
    rows = []
    b = np.ones_like(z)
    for a in params:
        rows.append(szego_unit(a, z) * b)
        b = b * blaschke_factor(a, z)
    funcs = np.array(rows) if rows else np.zeros((0, grid.size), dtype=complex)
    system = OrthonormalSystem(funcs, grid, InnerProductMode.NORMALIZED_ARC,
                               tuple(descriptors(params, Family.SZEGO)))
    system.gram_defect = system.measure_defect()
    return system


def bvc_probe(f, family, radii, grid: Grid, angular_points: int = 128, mode=None) -> np.ndarray:
    """``sup_theta |<f, e_{r e^{i theta}}>|`` for each radius.

    Boundary-vanishing diagnostic: for square-integrable ``f`` the sequence
    tends to zero as ``r -> 1``.
    """
    family = Family(family)
    mode = family.default_mode if mode is None else InnerProductMode(mode)
    f = check_on_grid(f, grid)
    theta = TWO_PI * np.arange(angular_points) / angular_points
    wf = mode.scale * grid.weights * f
    out = []
    for r in radii:
        params = r * np.exp(1j * theta)
        K = kernel_values(family, params, grid.points)
        norms = np.sqrt(mode.scale * (np.abs(K) ** 2) @ grid.weights)
        out.append(float(np.max(np.abs(np.conj(K) @ wf) / norms)))
    return np.array(out)
