"""Covariances of random boundary signals and the stochastic AFD methods.

A process is handled through its covariance alone when selecting
parameters: for a unit vector ``E`` the expected squared coefficient is the
double quadrature ``E |<f - mu, E>|^2 = sum_ij w_i w_j C_ij E_j conj(E_i)``.
SPOAFD, SAFD and stochastic n-best maximise sums of these quantities; the
chosen system is shared by every sample path, which is then only projected.

All energies here use the Lebesgue inner product, so captured energies are
directly comparable to Nystrom KL eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import Decomposition, OrthonormalSystem
from .core import build_system, cyclic_sweeps, extend_system
from .dictionary import Family, KernelDescriptor, blaschke_product, descriptors, szego_unit
from .errors import DictionaryExhausted, LinearlyDependentCandidate, SignalExhausted
from .numerics import Grid, InnerProductMode, check_on_grid
from .search import (CandidatePool, CovarianceObjective, QuadraticForm, SearchConfig,
                     greedy_select)

LEBESGUE = InnerProductMode.LEBESGUE
ENERGY_FLOOR = 1e-28


# ---------------------------------------------------------------------------
# Ensembles and covariances
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SamplePathEnsemble:
    """Sample paths as rows of a ``(paths, m)`` array; ``mean`` defaults to the row average."""

    paths: np.ndarray
    grid: Grid
    mean: Optional[np.ndarray] = None

    def __post_init__(self):
        self.paths = np.atleast_2d(np.asarray(self.paths))
        check_on_grid(self.paths, self.grid, "paths")
        if self.mean is None:
            self.mean = empirical_mean(self)
        else:
            self.mean = check_on_grid(np.asarray(self.mean), self.grid, "mean")

    def __len__(self):
        return self.paths.shape[0]

    @property
    def deviations(self) -> np.ndarray:
        return self.paths - self.mean


def empirical_mean(ensemble) -> np.ndarray:
    paths = ensemble.paths if isinstance(ensemble, SamplePathEnsemble) else np.atleast_2d(ensemble)
    if paths.shape[0] < 1 or paths.size == 0:
        raise ValueError("the mean of an empty ensemble is undefined")
    return paths.mean(axis=0)


class CovarianceKernel:
    """Covariance sampled on a grid, from a closed form or from sample paths.

    Empirical covariances keep the low-rank factor ``D`` with ``C = D D^H``;
    the dense matrix is formed on first use.
    """

    def __init__(self, grid: Grid, matrix=None, factor=None, source: str = "closed_form",
                 descriptor: str = "", validate: bool = True):
        if (matrix is None) == (factor is None):
            raise ValueError("give exactly one of matrix or factor")
        self.grid = grid
        self.source = source
        self.descriptor = descriptor
        self._matrix = None
        self.factor = None
        if factor is not None:
            D = np.asarray(factor)
            if D.ndim == 1:
                D = D[:, None]
            if D.shape[0] != grid.size:
                raise ValueError("covariance factor rows must match the grid")
            self.factor = D
        else:
            C = np.asarray(matrix)
            if C.shape != (grid.size, grid.size):
                raise ValueError(f"covariance must be {grid.size}x{grid.size}, got {C.shape}")
            if validate:
                _validate(C)
            self._matrix = C
        self._forms = {}

    @classmethod
    def from_function(cls, func: Callable, grid: Grid, descriptor: str = "") -> "CovarianceKernel":
        t = grid.nodes
        return cls(grid, matrix=func(t[:, None], t[None, :]), source="closed_form",
                   descriptor=descriptor)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = self.factor @ self.factor.conj().T
        return self._matrix

    @property
    def is_complex(self) -> bool:
        src = self._matrix if self._matrix is not None else self.factor
        return np.iscomplexobj(src)

    def form(self, mode=LEBESGUE) -> QuadraticForm:
        mode = InnerProductMode(mode)
        if mode not in self._forms:
            if self._matrix is not None:
                self._forms[mode] = QuadraticForm(self.grid, mode, matrix=self._matrix)
            else:
                self._forms[mode] = QuadraticForm(self.grid, mode, factor=self.factor)
        return self._forms[mode]

    def trace(self) -> float:
        """Quadrature trace ``sum_i w_i C_ii``: the expected squared Lebesgue norm."""
        return self.form(LEBESGUE).trace()


def _validate(C, herm_tol: float = 1e-10, psd_tol: float = 1e-8):
    scale = max(float(np.max(np.abs(C))), np.finfo(float).tiny)
    if np.max(np.abs(C - C.conj().T)) > herm_tol * scale:
        raise ValueError("covariance matrix is not conjugate-symmetric")
    tr = float(np.real(np.trace(C)))
    if tr < 0:
        raise ValueError("covariance matrix has negative trace")
    shift = psd_tol * max(tr, np.finfo(float).tiny)
    try:
        np.linalg.cholesky(0.5 * (C + C.conj().T) + shift * np.eye(C.shape[0]))
    except np.linalg.LinAlgError:
        raise ValueError("covariance matrix is not positive semi-definite") from None


def covariance_from_ensemble(ensemble: SamplePathEnsemble) -> CovarianceKernel:
    """Unbiased sample covariance ``1/(p-1) sum (f - mu)(f - mu)^H``."""
    p = len(ensemble)
    if p < 2:
        raise ValueError("a sample covariance needs at least two paths")
    D = ensemble.deviations.T / math.sqrt(p - 1)
    return CovarianceKernel(ensemble.grid, factor=D, source="empirical")


@dataclass(eq=False)
class ParametricRandomField:
    """``f(t) = F(t, u)`` with ``u`` drawn from a density on an interval.

    ``F`` is called with a ``(m, 1)`` array of times and a ``(1, q)`` array
    of parameter nodes; ``density`` with the parameter nodes.
    """

    F: Callable
    density: Callable
    interval: tuple
    quad_points: int = 64

    def quadrature(self):
        a, b = self.interval
        if not a < b:
            raise ValueError("parameter interval is empty")
        x, w = np.polynomial.legendre.leggauss(self.quad_points)
        u = 0.5 * (b - a) * x + 0.5 * (b + a)
        weights = 0.5 * (b - a) * w * np.asarray(self.density(u), dtype=float)
        if np.any(weights < 0):
            raise ValueError("density must be non-negative")
        mass = float(np.sum(weights))
        if abs(mass - 1.0) > 1e-8:
            raise ValueError(f"density integrates to {mass:.10f}, not 1")
        return u, weights


def covariance_from_parametric(field: ParametricRandomField, grid: Grid):
    """Covariance (and mean) of a parametric field by quadrature over the parameter."""
    u, weights = field.quadrature()
    values = np.asarray(field.F(grid.nodes[:, None], u[None, :]))
    values = np.broadcast_to(values, (grid.size, u.size))
    mu = values @ weights
    D = (values - mu[:, None]) * np.sqrt(weights)[None, :]
    C = CovarianceKernel(grid, factor=D, source="parametric")
    C.mean = mu
    return C


def stochastic_objective(C: CovarianceKernel, E, grid: Grid, mode=LEBESGUE) -> float:
    """``E |<f - mu, E>|^2`` from the covariance alone."""
    if not grid.same_as(C.grid):
        raise ValueError("covariance and function live on different grids")
    E = check_on_grid(np.asarray(E, dtype=complex), grid, "E")
    return float(C.form(mode).values(E[None, :])[0])


def project_paths(ensemble: SamplePathEnsemble, system: OrthonormalSystem) -> np.ndarray:
    """``c[w, k] = <f_w - mu, E_k>`` for every path."""
    if not ensemble.grid.same_as(system.grid):
        raise ValueError("ensemble and system live on different grids")
    return system.coefficients(ensemble.deviations)


# ---------------------------------------------------------------------------
# Analytic signals for the Hardy-space methods
# ---------------------------------------------------------------------------

def analytic_projector(grid: Grid) -> np.ndarray:
    """Matrix of the discrete projection onto non-negative frequencies.

    The trapezoid grid repeats ``t = 0`` at ``t = 2pi``, so the DFT acts on
    the first ``N = m - 1`` samples and the last row copies the first.
    Frequency 0 (and the Nyquist frequency for even ``N``) keeps half its
    weight so that ``2 Re(P f) = f`` for real periodic ``f``.
    """
    if not grid.is_periodic_uniform():
        raise ValueError("the analytic projection needs a uniform periodic grid on [0, 2pi]")
    m = grid.size
    N = m - 1
    k = np.fft.fftfreq(N, 1.0 / N)
    h = np.where(k > 0, 1.0, 0.0)
    h[0] = 0.5
    if N % 2 == 0:
        h[N // 2] = 0.5
    F = np.fft.fft(np.eye(N), axis=0)
    core = np.fft.ifft(h[:, None] * F, axis=0)
    P = np.zeros((m, m), dtype=complex)
    P[:N, :N] = core
    P[N, :N] = core[0]
    return P


def analytic_signal(paths, grid: Grid) -> np.ndarray:
    P = analytic_projector(grid)
    return np.asarray(paths) @ P.T


def analytic_ensemble(ensemble: SamplePathEnsemble) -> SamplePathEnsemble:
    P = analytic_projector(ensemble.grid)
    return SamplePathEnsemble(ensemble.paths @ P.T, ensemble.grid, P @ ensemble.mean)


def analytic_covariance(C: CovarianceKernel) -> CovarianceKernel:
    """``C+ = P C P^H``: the covariance of the analytic signal."""
    P = analytic_projector(C.grid)
    if C.factor is not None:
        return CovarianceKernel(C.grid, factor=P @ C.factor, source=C.source, descriptor=C.descriptor)
    Cp = P @ C.matrix @ P.conj().T
    return CovarianceKernel(C.grid, matrix=0.5 * (Cp + Cp.conj().T), source=C.source,
                            descriptor=C.descriptor, validate=False)


# ---------------------------------------------------------------------------
# SPOAFD, SAFD and stochastic n-best
# ---------------------------------------------------------------------------

def _finish(method, family, system, C, ensemble, mode, analytic=False, **extra):
    form = C.form(mode)
    captured = list(np.cumsum(form.values(system.functions))) if len(system) else []
    if ensemble is not None:
        coeffs = project_paths(ensemble, system)
        residual = _path_residuals(ensemble, system, coeffs, analytic)
        mean = ensemble.mean
        if analytic:
            mean = 2.0 * np.real(mean)
    else:
        coeffs = np.zeros((0, len(system)), dtype=complex)
        total = form.trace()
        residual = [total - c for c in captured]
        mean = None
    out = Decomposition(method, Family(family).value if family else None, system, coeffs,
                        residual, captured, mean, analytic)
    for key, value in extra.items():
        setattr(out, key, value)
    return out


def _path_residuals(ensemble, system, coeffs, analytic):
    """Mean squared Lebesgue remainder after each term, for the real paths when ``analytic``."""
    dev = ensemble.deviations
    if analytic:
        dev = 2.0 * np.real(dev)
    w = ensemble.grid.weights
    partial = np.zeros_like(dev, dtype=complex)
    out = []
    for k in range(len(system)):
        partial = partial + coeffs[:, k:k + 1] * system.functions[k]
        approx = 2.0 * np.real(partial) if analytic else partial
        out.append(float(np.mean((np.abs(dev - approx) ** 2) @ w)))
    return out


def _covariance_floor(C):
    return ENERGY_FLOOR * max(C.trace(), np.finfo(float).tiny)


def spoafd_decompose(C: CovarianceKernel, ensemble: Optional[SamplePathEnsemble], family,
                     n: int, cfg: SearchConfig = SearchConfig(), grid: Grid = None,
                     mode=LEBESGUE, candidates=None, analytic: bool = False) -> Decomposition:
    """Stochastic pre-orthogonal AFD: one parameter sequence from ``C``, shared by all paths.

    Set ``analytic`` when ``C`` and ``ensemble`` describe analytic signals of
    real paths.  Stops early when the covariance energy outside the span is exhausted or
    no candidate is independent of the current system.
    """
    grid = C.grid if grid is None else grid
    if not grid.same_as(C.grid):
        raise ValueError("covariance and grid differ")
    if n < 1:
        raise ValueError("n must be at least 1")
    family = Family(family)
    mode = InnerProductMode(mode)
    objective = CovarianceObjective(C.form(mode))
    pool = None if candidates is not None else CandidatePool(family, cfg.coarse_parameters(), grid, mode)
    system = OrthonormalSystem.empty(grid, mode)
    floor = _covariance_floor(C)
    for _ in range(n):
        try:
            sel = greedy_select(objective, family, system.functions, grid, mode, cfg, pool=pool,
                                taken=system.params, candidates=candidates, floor=floor)
            system = extend_system(system, sel.descriptor)
        except (SignalExhausted, DictionaryExhausted, LinearlyDependentCandidate):
            break
    return _finish("SPOAFD", family, system, C, ensemble, mode, analytic=analytic)


def tm_candidates(params, previous: Sequence[complex], grid: Grid, mode=LEBESGUE) -> np.ndarray:
    """Rows ``B^a = e_a prod_l (z - a_l)/(1 - conj(a_l) z)`` for each candidate ``a``."""
    z = grid.points
    b = blaschke_product(previous, z)
    rows = szego_unit(np.atleast_1d(np.asarray(params, dtype=complex)), z) * b
    return rows * math.sqrt(InnerProductMode.NORMALIZED_ARC.scale / InnerProductMode(mode).scale)


def safd_decompose(C_plus: CovarianceKernel, ensemble_plus: Optional[SamplePathEnsemble], n: int,
                   cfg: SearchConfig = SearchConfig(), grid: Grid = None,
                   mode=LEBESGUE) -> Decomposition:
    """Stochastic AFD over the Takenaka-Malmquist system of analytic signals.

    ``C_plus`` and ``ensemble_plus`` describe the analytic signal (see
    :func:`analytic_covariance`).  Candidates at step ``k`` are
    ``B_k^a = e_a b_{k-1}`` with the Blaschke product of earlier parameters;
    the polar grid is screened with the equivalent Gram-Schmidt formula and
    the short list is scored with ``B_k^a`` itself.  Real paths are
    reconstructed as ``2 Re`` of the partial sums.
    """
    grid = C_plus.grid if grid is None else grid
    if n < 1:
        raise ValueError("n must be at least 1")
    mode = InnerProductMode(mode)
    form = C_plus.form(mode)
    objective = CovarianceObjective(form)
    pool = CandidatePool(Family.SZEGO, cfg.coarse_parameters(), grid, mode)
    params: list = []
    rows = np.zeros((0, grid.size), dtype=complex)
    floor = _covariance_floor(C_plus)

    def exact(cands, orders):
        B = tm_candidates(cands, params, grid, mode)
        return form.values(B), np.ones(len(B))

    for _ in range(n):
        try:
            sel = greedy_select(objective, Family.SZEGO, rows, grid, mode, cfg, pool=pool,
                                floor=floor, escalate=False, exact=exact)
        except (SignalExhausted, DictionaryExhausted):
            break
        a = sel.descriptor.parameter
        rows = np.vstack([rows, tm_candidates([a], params, grid, mode)])
        params.append(a)
    system = OrthonormalSystem(rows, grid, mode, tuple(descriptors(params, Family.SZEGO)))
    system.gram_defect = system.measure_defect()
    return _finish("SAFD", Family.SZEGO, system, C_plus, ensemble_plus, mode, analytic=True)


def snb_optimize(C: CovarianceKernel, n: int, init: Optional[Sequence] = None,
                 cfg: SearchConfig = SearchConfig(), grid: Grid = None, family=Family.SZEGO,
                 ensemble: Optional[SamplePathEnsemble] = None, mode=LEBESGUE,
                 tol: float = 1e-10, max_sweeps: int = 50, candidates=None,
                 analytic: bool = False) -> Decomposition:
    """Stochastic n-best: cyclic sweeps on ``A = sum_k E |<f - mu, E_k>|^2``.

    ``init`` is a parameter tuple or descriptor list; SPOAFD's selection by
    default.  ``A`` never decreases from its initial value.
    """
    grid = C.grid if grid is None else grid
    family = Family(family)
    mode = InnerProductMode(mode)
    if init is None:
        init = spoafd_decompose(C, None, family, n, cfg, grid, mode, candidates).params
    init = list(init)
    if init and not isinstance(init[0], KernelDescriptor):
        init = descriptors(init, family)
    start = build_system(init, grid, mode)
    initial = float(np.sum(C.form(mode).values(start.functions))) if len(start) else 0.0
    descs, A, sweeps, history = cyclic_sweeps(C.form(mode), init, cfg, grid, family, mode,
                                              tol, max_sweeps, candidates)
    system = build_system(descs, grid, mode)
    return _finish("SnB", family, system, C, ensemble, mode, analytic=analytic,
                   sweeps=sweeps, history=history, initial_energy=initial)


def captured_energy(C: CovarianceKernel, system: OrthonormalSystem) -> float:
    """``sum_k E |<f - mu, E_k>|^2`` in the system's inner product."""
    if len(system) == 0:
        return 0.0
    return float(np.sum(C.form(system.mode).values(system.functions)))
