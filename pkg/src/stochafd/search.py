"""Parameter search over the disc shared by the greedy and n-best methods.

Every selection in this package maximises an energy of the form

    value(q) = Q(r_q) / ||r_q||^2,     r_q = K_q - sum_k <K_q, E_k> E_k,

where ``K_q`` is a dictionary kernel, ``E_k`` the current orthonormal system
and ``Q`` either ``|<g, .>|^2`` for a deterministic remainder ``g`` or the
covariance form ``E |<f - mu, .>|^2``.  The search first scores a fixed polar
grid with cheap closed-form algebra, re-scores the best few candidates with
explicit (re-orthogonalised) Gram-Schmidt residuals and then refines locally
around the incumbent with halved spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .dictionary import DEFAULT_R_MAX, Family, KernelDescriptor, kernel_matrix
from .errors import DictionaryExhausted, SignalExhausted
from .numerics import TWO_PI, Grid, InnerProductMode

DELTA_GS = 1e-12
EXHAUSTION_FLOOR = 1e-14
_CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class SearchConfig:
    """Polar search grid and selection-rule settings.

    ``rho`` is the weak-selection factor in ``(0, 1]``; ``screen`` is how many
    coarse candidates are re-scored exactly before refinement.
    """

    radial_points: int = 40
    angular_points: int = 128
    refine_levels: int = 2
    rho: float = 1.0
    r_max: float = DEFAULT_R_MAX
    mult_escalation: bool = True
    screen: int = 16

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if not 0.0 < self.r_max < 1.0:
            raise ValueError(f"r_max must lie in (0, 1), got {self.r_max}")
        if self.radial_points < 2 or self.angular_points < 1:
            raise ValueError("search grid needs radial_points >= 2 and angular_points >= 1")
        if self.refine_levels < 0 or self.screen < 1:
            raise ValueError("refine_levels must be >= 0 and screen >= 1")

    def with_(self, **changes) -> "SearchConfig":
        return replace(self, **changes)

    @property
    def radial_step(self) -> float:
        return self.r_max / (self.radial_points - 1)

    @property
    def angular_step(self) -> float:
        return TWO_PI / self.angular_points

    @property
    def resolution(self) -> float:
        """Radial spacing after the last refinement level."""
        return self.radial_step / 2 ** self.refine_levels

    def coarse_parameters(self) -> np.ndarray:
        """Polar grid points; the origin appears once, first."""
        radii = np.linspace(0.0, self.r_max, self.radial_points)[1:]
        theta = self.angular_step * np.arange(self.angular_points)
        ring = (radii[:, None] * np.exp(1j * theta[None, :])).ravel()
        return np.concatenate([[0.0 + 0.0j], ring])


def polar(q) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(q, dtype=complex)
    return np.abs(q), np.mod(np.angle(q), TWO_PI)


def refine_candidates(center: complex, cfg: SearchConfig, level: int) -> np.ndarray:
    dr = cfg.radial_step / 2 ** level
    dt = cfg.angular_step / 2 ** level
    r0, t0 = abs(center), math.atan2(center.imag, center.real) % TWO_PI
    if r0 < 0.5 * dr:
        theta = cfg.angular_step * np.arange(cfg.angular_points)
        return np.concatenate([[0j], dr * np.exp(1j * theta)])
    radii = np.clip(r0 + dr * np.array([-1.0, 0.0, 1.0]), 0.0, cfg.r_max)
    angles = t0 + dt * np.array([-1.0, 0.0, 1.0])
    pts = (radii[:, None] * np.exp(1j * angles[None, :])).ravel()
    return np.unique(np.round(pts.real, 15) + 1j * np.round(pts.imag, 15))


# ---------------------------------------------------------------------------
# Quadratic energy forms
# ---------------------------------------------------------------------------

class QuadraticForm:
    """Hermitian form ``v -> v^H G v`` with ``G = s^2 W C W``.

    ``s`` is the inner-product scale and ``W = diag(weights)``, so that
    ``values(E)`` equals ``E_omega |<f_omega - mu, E>|^2`` in the chosen mode.
    Either a dense covariance matrix or a factor ``D`` with ``C = D D^H``
    (columns are scaled deviations) may be supplied.
    """

    def __init__(self, grid: Grid, mode: InnerProductMode, matrix=None, factor=None):
        mode = InnerProductMode(mode)
        self.grid = grid
        self.mode = mode
        s = mode.scale
        w = grid.weights
        if (matrix is None) == (factor is None):
            raise ValueError("give exactly one of matrix or factor")
        if matrix is not None:
            C = np.asarray(matrix)
            self.G = (s * s) * (w[:, None] * C * w[None, :])
            self.H = None
        else:
            D = np.asarray(factor)
            if D.ndim == 1:
                D = D[:, None]
            self.G = None
            self.H = s * (w[:, None] * D)

    @classmethod
    def rank_one(cls, f, grid: Grid, mode: InnerProductMode) -> "QuadraticForm":
        return cls(grid, mode, factor=np.asarray(f)[:, None])

    def apply(self, V) -> np.ndarray:
        """Rows ``G v`` for each row ``v`` of ``V``."""
        V = np.atleast_2d(V)
        if self.G is not None:
            return V @ self.G.T
        return (V @ np.conj(self.H)) @ self.H.T

    def values(self, V) -> np.ndarray:
        V = np.atleast_2d(V)
        out = np.empty(V.shape[0])
        step = max(1, _CHUNK_ELEMENTS // max(V.shape[1], 1))
        for i in range(0, V.shape[0], step):
            blk = V[i:i + step]
            out[i:i + step] = np.real(np.sum(np.conj(blk) * self.apply(blk), axis=1))
        return out

    def trace(self) -> float:
        """Total energy ``sum_i s w_i C_ii`` (the quadrature trace in this mode)."""
        s = self.mode.scale
        w = self.grid.weights
        if self.G is not None:
            return float(np.real(np.sum(np.diag(self.G) / w)) / s)
        return float(np.sum(np.abs(self.H) ** 2 / w[:, None]) / s)


# ---------------------------------------------------------------------------
# Candidate pools and objectives
# ---------------------------------------------------------------------------

def weighted_rows(E, grid: Grid, mode: InnerProductMode) -> np.ndarray:
    return mode.scale * grid.weights * np.conj(E)


def orthogonalize(K, E, grid: Grid, mode: InnerProductMode, passes: int = 2):
    """Classical Gram-Schmidt with re-orthogonalisation of rows ``K`` against ``E``.

    Returns residual rows and the accumulated projection coefficients.
    """
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    coeffs = np.zeros((K.shape[0], E.shape[0]), dtype=complex)
    if E.shape[0] == 0:
        return K.copy(), coeffs
    WE = weighted_rows(E, grid, mode)
    R = K.copy()
    for _ in range(passes):
        c = R @ WE.T
        R = R - c @ E
        coeffs += c
    return R, coeffs


def sq_norms(R, grid: Grid, mode: InnerProductMode) -> np.ndarray:
    return mode.scale * np.real((np.abs(R) ** 2) @ grid.weights)


class CandidatePool:
    """Kernels of the coarse polar grid with cached projections on a system."""

    def __init__(self, family, params, grid: Grid, mode: InnerProductMode):
        self.family = Family(family)
        self.params = np.asarray(params, dtype=complex)
        self.grid = grid
        self.mode = InnerProductMode(mode)
        self.K = kernel_matrix(self.family, self.params, grid)
        self.kk = sq_norms(self.K, grid, self.mode)
        self.alpha = np.zeros((self.params.size, 0), dtype=complex)
        self._E = np.zeros((0, grid.size), dtype=complex)
        self._kGk = {}

    def __len__(self):
        return self.params.size

    def sync(self, E):
        """Bring ``alpha[q, k] = <K_q, E_k>`` up to date, incrementally when ``E`` only grew."""
        E = np.atleast_2d(E)
        k_old = self._E.shape[0]
        if E.shape[0] >= k_old and np.array_equal(E[:k_old], self._E):
            if E.shape[0] > k_old:
                col = self.K @ weighted_rows(E[k_old:], self.grid, self.mode).T
                self.alpha = np.hstack([self.alpha, col])
        elif E.shape[0] == 0:
            self.alpha = np.zeros((self.params.size, 0), dtype=complex)
        else:
            self.alpha = self.K @ weighted_rows(E, self.grid, self.mode).T
        self._E = E.copy()

    def set_basis(self, E, alpha):
        """Install projections computed elsewhere (e.g. by rotating a larger system)."""
        self._E = np.array(E, copy=True)
        self.alpha = alpha

    def residual_sq(self) -> np.ndarray:
        return self.kk - np.sum(np.abs(self.alpha) ** 2, axis=1)

    def kGk(self, form: QuadraticForm) -> np.ndarray:
        key = id(form)
        if key not in self._kGk:
            self._kGk[key] = (form, form.values(self.K))
        return self._kGk[key][1]


class ResidualObjective:
    """``|<g, r_q>|^2 / ||r_q||^2`` for a remainder ``g`` orthogonal to the system."""

    squared = True

    def __init__(self, g, grid: Grid, mode: InnerProductMode):
        self.wg = mode.scale * grid.weights * np.asarray(g)
        self.grid = grid
        self.mode = mode

    def scale(self) -> float:
        return float(np.real(np.sum(np.conj(self.wg) * self.wg / self.grid.weights)) / self.mode.scale)

    def coarse(self, pool: CandidatePool, system_E):
        num = np.abs(np.conj(pool.K) @ self.wg) ** 2
        return num, pool.residual_sq()

    def exact(self, R):
        return np.abs(np.conj(R) @ self.wg) ** 2


class CovarianceObjective:
    """``E |<f - mu, r_q>|^2 / ||r_q||^2`` evaluated through a quadratic form."""

    squared = True

    def __init__(self, form: QuadraticForm):
        self.form = form
        m = form.grid.size
        self._E = np.zeros((0, m), dtype=complex)
        self._GE = np.zeros((0, m), dtype=complex)
        self._beta = None
        self._pool = None

    def scale(self) -> float:
        return self.form.trace()

    def _sync(self, E, pool):
        E = np.atleast_2d(E)
        k_old = self._E.shape[0]
        if E.shape[0] >= k_old and k_old > 0 and np.array_equal(E[:k_old], self._E):
            if E.shape[0] > k_old:
                GE = self.form.apply(E[k_old:])
                self._GE = np.vstack([self._GE, GE])
                if self._beta is not None and self._pool is pool:
                    self._beta = np.hstack([self._beta, np.conj(pool.K) @ GE.T])
        elif E.shape[0] == 0:
            self._GE = np.zeros((0, E.shape[1]), dtype=complex)
            self._beta = None
        elif not (E.shape == self._E.shape and np.array_equal(E, self._E)):
            self._GE = self.form.apply(E)
            self._beta = None
        self._E = E.copy()
        if self._pool is not pool:
            self._beta = None
            self._pool = pool
        if self._beta is None:
            self._beta = np.conj(pool.K) @ self._GE.T

    def set_basis(self, pool, E, GE, beta):
        """Install ``G E`` and ``beta[q, k] = <G E_k, K_q>`` computed elsewhere."""
        self._E = np.array(E, copy=True)
        self._GE = GE
        self._beta = beta
        self._pool = pool

    def coarse(self, pool: CandidatePool, system_E):
        self._sync(system_E, pool)
        kGk = pool.kGk(self.form)
        den = pool.residual_sq()
        if self._E.shape[0] == 0:
            return kGk.copy(), den
        alpha = pool.alpha
        beta = self._beta
        Hm = np.conj(self._E) @ self._GE.T
        num = (kGk - 2.0 * np.real(np.sum(alpha * beta, axis=1))
               + np.real(np.sum(np.conj(alpha) * (alpha @ Hm.T), axis=1)))
        return num, den

    def exact(self, R):
        return self.form.values(R)


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------

@dataclass
class Selection:
    descriptor: KernelDescriptor
    value: float
    defect: float


def _best_index(params, values):
    r, t = polar(params)
    finite = np.isfinite(values)
    if not finite.any():
        return None
    order = np.lexsort((t, r, -np.where(finite, values, -np.inf)))
    return int(order[0])


class _Tally:
    """Accumulates (parameter, order) -> (value, defect) across search stages."""

    def __init__(self):
        self.params = []
        self.orders = []
        self.values = []
        self.defects = []

    def add(self, params, orders, values, defects):
        self.params.extend(np.atleast_1d(params).tolist())
        self.orders.extend(np.atleast_1d(orders).tolist())
        self.values.extend(np.atleast_1d(values).tolist())
        self.defects.extend(np.atleast_1d(defects).tolist())

    def arrays(self):
        return (np.array(self.params, dtype=complex), np.array(self.orders, dtype=int),
                np.array(self.values, dtype=float), np.array(self.defects, dtype=float))


def exact_values(objective, family, params, orders, system_E, grid, mode, delta=DELTA_GS):
    """Objective and GS defect for explicit kernels, rejected ones set to ``-inf``."""
    params = np.atleast_1d(np.asarray(params, dtype=complex))
    if params.size == 0:
        return np.zeros(0), np.zeros(0)
    K = kernel_matrix(family, params, grid, orders)
    R, _ = orthogonalize(K, system_E, grid, mode)
    den = sq_norms(R, grid, mode)
    kk = sq_norms(K, grid, mode)
    defect = den / np.where(kk > 0, kk, 1.0)
    ok = defect >= delta
    vals = np.full(params.size, -np.inf)
    if ok.any():
        vals[ok] = objective.exact(R[ok]) / den[ok]
    return vals, defect


def next_order(q: complex, taken: Sequence[KernelDescriptor]) -> int:
    return 1 + sum(1 for d in taken if d.parameter == q)


def greedy_select(objective, family, system_E, grid: Grid, mode: InnerProductMode,
                  cfg: SearchConfig, pool: Optional[CandidatePool] = None,
                  taken: Sequence[KernelDescriptor] = (), candidates=None,
                  extras: Sequence[tuple] = (), floor: Optional[float] = None,
                  escalate: bool = True, delta: float = DELTA_GS, exact=None) -> Selection:
    """One maximal (or weak-maximal) selection step.

    ``candidates`` switches to a finite dictionary (no grid, no refinement).
    ``extras`` are ``(parameter, order)`` pairs always scored exactly, e.g.
    the incumbent of an n-best sweep.  ``exact(params, orders)`` replaces the
    Gram-Schmidt scoring of screened candidates; it returns values and
    defects like :func:`exact_values`.
    """
    family = Family(family)
    mode = InnerProductMode(mode)
    system_E = np.atleast_2d(system_E) if len(system_E) else np.zeros((0, grid.size), dtype=complex)
    tally = _Tally()

    def score(params, orders):
        if exact is None:
            vals, defects = exact_values(objective, family, params, orders, system_E, grid, mode, delta)
        else:
            vals, defects = exact(params, orders)
        tally.add(params, orders, vals, defects)
        return vals

    def fresh_orders(params):
        return [next_order(complex(q), taken) for q in np.atleast_1d(params)]

    if candidates is not None:
        cand = np.atleast_1d(np.asarray(candidates, dtype=complex))
        score(cand, fresh_orders(cand))
    else:
        if pool is None:
            pool = CandidatePool(family, cfg.coarse_parameters(), grid, mode)
        pool.sync(system_E)
        num, den = objective.coarse(pool, system_E)
        kk = np.where(pool.kk > 0, pool.kk, 1.0)
        defect = den / kk
        ok = defect >= max(delta, 1e-10)
        approx = np.full(len(pool), -np.inf)
        approx[ok] = num[ok] / den[ok]
        top = np.argsort(-approx, kind="stable")[:cfg.screen]
        top = top[np.isfinite(approx[top])]
        if top.size:
            score(pool.params[top], fresh_orders(pool.params[top]))
        # coarse values stand in for the rest; exact ones take precedence
        rest = np.setdiff1d(np.arange(len(pool)), top)
        tally.add(pool.params[rest], [1] * rest.size, approx[rest], defect[rest])
        for level in range(1, cfg.refine_levels + 1):
            p, o, v, _ = tally.arrays()
            i = _best_index(p, v)
            if i is None:
                break
            cand = refine_candidates(complex(p[i]), cfg, level)
            score(cand, fresh_orders(cand))
    if extras:
        score([e[0] for e in extras], [e[1] for e in extras])

    p, o, v, d = tally.arrays()
    i = _best_index(p, v)
    if i is None:
        raise DictionaryExhausted("every candidate was rejected as linearly dependent")
    vmax = v[i]
    floor = EXHAUSTION_FLOOR ** 2 if floor is None else floor
    if vmax <= floor:
        raise SignalExhausted(f"largest selection energy {vmax:.3e} is below {floor:.1e}")
    if cfg.rho < 1.0:
        threshold = cfg.rho * (math.sqrt(vmax) if objective_is_amplitude(objective) else vmax)
        vv = np.sqrt(np.maximum(v, 0.0)) if objective_is_amplitude(objective) else v
        eligible = np.flatnonzero(np.isfinite(v) & (vv >= threshold))
        r, t = polar(p[eligible])
        i = int(eligible[np.lexsort((t, r))[0]])
    q, order, value, dft = complex(p[i]), int(o[i]), float(v[i]), float(d[i])

    if escalate and cfg.mult_escalation and candidates is None and order == 1 and taken:
        near = [dd.parameter for dd in taken if abs(dd.parameter - q) <= cfg.resolution]
        if near:
            qj = min(near, key=lambda z: abs(z - q))
            lj = next_order(qj, taken)
            vals, defects = exact_values(objective, family, [qj], [lj], system_E, grid, mode, delta)
            if np.isfinite(vals[0]):
                q, order, value, dft = qj, lj, float(vals[0]), float(defects[0])
    return Selection(KernelDescriptor(family, q, order), value, dft)


def objective_is_amplitude(objective) -> bool:
    """Deterministic selections apply the weak factor to ``|<g, E>|``, stochastic ones to the energy."""
    return isinstance(objective, ResidualObjective)

