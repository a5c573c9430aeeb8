"""Deterministic adaptive Fourier decompositions.

* Core AFD on the Hardy space: maximal selection on reduced remainders and
  the Takenaka-Malmquist expansion.
* Pre-orthogonal AFD (POAFD) for any dictionary: candidates are
  Gram-Schmidt orthogonalised against the current system before selection,
  with multiple kernels when a parameter is chosen again.
* n-best approximation by cyclic coordinate sweeps.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .basis import Decomposition, OrthonormalSystem
from .dictionary import (Family, KernelDescriptor, blaschke_factor, descriptors,
                         kernel_eval, szego_unit, tm_system)
from .errors import DictionaryExhausted, LinearlyDependentCandidate, SignalExhausted
from .numerics import Grid, InnerProductMode, check_on_grid, inner_product, norm
from .search import (DELTA_GS, CandidatePool, CovarianceObjective, QuadraticForm,
                     ResidualObjective, SearchConfig, _best_index, greedy_select,
                     next_order, orthogonalize, polar, refine_candidates, sq_norms,
                     weighted_rows)

HARDY = InnerProductMode.NORMALIZED_ARC


def _mode(family, mode):
    return Family(family).default_mode if mode is None else InnerProductMode(mode)


# ---------------------------------------------------------------------------
# Gram-Schmidt with multiple kernels
# ---------------------------------------------------------------------------

def _gs_residual(system: OrthonormalSystem, kernel):
    R, coeffs = orthogonalize(np.atleast_2d(kernel), system.functions, system.grid, system.mode)
    r = R[0]
    kk = sq_norms(np.atleast_2d(kernel), system.grid, system.mode)[0]
    rr = sq_norms(R, system.grid, system.mode)[0]
    return r, coeffs[0], rr, kk


def gs_extend(system: OrthonormalSystem, candidate: KernelDescriptor, grid: Optional[Grid] = None,
              delta: float = DELTA_GS):
    """Orthonormalise ``candidate`` against ``system``.

    Returns ``(E_n, defect)`` where ``defect`` is the squared residual norm
    relative to ``||K||^2``.  The projection is done twice (classical
    Gram-Schmidt with re-orthogonalisation).  Raises
    :class:`LinearlyDependentCandidate` when ``defect < delta``.
    """
    if grid is not None and not grid.same_as(system.grid):
        raise ValueError("candidate grid differs from the system grid")
    r, _, rr, kk = _gs_residual(system, kernel_eval(candidate, system.grid))
    defect = rr / kk if kk > 0 else 0.0
    if not defect >= delta:
        raise LinearlyDependentCandidate(defect)
    return r / math.sqrt(rr), defect


def extend_system(system: OrthonormalSystem, candidate: KernelDescriptor,
                  delta: float = DELTA_GS) -> OrthonormalSystem:
    """New system with ``candidate`` appended; the triangular GS relation is kept."""
    r, coeffs, rr, kk = _gs_residual(system, kernel_eval(candidate, system.grid))
    defect = rr / kk if kk > 0 else 0.0
    if not defect >= delta:
        raise LinearlyDependentCandidate(defect)
    d = math.sqrt(rr)
    n = len(system)
    U = np.zeros((n + 1, n + 1), dtype=complex)
    if system.triangular is not None and n:
        U[:n, :n] = system.triangular
    U[:n, n] = coeffs
    U[n, n] = d
    funcs = np.vstack([system.functions, r / d])
    out = OrthonormalSystem(funcs, system.grid, system.mode, system.params + (candidate,), U)
    out.gram_defect = max(system.gram_defect, float(np.max(np.abs(out.gram()[-1] - np.eye(n + 1)[-1]))))
    return out


def build_system(descs: Sequence[KernelDescriptor], grid: Grid, mode=None,
                 delta: float = DELTA_GS) -> OrthonormalSystem:
    descs = list(descs)
    mode = _mode(descs[0].family if descs else Family.SZEGO, mode)
    system = OrthonormalSystem.empty(grid, mode)
    for d in descs:
        system = extend_system(system, d, delta)
    return system


def system_from_params(params: Sequence[complex], family, grid: Grid, mode=None) -> OrthonormalSystem:
    """GS system of a parameter tuple, multiplicities taken from repeats."""
    return build_system(descriptors(params, family), grid, _mode(family, mode))


# ---------------------------------------------------------------------------
# Core AFD (Hardy space)
# ---------------------------------------------------------------------------

def reduced_remainder(f_prev, a_prev: complex, grid: Grid):
    """Generalised backward shift: ``(f - <f, e_a> e_a) (1 - conj(a) z) / (z - a)``."""
    f_prev = check_on_grid(f_prev, grid)
    a = complex(a_prev)
    if not abs(a) < 1.0:
        raise ValueError("reduced remainder needs |a| < 1")
    z = grid.points
    e = szego_unit(a, z)
    c = inner_product(f_prev, e, grid, HARDY)
    return (f_prev - c * e) / blaschke_factor(a, z)


class _AnalyticUnitObjective:
    """``|<f_k, e_a>|^2`` with the analytically normalised Szego kernel."""

    def __init__(self, f, grid):
        self.wf = HARDY.scale * grid.weights * np.asarray(f)
        self.grid = grid

    def values(self, params):
        E = szego_unit(np.atleast_1d(params), self.grid.points)
        return np.abs(np.conj(E) @ self.wf) ** 2


def afd_select(f_k, cfg: SearchConfig, grid: Grid, candidates=None) -> complex:
    """Maximal selection ``argmax_a |<f_k, e_a>|`` over the refined polar grid."""
    return _afd_select(f_k, cfg, grid, candidates)[0]


def _afd_select(f_k, cfg, grid, candidates=None):
    f_k = check_on_grid(f_k, grid)
    obj = _AnalyticUnitObjective(f_k, grid)

    if candidates is not None:
        params = np.atleast_1d(np.asarray(candidates, dtype=complex))
        vals = obj.values(params)
    else:
        params = cfg.coarse_parameters()
        vals = obj.values(params)
        for level in range(1, cfg.refine_levels + 1):
            i = _best_index(params, vals)
            cand = refine_candidates(complex(params[i]), cfg, level)
            params = np.concatenate([params, cand])
            vals = np.concatenate([vals, obj.values(cand)])
    amp = np.sqrt(vals)
    i = _best_index(params, amp)
    if amp[i] < 1e-14:
        raise SignalExhausted(f"largest |<f_k, e_a>| is {amp[i]:.2e}")
    if cfg.rho < 1.0:
        eligible = np.flatnonzero(amp >= cfg.rho * amp[i])
        r, t = polar(params[eligible])
        i = int(eligible[np.lexsort((t, r))[0]])
    return complex(params[i]), float(amp[i])


def afd_decompose(f, n: int, cfg: SearchConfig = SearchConfig(), grid: Grid = None,
                  candidates=None) -> Decomposition:
    """Core AFD: ``f = sum_k <f_k, e_{a_k}> B_k`` with reduced remainders ``f_k``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    f = check_on_grid(np.asarray(f, dtype=complex), grid)
    fk = f
    params, coeffs, residual = [], [], []
    total = norm(f, grid, HARDY) ** 2
    for _ in range(n):
        try:
            a, _ = _afd_select(fk, cfg, grid, candidates)
        except SignalExhausted:
            break
        c = inner_product(fk, szego_unit(a, grid.points), grid, HARDY)
        params.append(a)
        coeffs.append(c)
        fk = reduced_remainder(fk, a, grid)
        residual.append(max(total - float(np.sum(np.abs(coeffs) ** 2)), 0.0))
    system = tm_system(params, grid)
    return Decomposition("AFD", Family.SZEGO.value, system, np.array([coeffs]), residual,
                         list(np.cumsum(np.abs(coeffs) ** 2)))


# ---------------------------------------------------------------------------
# POAFD
# ---------------------------------------------------------------------------

def poafd_select(g_n, system: OrthonormalSystem, cfg: SearchConfig, grid: Grid, family,
                 candidates=None, pool: Optional[CandidatePool] = None) -> KernelDescriptor:
    """Pre-orthogonal maximal selection ``argmax_q |<g_n, E_n^q>|``.

    ``g_n`` must be the standard remainder (orthogonal to ``system``).
    """
    return _poafd_step(g_n, system, cfg, grid, family, candidates, pool).descriptor


def _poafd_step(g_n, system, cfg, grid, family, candidates=None, pool=None):
    g_n = check_on_grid(g_n, grid)
    objective = ResidualObjective(g_n, grid, system.mode)
    floor = (1e-14) ** 2
    return greedy_select(objective, family, system.functions, grid, system.mode, cfg,
                         pool=pool, taken=system.params, candidates=candidates, floor=floor)


def poafd_decompose(f, n: int, cfg: SearchConfig = SearchConfig(), grid: Grid = None,
                    family=Family.SZEGO, mode=None, candidates=None) -> Decomposition:
    """Greedy pre-orthogonal expansion ``f ~ sum_k <f, E_k> E_k`` with ``n`` terms.

    Stops early when the remainder is exhausted or every candidate is
    dependent; the residual energies then simply end sooner.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    family = Family(family)
    mode = _mode(family, mode)
    f = check_on_grid(np.asarray(f, dtype=complex), grid)
    system = OrthonormalSystem.empty(grid, mode)
    pool = None if candidates is not None else CandidatePool(family, cfg.coarse_parameters(), grid, mode)
    g = f.copy()
    total = norm(f, grid, mode) ** 2
    coeffs, residual = [], []
    for _ in range(n):
        try:
            sel = _poafd_step(g, system, cfg, grid, family, candidates, pool)
            system = extend_system(system, sel.descriptor)
        except (SignalExhausted, DictionaryExhausted, LinearlyDependentCandidate):
            break
        e = system.functions[-1]
        c = inner_product(f, e, grid, mode)
        coeffs.append(c)
        g = g - inner_product(g, e, grid, mode) * e
        residual.append(norm(g, grid, mode) ** 2)
    captured = list(total - np.array(residual))
    return Decomposition("POAFD", family.value, system, np.array([coeffs]), residual, captured)


# ---------------------------------------------------------------------------
# n-best by cyclic sweeps
# ---------------------------------------------------------------------------

def projected_energy(objective_form: QuadraticForm, system: OrthonormalSystem) -> float:
    """``sum_k E|<f, E_k>|^2`` for the form's process (or ``|<f, E_k>|^2`` for rank one)."""
    if len(system) == 0:
        return 0.0
    return float(np.sum(objective_form.values(system.functions)))


class _SweepState:
    """Orthonormal basis of the current n-tuple with cached pool projections.

    ``M`` holds the coordinates of the kernels in the basis (``K_j = sum_i
    M[i, j] E_i``).  Dropping coordinate ``k`` is a unitary rotation inside
    the span, so the projections of the candidate pool onto the remaining
    ``n - 1`` directions follow from the cached ones without touching the
    grid-sized data again.
    """

    def __init__(self, descs, form, pool, grid, mode):
        self.form, self.pool, self.grid, self.mode = form, pool, grid, mode
        self.reset(descs)

    def reset(self, descs):
        system = build_system(descs, self.grid, self.mode)
        self.descs = list(descs)
        self.E = system.functions
        self.M = system.triangular
        self.GE = self.form.apply(self.E)
        if self.pool is not None:
            self.alpha = self.pool.K @ system.weighted().T
            self.beta = np.conj(self.pool.K) @ self.GE.T
        self.energy = float(np.sum(self.form.values(self.E)))

    def drop(self, k):
        """Rotation ``Q`` whose first column spans the direction lost with kernel ``k``."""
        x = np.conj(np.linalg.solve(self.M.T, np.eye(len(self.descs))[k]))
        basis = np.column_stack([x, np.eye(x.size, dtype=complex)])
        Q, _ = np.linalg.qr(basis)
        return Q[:, 1:x.size]

    def others(self, k):
        Q = self.drop(k)
        E = Q.T @ self.E
        GE = Q.T @ self.GE
        alpha = self.alpha @ np.conj(Q) if self.pool is not None else None
        beta = self.beta @ Q if self.pool is not None else None
        return Q, E, GE, alpha, beta

    def replace(self, k, desc, Q, E, GE, alpha, beta):
        kernel = kernel_eval(desc, self.grid)
        r, c = orthogonalize(kernel[None, :], E, self.grid, self.mode)
        d = math.sqrt(sq_norms(r, self.grid, self.mode)[0])
        e = r[0] / d
        n = len(self.descs)
        M = np.zeros((n, n), dtype=complex)
        M[:n - 1] = np.conj(Q).T @ self.M
        M[n - 1] = 0.0
        M[:n - 1, k] = c[0]
        M[n - 1, k] = d
        self.descs[k] = desc
        self.E = np.vstack([E, e])
        self.M = M
        ge = self.form.apply(e)
        self.GE = np.vstack([GE, ge])
        if self.pool is not None:
            self.alpha = np.hstack([alpha, self.pool.K @ weighted_rows(e[None, :], self.grid, self.mode).T])
            self.beta = np.hstack([beta, np.conj(self.pool.K) @ ge.T])
        self.energy = float(np.sum(self.form.values(self.E)))


def cyclic_sweeps(form: QuadraticForm, init: Sequence[KernelDescriptor], cfg: SearchConfig,
                  grid: Grid, family, mode, tol: float = 1e-10, max_sweeps: int = 50,
                  candidates=None):
    """Coordinate ascent on ``A(p) = sum_k E|<f, E_k^p>|^2``.

    Each coordinate is re-selected with the others held fixed: the energy
    of the span of the others plus the best orthogonalised candidate.  The
    incumbent is always among the scored candidates and a move is accepted
    only when it strictly improves ``A``, so ``A`` never decreases.
    Returns ``(descriptors, A, sweeps, history)``.
    """
    family = Family(family)
    mode = InnerProductMode(mode)
    objective = CovarianceObjective(form)
    pool = None if candidates is not None else CandidatePool(family, cfg.coarse_parameters(), grid, mode)
    state = _SweepState(list(init), form, pool, grid, mode)
    n = len(state.descs)
    history = [state.energy]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        state.reset(state.descs)  # drop accumulated rounding from the rotations
        A_start = state.energy
        for k in range(n):
            Q, E, GE, alpha, beta = state.others(k)
            taken = state.descs[:k] + state.descs[k + 1:]
            if pool is not None:
                pool.set_basis(E, alpha)
                objective.set_basis(pool, E, GE, beta)
            base = float(np.sum(form.values(E))) if len(E) else 0.0
            incumbent = state.descs[k]
            try:
                sel = greedy_select(objective, family, E, grid, mode, cfg, pool=pool, taken=taken,
                                    candidates=candidates,
                                    extras=[(incumbent.parameter, incumbent.order)], floor=-np.inf)
            except DictionaryExhausted:
                continue
            new = sel.descriptor
            if new == incumbent:
                continue
            if base + sel.value > state.energy * (1.0 + 1e-14):
                before = state.energy
                saved = (list(state.descs), state.E, state.M, state.GE,
                         getattr(state, "alpha", None), getattr(state, "beta", None))
                state.replace(k, new, Q, E, GE, alpha, beta)
                if not state.energy > before:
                    state.descs, state.E, state.M, state.GE, state.alpha, state.beta = saved
                    state.energy = before
        history.append(state.energy)
        if state.energy - A_start <= tol * abs(state.energy):
            break
    return state.descs, state.energy, sweeps, history


def nbest_cyclic(f, n: int, cfg: SearchConfig = SearchConfig(), grid: Grid = None,
                 family=Family.SZEGO, mode=None, tol: float = 1e-10, max_sweeps: int = 50,
                 candidates=None) -> Decomposition:
    """n-best kernel approximation of a single function, started from POAFD."""
    family = Family(family)
    mode = _mode(family, mode)
    f = check_on_grid(np.asarray(f, dtype=complex), grid)
    init = poafd_decompose(f, n, cfg, grid, family, mode, candidates)
    form = QuadraticForm.rank_one(f, grid, mode)
    descs, A, sweeps, history = cyclic_sweeps(form, init.params, cfg, grid, family, mode,
                                              tol, max_sweeps, candidates)
    system = build_system(descs, grid, mode)
    coeffs = system.coefficients(f)
    total = norm(f, grid, mode) ** 2
    captured = list(np.cumsum(np.abs(coeffs) ** 2))
    out = Decomposition("NBEST", family.value, system, np.array([coeffs]),
                        [total - c for c in captured], captured)
    out.sweeps = sweeps
    out.history = history
    out.initial_energy = init.captured_energy[-1] if init.captured_energy else 0.0
    return out


def convergence_budget(coefficients) -> float:
    """``sum |c_l|``: an upper bound for the infimum in the ``M / sqrt(n)`` rate."""
    return float(np.sum(np.abs(np.asarray(coefficients, dtype=complex))))
