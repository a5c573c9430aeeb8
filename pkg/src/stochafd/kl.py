"""Nystrom Karhunen-Loeve expansions of a sampled covariance.

The covariance operator ``(TF)(s) = int C(s, t) F(t) dt`` is discretised by
the grid quadrature.  Symmetrising with ``D = diag(w)`` turns its eigenproblem
into the Hermitian one for ``D^1/2 C D^1/2``; eigenfunctions are recovered as
``phi(t_i) = u_i / sqrt(w_i)`` and are orthonormal in the weighted inner
product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import Decomposition, OrthonormalSystem
from .numerics import Grid, InnerProductMode, check_on_grid, sym_eig
from .stochastic import CovarianceKernel, SamplePathEnsemble

LEBESGUE = InnerProductMode.LEBESGUE
CUT = 1e-12
DEGREE_CAP = 6
DIVERGENCE_GROWTH = 3.0


def _matrix(C):
    return C.matrix if isinstance(C, CovarianceKernel) else np.asarray(C)


def apply_T(C, F, grid: Grid) -> np.ndarray:
    """``(TF)_i = sum_j w_j C_ij F_j``."""
    Cm = _matrix(C)
    F = check_on_grid(np.asarray(F), grid, "F")
    if Cm.shape != (grid.size, grid.size):
        raise ValueError("covariance and function live on different grids")
    return Cm @ (grid.weights * F)


@dataclass(eq=False)
class KLBasis:
    """Eigenpairs in descending order; ``rank`` counts ``lambda > CUT * lambda_1``."""

    eigenvalues: np.ndarray
    functions: np.ndarray
    grid: Grid

    @property
    def rank(self) -> int:
        lam = self.eigenvalues
        if lam.size == 0 or lam[0] <= 0:
            return 0
        return int(np.sum(lam > CUT * lam[0]))

    @property
    def mask(self) -> np.ndarray:
        """``alpha_k``: 1 for retained eigenpairs, 0 for the numerical null space."""
        out = np.zeros(self.eigenvalues.size, dtype=bool)
        out[:self.rank] = True
        return out

    def system(self, n: Optional[int] = None) -> OrthonormalSystem:
        n = self.functions.shape[0] if n is None else n
        return OrthonormalSystem(self.functions[:n], self.grid, LEBESGUE)

    def coefficients(self, F) -> np.ndarray:
        """``<F, phi_k>`` in the Lebesgue inner product."""
        return np.asarray(F) @ (self.grid.weights * np.conj(self.functions)).T


def kl_basis(C, grid: Grid, count: Optional[int] = None, method: str = "lapack") -> KLBasis:
    """Nystrom eigenpairs of the covariance operator.

    ``count`` keeps the leading eigenpairs (all of them by default,
    including the numerical null space).
    """
    Cm = _matrix(C)
    if Cm.shape != (grid.size, grid.size):
        raise ValueError("covariance and grid differ in size")
    r = np.sqrt(grid.weights)
    A = r[:, None] * Cm * r[None, :]
    lam, U = sym_eig(A, method=method)
    if count is not None:
        lam, U = lam[:count], U[:, :count]
    phi = (U / r[:, None]).T
    # a fixed sign convention keeps archives and plots reproducible
    for k in range(phi.shape[0]):
        i = int(np.argmax(np.abs(phi[k]) > 1e-8 * np.max(np.abs(phi[k]))))
        if np.real(phi[k, i]) < 0:
            phi[k] = -phi[k]
    return KLBasis(lam, phi, grid)


def mercer_reconstruct(basis: KLBasis, n: int) -> np.ndarray:
    """``sum_{k<=n} lambda_k phi_k(s) conj(phi_k(t))``."""
    if n < 0 or n > basis.eigenvalues.size:
        raise ValueError(f"n must lie in [0, {basis.eigenvalues.size}]")
    phi = basis.functions[:n]
    M = (phi.T * basis.eigenvalues[:n]) @ np.conj(phi)
    return M.real if not np.iscomplexobj(basis.functions) else M


def kl_partial_sum(path, basis: KLBasis, n: int, mean=None) -> np.ndarray:
    """``S_n = mu + sum_{k<=n} <f - mu, phi_k> phi_k``."""
    path = check_on_grid(np.asarray(path), basis.grid, "path")
    mean = np.zeros(basis.grid.size) if mean is None else check_on_grid(np.asarray(mean), basis.grid, "mean")
    if n == 0:
        return np.array(mean, copy=True)
    c = basis.coefficients(path - mean)
    out = mean + c[..., :n] @ basis.functions[:n]
    if np.isrealobj(path) and np.isrealobj(basis.functions):
        out = np.real(out)
    return out


def kl_decompose(C: CovarianceKernel, ensemble: Optional[SamplePathEnsemble], n: int,
                 basis: Optional[KLBasis] = None) -> Decomposition:
    """KL partial expansion as a :class:`Decomposition` (method tag ``KL``)."""
    grid = C.grid
    basis = kl_basis(C, grid) if basis is None else basis
    system = basis.system(n)
    captured = list(np.cumsum(basis.eigenvalues[:n]))
    if ensemble is not None:
        dev = ensemble.deviations
        coeffs = system.coefficients(dev)
        w = grid.weights
        residual = []
        partial = np.zeros_like(dev, dtype=complex)
        for k in range(n):
            partial = partial + coeffs[:, k:k + 1] * system.functions[k]
            residual.append(float(np.mean((np.abs(dev - partial) ** 2) @ w)))
        mean = ensemble.mean
    else:
        coeffs = np.zeros((0, n))
        total = C.trace()
        residual = [total - c for c in captured]
        mean = None
    return Decomposition("KL", None, system, coeffs, residual, captured, mean,
                         eigenvalues=basis.eigenvalues[:n].copy())


def kl_optimality_check(C, psi_system: OrthonormalSystem, basis: KLBasis, n: int,
                        tol: float = 1e-8) -> float:
    """``sum_{k<=n} lambda_k - sum_{k<=n} <T psi_k, psi_k>`` (non-negative for orthonormal psi).

    Any inner-product scaling of ``psi_system`` is undone first so that both
    sums are Lebesgue quantities.
    """
    if n > len(psi_system):
        raise ValueError(f"system has only {len(psi_system)} functions")
    grid = basis.grid
    psi = psi_system.lebesgue_functions()[:n]
    wpsi = grid.weights * psi
    G = np.conj(psi) @ wpsi.T
    if n and np.max(np.abs(G - np.eye(n))) > 1e-6:
        raise ValueError("psi is not orthonormal on the grid")
    Cm = _matrix(C)
    captured = float(np.real(np.sum(np.conj(wpsi) * (wpsi @ Cm.T))))
    return float(np.sum(basis.eigenvalues[:n])) - captured


def hcj_norm(F, basis: KLBasis, j: int, growth: float = DIVERGENCE_GROWTH):
    """Squared ``H_{C_j}`` norm ``sum alpha_k |<F, phi_k>|^2 / lambda_k^(j+1)``.

    Returns ``(value, divergent)``.  On a finite grid every sum is finite;
    ``divergent`` flags a partial-sum sequence still growing by more than
    ``growth`` over its last decade of retained indices.
    """
    if j < 0 or int(j) != j:
        raise ValueError("j must be a non-negative integer")
    R = basis.rank
    if R == 0:
        return 0.0, False
    lam = basis.eigenvalues[:R]
    c = np.abs(basis.coefficients(F)[:R])
    # coefficients at roundoff level would be blown up by lambda^-(j+1)
    c[c <= 64 * np.finfo(float).eps * np.linalg.norm(c)] = 0.0
    terms = c ** 2 / lam ** (j + 1)
    partial = np.cumsum(terms)
    total = float(partial[-1])
    lo = R // 10
    if total == 0.0 or lo < 1:
        return total, False
    before = float(partial[lo - 1])
    return total, bool(before > 0.0 and total > growth * before)


def degree(F, basis: KLBasis, divergence_threshold: float = DIVERGENCE_GROWTH,
           cap: int = DEGREE_CAP) -> int:
    """Largest ``j <= cap`` with a finite ``H_{C_j}`` norm; ``-1`` when even ``j = 0`` diverges.

    A heuristic on the finite grid, not a certified value.
    """
    d = -1
    for j in range(cap + 1):
        _, divergent = hcj_norm(F, basis, j, divergence_threshold)
        if divergent:
            break
        d = j
    return d


def variance_identities(C, basis: KLBasis, n: int):
    """Residual variance ``C(t,t) - sum_{k<=n} lambda_k |phi_k(t)|^2`` and scalar checks.

    The dict holds the quadrature of the residual variance (expected
    ``||f - S_n||^2``), the eigenvalue tail ``sum_{k>n} lambda_k`` and the
    trace of ``C``; the first two agree exactly on the grid.
    """
    R = basis.eigenvalues.size
    if n < 0 or n > R:
        raise ValueError(f"n must lie in [0, {R}]")
    Cm = _matrix(C)
    diag = np.real(np.diag(Cm))
    resid = diag - basis.eigenvalues[:n] @ np.abs(basis.functions[:n]) ** 2
    w = basis.grid.weights
    checks = {
        "residual_energy": float(resid @ w),
        "eigenvalue_tail": float(np.sum(basis.eigenvalues[n:])),
        "trace": float(diag @ w),
    }
    return resid, checks


def spectral_apply(F, basis: KLBasis) -> np.ndarray:
    """``T F`` through the retained eigenpairs (the operator the ``H_{C_j}`` scale uses)."""
    R = basis.rank
    c = basis.coefficients(F)[:R]
    return (c * basis.eigenvalues[:R]) @ basis.functions[:R]


def trace_norm(C, grid: Grid) -> float:
    return float(np.real(np.diag(_matrix(C))) @ grid.weights)


def energy_bound(basis: KLBasis, n: int) -> float:
    """``sum_{k<=n} lambda_k``: no n-dimensional system captures more."""
    return float(np.sum(basis.eigenvalues[:n]))


def relative_frobenius(A, B) -> float:
    return float(np.linalg.norm(A - B) / max(np.linalg.norm(B), math.ulp(0.0)))
