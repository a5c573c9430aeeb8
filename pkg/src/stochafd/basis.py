"""Orthonormal systems and decomposition records shared by every method."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import Grid, InnerProductMode

DEFAULT_ORTH_TOL = 1e-8


@dataclass(eq=False)
class OrthonormalSystem:
    """Ordered orthonormal functions ``E_1..E_n`` sampled on a grid.

    ``functions`` has shape ``(n, m)``.  ``params`` records the kernel
    descriptors the functions were built from (empty for eigenbases).
    ``triangular`` holds the Gram-Schmidt relation ``K_j = sum_k U[k, j] E_k``
    when the system came out of :func:`stochafd.core.gs_extend`.
    """

    functions: np.ndarray
    grid: Grid
    mode: InnerProductMode
    params: tuple = ()
    triangular: Optional[np.ndarray] = None
    gram_defect: float = 0.0

    def __post_init__(self):
        self.functions = np.atleast_2d(np.asarray(self.functions, dtype=complex))
        if self.functions.size == 0:
            self.functions = np.zeros((0, self.grid.size), dtype=complex)
        self.mode = InnerProductMode(self.mode)
        self.params = tuple(self.params)

    def __len__(self):
        return self.functions.shape[0]

    @classmethod
    def empty(cls, grid: Grid, mode: InnerProductMode) -> "OrthonormalSystem":
        return cls(np.zeros((0, grid.size), dtype=complex), grid, mode, (), np.zeros((0, 0), dtype=complex))

    def weighted(self) -> np.ndarray:
        """Rows ``scale * w * conj(E_k)``: multiplying a sample vector gives ``<f, E_k>``."""
        return self.mode.scale * self.grid.weights * np.conj(self.functions)

    def gram(self) -> np.ndarray:
        return self.weighted().conj() @ np.conj(self.functions).T

    def measure_defect(self) -> float:
        n = len(self)
        if n == 0:
            return 0.0
        return float(np.max(np.abs(self.gram() - np.eye(n))))

    def coefficients(self, f) -> np.ndarray:
        """``<f, E_k>`` for a vector ``(m,)`` or a stack of paths ``(p, m)``."""
        return np.asarray(f) @ self.weighted().T

    def synthesize(self, coeffs, n: Optional[int] = None) -> np.ndarray:
        n = len(self) if n is None else n
        coeffs = np.asarray(coeffs)
        return coeffs[..., :n] @ self.functions[:n]

    def truncated(self, n: int) -> "OrthonormalSystem":
        tri = None if self.triangular is None else self.triangular[:n, :n]
        return OrthonormalSystem(self.functions[:n], self.grid, self.mode,
                                 self.params[:n], tri, self.gram_defect)

    def lebesgue_functions(self) -> np.ndarray:
        """The same functions rescaled to unit Lebesgue norm."""
        return self.functions * np.sqrt(self.mode.scale)


@dataclass(eq=False)
class Decomposition:
    """Result of any of the decomposition methods.

    ``coefficients`` is ``(paths, n)``; a deterministic run has one row.
    ``residual_energy[k]`` is the (mean) squared remainder norm after ``k+1``
    terms and ``captured_energy[k]`` the matching covariance energy.  When
    ``analytic`` is set the system expands analytic signals and real paths are
    recovered as ``2 Re`` of the partial sums.
    """

    method: str
    family: Optional[str]
    system: OrthonormalSystem
    coefficients: np.ndarray
    residual_energy: list = field(default_factory=list)
    captured_energy: list = field(default_factory=list)
    mean: Optional[np.ndarray] = None
    analytic: bool = False
    eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self):
        self.coefficients = np.atleast_2d(np.asarray(self.coefficients, dtype=complex))
        if self.mean is None:
            self.mean = np.zeros(self.grid.size)

    @property
    def grid(self) -> Grid:
        return self.system.grid

    @property
    def n_terms(self) -> int:
        return len(self.system)

    @property
    def params(self) -> tuple:
        return self.system.params

    def truncated(self, n: int) -> "Decomposition":
        """The first ``n`` terms as a decomposition of its own."""
        if n > self.n_terms:
            raise ValueError(f"decomposition has only {self.n_terms} terms, asked for {n}")
        out = Decomposition(self.method, self.family, self.system.truncated(n),
                            self.coefficients[:, :n], list(self.residual_energy[:n]),
                            list(self.captured_energy[:n]), self.mean, self.analytic,
                            None if self.eigenvalues is None else self.eigenvalues[:n])
        return out

    def reconstruct(self, n: Optional[int] = None, path: Optional[int] = None) -> np.ndarray:
        """Partial sum with ``n`` terms for one path (or all paths when ``path`` is None)."""
        n = self.n_terms if n is None else n
        if n > self.n_terms:
            raise ValueError(f"decomposition has only {self.n_terms} terms, asked for {n}")
        coeffs = self.coefficients if path is None else self.coefficients[path]
        partial = self.system.synthesize(coeffs, n)
        if self.analytic:
            partial = 2.0 * partial.real
        out = self.mean + partial
        if np.isrealobj(self.mean) and (self.analytic or np.all(np.abs(np.imag(out)) == 0)):
            out = np.real(out)
        return out
