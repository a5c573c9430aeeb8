"""Quadrature grids, inner products, Hermitian eigensolvers and error metrics.

Boundary functions are plain numpy vectors sampled on a :class:`Grid`; nothing
here wraps them in a class.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure

TWO_PI = 2.0 * math.pi


class InnerProductMode(str, enum.Enum):
    """Measure used for boundary inner products.

    ``LEBESGUE`` integrates against ``dt``; ``NORMALIZED_ARC`` against
    ``dt / 2pi``.  Hardy-space identities such as ``||k_a||^2 = 1/(1-|a|^2)``
    hold in the normalized mode, covariance/KL quantities in the Lebesgue one.
    """

    LEBESGUE = "lebesgue"
    NORMALIZED_ARC = "normalized_arc"

    @property
    def scale(self) -> float:
        return 1.0 if self is InnerProductMode.LEBESGUE else 1.0 / TWO_PI


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature nodes ``t_i`` (radians) with positive weights ``w_i``."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if nodes.size < 2:
            raise ValueError("a grid needs at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
            raise ValueError("grid weights must be positive and finite")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def points(self) -> np.ndarray:
        """Nodes mapped to the unit circle, ``exp(i t)``."""
        return np.exp(1j * self.nodes)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])

    def is_periodic_uniform(self) -> bool:
        """True for a uniform trapezoid grid covering exactly ``[0, 2pi]``."""
        a, b = self.span
        h = np.diff(self.nodes)
        return (abs(a) < 1e-12 and abs(b - TWO_PI) < 1e-12
                and np.allclose(h, h[0], rtol=1e-10, atol=0))

    def describe(self) -> dict:
        a, b = self.span
        return {"kind": "trapezoid", "m": self.size, "a": a, "b": b}

    def same_as(self, other: "Grid") -> bool:
        return self is other or (self.size == other.size
                                 and np.array_equal(self.nodes, other.nodes)
                                 and np.array_equal(self.weights, other.weights))


def trapezoid_grid(m: int, a: float = 0.0, b: float = TWO_PI) -> Grid:
    """Uniform nodes on ``[a, b]`` with composite trapezoid weights.

    >>> g = trapezoid_grid(3, 0, 2)
    >>> g.nodes.tolist(), g.weights.tolist()
    ([0.0, 1.0, 2.0], [0.5, 1.0, 0.5])
    """
    if int(m) != m or m < 2:
        raise ValueError(f"trapezoid grid needs m >= 2 nodes, got {m}")
    if not a < b:
        raise ValueError(f"empty interval [{a}, {b}]")
    m = int(m)
    nodes = np.linspace(a, b, m)
    h = (b - a) / (m - 1)
    weights = np.full(m, h)
    weights[0] = weights[-1] = 0.5 * h
    return Grid(nodes, weights)


def check_on_grid(f, grid: Grid, name: str = "f") -> np.ndarray:
    f = np.asarray(f)
    if f.shape[-1] != grid.size:
        raise ValueError(f"{name} has {f.shape[-1]} samples but the grid has {grid.size} nodes")
    return f


def inner_product(f, g, grid: Grid, mode: InnerProductMode = InnerProductMode.LEBESGUE) -> complex:
    """Quadrature of ``f * conj(g)``; divided by ``2pi`` in normalized-arc mode."""
    f = check_on_grid(f, grid, "f")
    g = check_on_grid(g, grid, "g")
    mode = InnerProductMode(mode)
    return complex(mode.scale * np.sum(grid.weights * f * np.conj(g)))


def norm(f, grid: Grid, mode: InnerProductMode = InnerProductMode.LEBESGUE) -> float:
    f = check_on_grid(f, grid)
    mode = InnerProductMode(mode)
    return math.sqrt(mode.scale * float(np.sum(grid.weights * np.abs(f) ** 2)))


def rel_error(f, approx, grid: Grid, squared: bool = False) -> float:
    """Lebesgue-norm relative error ``||f - approx|| / ||f||``.

    With ``squared=True`` the energy ratio ``||f - approx||^2 / ||f||^2`` is
    returned instead; the published error tables scale like the KL energy
    tail, i.e. like this squared ratio.  A zero target gives ``inf`` (or 0
    when ``approx`` is zero as well) with a ``RuntimeWarning``.
    """
    f = check_on_grid(f, grid, "f")
    approx = check_on_grid(approx, grid, "approx")
    den = norm(f, grid)
    num = norm(f - approx, grid)
    if den == 0.0:
        warnings.warn("relative error of a zero target is undefined", RuntimeWarning, stacklevel=2)
        return 0.0 if num == 0.0 else math.inf
    ratio = num / den
    return ratio * ratio if squared else ratio


# ---------------------------------------------------------------------------
# Hermitian eigensolvers
# ---------------------------------------------------------------------------

def _round_robin(n: int):
    """Yield n-1 rounds of n/2 disjoint index pairs (circle method, n even)."""
    players = list(range(n))
    for _ in range(n - 1):
        half = n // 2
        yield np.array(players[:half]), np.array(players[half:][::-1])
        players = [players[0], players[-1]] + players[1:-1]


def jacobi_eig(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi diagonalisation of a Hermitian matrix.

    Rotations are scheduled in round-robin order so that every round acts on
    ``n/2`` disjoint pairs at once, which vectorises each round into a few
    numpy fancy-indexing operations.  Complex entries are handled by first
    rotating the phase of ``a_pq`` onto the real axis.

    Returns unsorted eigenvalues and the accumulated unitary.
    """
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    if n == 1:
        return A.real.diagonal().copy(), np.eye(1, dtype=complex)
    pad = n % 2
    if pad:
        A = np.pad(A, ((0, 1), (0, 1)))
    N = A.shape[0]
    V = np.eye(N, dtype=complex)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), np.eye(n, dtype=complex)
    target = tol * scale
    rounds = list(_round_robin(N))
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(A.diagonal()))
        if off <= target:
            break
        for p, q in rounds:
            apq = A[p, q]
            mag = np.abs(apq)
            active = mag > 1e-300
            if not active.any():
                continue
            app = A[p, p].real
            aqq = A[q, q].real
            phase = np.where(active, apq / np.where(active, mag, 1.0), 1.0)
            theta = np.where(active, (aqq - app) / (2.0 * np.where(active, mag, 1.0)), 0.0)
            t = np.where(active, np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)), 0.0)
            t = np.where(active & (theta == 0.0), 1.0, t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # G = diag(1, conj(phase)) @ [[c, s], [-s, c]] applied on columns (p, q)
            g_pp, g_pq = c, s
            g_qp, g_qq = -s * np.conj(phase), c * np.conj(phase)
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = Ap * g_pp + Aq * g_qp
            A[:, q] = Ap * g_pq + Aq * g_qq
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = np.conj(g_pp)[:, None] * Ap + np.conj(g_qp)[:, None] * Aq
            A[q, :] = np.conj(g_pq)[:, None] * Ap + np.conj(g_qq)[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = Vp * g_pp + Vq * g_qp
            V[:, q] = Vp * g_pq + Vq * g_qq
    else:
        off = np.linalg.norm(A - np.diag(A.diagonal()))
        if off > target:
            raise NumericalFailure(f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off:.3e})")
    if pad:
        # the padded zero row/column decouples; drop its eigenpair
        diag = A.diagonal().real
        keep = np.argsort(np.abs(V[-1, :]))[:-1]
        return diag[keep], V[:n, keep]
    return A.diagonal().real.copy(), V


def sym_eig(A, tol: float = 1e-12, max_sweeps: int = 100, method: str = "lapack"):
    """Eigenpairs of a Hermitian matrix, eigenvalues in descending order.

    ``method="jacobi"`` runs :func:`jacobi_eig`; the default delegates to
    LAPACK's ``heevd`` through :func:`numpy.linalg.eigh`, which is the only
    practical choice for the ~2000-node Nystrom problems.

    Raises ``ValueError`` when ``A`` is not Hermitian within ``tol`` (relative
    to its Frobenius norm) and :class:`NumericalFailure` if Jacobi stalls.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("sym_eig needs a square matrix")
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    asym = np.linalg.norm(A - A.conj().T) / scale
    if asym > max(tol, 1e-14) * 10:
        raise ValueError(f"matrix is not Hermitian (relative asymmetry {asym:.2e})")
    H = 0.5 * (A + A.conj().T)
    real_input = not np.iscomplexobj(H)
    if method == "jacobi":
        vals, vecs = jacobi_eig(H, tol=tol, max_sweeps=max_sweeps)
    elif method == "lapack":
        vals, vecs = np.linalg.eigh(H)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    order = np.argsort(-vals, kind="stable")
    vals = np.asarray(vals[order], dtype=float)
    vecs = vecs[:, order]
    if real_input:
        vecs = _realify(vecs)
    return vals, vecs


def _realify(vecs):
    # eigenvectors of a real symmetric matrix can be chosen real; Jacobi on a
    # real input never leaves the real axis apart from roundoff
    if not np.iscomplexobj(vecs):
        return vecs
    if np.max(np.abs(vecs.imag)) < 1e-10 * max(1.0, np.max(np.abs(vecs.real))):
        return vecs.real.copy()
    return vecs
