"""Finite-difference grids and sparse assembly of the model operators.

Matrices act on *mesh-weighted* coordinates ``v_i = sqrt(w_i) u_i`` where
``u_i`` are nodal values and ``w_i`` the dual-cell widths.  In these
coordinates the Euclidean norm is the discrete L^2 norm and the
nonuniform three-point Laplacian becomes a symmetric matrix, so every
assembled operator without a conjugation weight is complex symmetric.
Use :meth:`Grid1D.to_nodal` / :meth:`Grid2D.to_nodal` to get nodal values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.optimize import brentq

from .model import ModelConfig, Potential, agmon_phi, agmon_phi_prime

__all__ = [
    "Grid1D",
    "Grid2D",
    "AgmonWeight",
    "AssemblyTooLarge",
    "uniform_grid",
    "graded_grid",
    "make_grid2d",
    "t_extent",
    "second_derivative_matrix",
    "skew_first_order_matrix",
    "assemble_airy_1d",
    "assemble_schrodinger_1d",
    "assemble_L2d",
    "assemble_T2d",
    "to_csc",
    "export_matrix_market",
]

MAX_ADJACENT_RATIO = 1.2


class AssemblyTooLarge(MemoryError):
    """Requested problem exceeds the configured unknown cap."""


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Interior nodes of a 1-D mesh on (lower, upper); boundary nodes are eliminated.

    Attributes
    ----------
    nodes : ndarray
        Strictly increasing interior coordinates.
    lower, upper : float
        Dirichlet boundary coordinates.
    kind : {"uniform", "graded"}
    stretch : float
        Grading strength (0 for a uniform grid).
    """

    nodes: np.ndarray
    lower: float
    upper: float
    kind: str = "uniform"
    stretch: float = 0.0

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 1:
            raise ValueError("degenerate grid: need at least one interior node")
        if not (self.lower < nodes[0] and nodes[-1] < self.upper):
            raise ValueError("nodes must lie strictly inside (lower, upper)")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if self.kind not in ("uniform", "graded"):
            raise ValueError("kind must be 'uniform' or 'graded'")
        if self.stretch < 0:
            raise ValueError("stretch must be nonnegative")
        if self.kind == "graded" and self.max_adjacent_ratio() > MAX_ADJACENT_RATIO + 1e-12:
            raise ValueError("graded grid exceeds the adjacent spacing ratio bound")

    @property
    def n(self) -> int:
        return self.nodes.size

    def __len__(self):
        return self.nodes.size

    @property
    def full(self) -> np.ndarray:
        """Nodes including both boundary points."""
        return np.concatenate([[self.lower], self.nodes, [self.upper]])

    @property
    def spacings(self) -> np.ndarray:
        """Cell lengths, ``n + 1`` of them."""
        return np.diff(self.full)

    @property
    def weights(self) -> np.ndarray:
        """Dual-cell widths (x_{i+1} - x_{i-1}) / 2."""
        s = self.spacings
        return 0.5 * (s[:-1] + s[1:])

    @property
    def dual_edges(self) -> np.ndarray:
        """Dual-cell edges: midpoints of consecutive nodes, boundaries included (``n + 1`` values)."""
        f = self.full
        return 0.5 * (f[:-1] + f[1:])

    def max_adjacent_ratio(self) -> float:
        s = self.spacings
        if s.size < 2:
            return 1.0
        r = s[1:] / s[:-1]
        return float(np.max(np.maximum(r, 1.0 / r)))

    def key(self) -> tuple:
        """Hashable identity used by caches."""
        return (self.n, self.lower, self.upper, self.kind, self.stretch,
                float(self.nodes[0]), float(self.nodes[-1]))

    def to_nodal(self, v):
        return np.asarray(v) / np.sqrt(self.weights)

    def from_nodal(self, u):
        return np.asarray(u) * np.sqrt(self.weights)


def uniform_grid(lower: float, upper: float, n: int) -> Grid1D:
    """``n`` equispaced interior nodes of (lower, upper)."""
    if n < 1 or not upper > lower:
        raise ValueError("degenerate grid")
    nodes = lower + (upper - lower) * np.arange(1, n + 1) / (n + 1)
    return Grid1D(nodes, float(lower), float(upper), "uniform", 0.0)


def graded_grid(half_width: float, n: int, min_spacing: float, center: float = 0.0) -> Grid1D:
    """Grid on (center - X, center + X) clustered at ``center``.

    A uniform computational grid xi in (-1, 1) is mapped by
    ``x = center + X sinh(beta xi) / sinh(beta)``.  ``beta`` is chosen so
    the spacing at the center is about ``min_spacing``, then reduced if
    needed to keep adjacent cells within a ratio of 1.2.  If the uniform
    grid is already fine enough, ``beta = 0``.
    """
    X = float(half_width)
    if n < 1 or X <= 0 or min_spacing <= 0:
        raise ValueError("degenerate grid")
    dxi = 2.0 / (n + 1)
    xi = -1.0 + dxi * np.arange(1, n + 1)

    def center_spacing(beta):
        return X * dxi * (1.0 if beta == 0 else beta / math.sinh(beta))

    if center_spacing(0.0) <= min_spacing:
        beta = 0.0
    else:
        beta = brentq(lambda b: center_spacing(b) - min_spacing, 1e-12, 60.0, xtol=1e-14)

    def build(beta):
        if beta == 0.0:
            nodes = X * xi
        else:
            nodes = X * np.sinh(beta * xi) / math.sinh(beta)
        nodes = 0.5 * (nodes - nodes[::-1])  # exact mirror symmetry
        return nodes + center

    def ratio(beta):
        full = np.concatenate([[center - X], build(beta), [center + X]])
        s = np.diff(full)
        if s.size < 2:
            return 1.0
        r = s[1:] / s[:-1]
        return float(np.max(np.maximum(r, 1.0 / r)))

    if beta > 0 and ratio(beta) > MAX_ADJACENT_RATIO:
        lo, hi = 0.0, beta
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if ratio(mid) > MAX_ADJACENT_RATIO:
                hi = mid
            else:
                lo = mid
        beta = lo
    return Grid1D(build(beta), center - X, center + X, "graded", float(beta))


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Tensor grid; unknown ``(i, j)`` with x-index i and y-index j sits at ``i * ny + j``."""

    gx: Grid1D
    gy: Grid1D

    @property
    def shape(self) -> tuple:
        return (self.gx.n, self.gy.n)

    @property
    def n(self) -> int:
        return self.gx.n * self.gy.n

    @property
    def weights(self) -> np.ndarray:
        """Mesh weights as a (nx, ny) array."""
        return np.outer(self.gx.weights, self.gy.weights)

    def to_nodal(self, v):
        """Weighted vector -> (nx, ny) array of nodal values."""
        return np.asarray(v).reshape(self.shape) / np.sqrt(self.weights)

    def from_nodal(self, u):
        """(nx, ny) nodal array -> flat weighted vector."""
        return (np.asarray(u).reshape(self.shape) * np.sqrt(self.weights)).ravel()


def t_extent(h: float) -> float:
    """Height of the t-interval used for the unscaled operator: max(0.5, 8 h^{2/3})."""
    return max(0.5, 8.0 * h ** (2.0 / 3.0))


def make_grid2d(cfg: ModelConfig, mode: str = "L", nx: Optional[int] = None,
                ny: Optional[int] = None, min_spacing: Optional[float] = None) -> Grid2D:
    """Default tensor grid for a configuration.

    ``mode="L"`` uses (0, Y) in the rescaled variable y; ``mode="T"`` uses
    (0, t_extent(h)) in the physical variable t.
    """
    nx = cfg.nx if nx is None else nx
    ny = cfg.ny if ny is None else ny
    X = cfg.x_extent
    if cfg.grading == "graded":
        target = math.sqrt(cfg.h) / cfg.min_spacing_ratio if min_spacing is None else min_spacing
        gx = graded_grid(X, nx, target)
    else:
        gx = uniform_grid(-X, X, nx)
    if mode == "L":
        gy = uniform_grid(0.0, cfg.y_extent, ny)
    elif mode == "T":
        gy = uniform_grid(0.0, t_extent(cfg.h), ny)
    else:
        raise ValueError("mode must be 'L' or 'T'")
    return Grid2D(gx, gy)


@dataclass(frozen=True)
class AgmonWeight:
    """Conjugation weight Phi and its derivative, both vectorized callables."""

    phi: Callable
    dphi: Callable

    @classmethod
    def from_potential(cls, potential: Potential, mu: float) -> "AgmonWeight":
        return cls(lambda x: agmon_phi(potential, mu, x),
                   lambda x: agmon_phi_prime(potential, mu, x))


def to_csc(m) -> sp.csc_matrix:
    """Canonical storage: CSC, sorted indices, no explicit zeros."""
    m = sp.csc_matrix(m, dtype=complex)
    m.eliminate_zeros()
    m.sort_indices()
    return m


def second_derivative_matrix(g: Grid1D, symmetric: bool = True) -> sp.csc_matrix:
    """Three-point discretization of -d^2/dx^2 with Dirichlet ends.

    Parameters
    ----------
    g : Grid1D
        At least 3 interior nodes.
    symmetric : bool
        Return the matrix for mesh-weighted unknowns (symmetric).  With
        ``False`` the nodal stencil is returned; it is exact on quadratics.
    """
    if g.n < 3:
        raise ValueError("degenerate grid: need at least 3 interior nodes")
    s = g.spacings
    hl, hr = s[:-1], s[1:]
    w = 0.5 * (hl + hr)
    main = (1.0 / hl + 1.0 / hr) / w
    if symmetric:
        off = -1.0 / (hr[:-1] * np.sqrt(w[:-1] * w[1:]))
        return to_csc(sp.diags([off, main, off], [-1, 0, 1]))
    upper = -1.0 / (hr[:-1] * w[:-1])
    lower = -1.0 / (hl[1:] * w[1:])
    return to_csc(sp.diags([lower, main, upper], [-1, 0, 1]))


def skew_first_order_matrix(g: Grid1D, coeff) -> sp.csc_matrix:
    """Centered discretization of ``c d/dx + d/dx c`` in weighted coordinates.

    The result is real skew-symmetric; ``coeff`` holds c at the nodes.
    """
    c = np.asarray(coeff, dtype=float)
    w = g.weights
    off = 0.5 * (c[:-1] + c[1:]) / np.sqrt(w[:-1] * w[1:])
    return to_csc(sp.diags([-off, off], [-1, 1]))


def assemble_airy_1d(omega: float, g: Grid1D) -> sp.csc_matrix:
    """Discrete D_y^2 + i omega y on (0, Y) with Dirichlet ends."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    return to_csc(second_derivative_matrix(g) + sp.diags(1j * omega * g.nodes))


def _x_part(h, potential, g, weight):
    hx = h * h * second_derivative_matrix(g) + sp.diags(1j * potential(g.nodes))
    if weight is not None:
        dphi = np.asarray(weight.dphi(g.nodes), dtype=float)
        hx = hx + h * skew_first_order_matrix(g, dphi) - sp.diags(dphi * dphi)
    return hx


def assemble_schrodinger_1d(h: float, potential: Potential, g: Grid1D,
                            phi_weight: Optional[AgmonWeight] = None) -> sp.csc_matrix:
    """Discrete (hD)^2 + iV, optionally conjugated by exp(Phi/h).

    With a weight the matrix represents (hD + i Phi')^2 + iV, that is
    h^2 (-d^2) + h (Phi' d + d Phi') - Phi'^2 + iV; it is no longer
    symmetric because the first-order part is skew.
    """
    return to_csc(_x_part(h, potential, g, phi_weight))


def _check_size(cfg, g2):
    if g2.n > cfg.max_unknowns:
        raise AssemblyTooLarge(f"{g2.n} unknowns exceed the cap {cfg.max_unknowns}")


def _assemble_2d(hx, ty, coupling, alpha_x, y):
    nx, ny = hx.shape[0], ty.shape[0]
    m = sp.kron(hx, sp.identity(ny), format="csc") + sp.kron(sp.identity(nx), ty, format="csc")
    m = m + sp.diags(1j * coupling * np.kron(alpha_x, y))
    return to_csc(m)


def assemble_L2d(cfg: ModelConfig, g: Grid2D, weight: Optional[AgmonWeight] = None) -> sp.csc_matrix:
    """Discrete h^{2/3}(D_y^2 + i alpha(x) y) + (hD_x)^2 + iV(x) on the tensor grid.

    ``weight`` conjugates the x-part by exp(Phi(x)/h).
    """
    _check_size(cfg, g)
    h = cfg.h
    s = h ** (2.0 / 3.0)
    hx = _x_part(h, cfg.potential, g.gx, weight)
    ty = s * second_derivative_matrix(g.gy)
    return _assemble_2d(hx, ty, s, cfg.alpha(g.gx.nodes), g.gy.nodes)


def assemble_T2d(cfg: ModelConfig, g: Grid2D) -> sp.csc_matrix:
    """Discrete -h^2(d_s^2 + d_t^2) + i alpha(s) t + iV(s) with t on (0, T)."""
    _check_size(cfg, g)
    h = cfg.h
    hx = _x_part(h, cfg.potential, g.gx, None)
    tt = h * h * second_derivative_matrix(g.gy)
    return _assemble_2d(hx, tt, 1.0, cfg.alpha(g.gx.nodes), g.gy.nodes)


def export_matrix_market(m, path) -> None:
    """Write ``m`` as a complex general Matrix Market file."""
    scipy.io.mmwrite(str(path), to_csc(m), field="complex", symmetry="general")
