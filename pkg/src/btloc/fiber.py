"""Transverse (fiber) objects: the complex Airy ground state and its projector.

For each x the fiber operator ``D_y^2 + i alpha(x) y`` on (0, inf) with a
Dirichlet condition has the simple ground state::

    u_{alpha,x}(y) = c_alpha Ai(e^{i pi/6} alpha^{1/3} y + z_1)

normalized with the *bilinear* pairing ``int u^2 dy = 1``.  Note that the
pairing is not conjugated; :func:`bilinear` and :func:`hermitian` are kept
as distinct primitives.

Also here: the self-adjoint virial identities and the numerical-range
curve of the complex Airy operator along dilations of its real ground
state.
"""

from __future__ import annotations

import cmath
import math
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .discretize import Grid1D, Grid2D, second_derivative_matrix
from .eigensolve import tridiagonal_inverse_iteration
from .specfn import airy_pair, airy_zero

__all__ = [
    "FiberEigenfunction",
    "bilinear",
    "hermitian",
    "airy_square_tail",
    "build_u1",
    "build_u_alpha_x",
    "discrete_fiber",
    "fiber_matrix",
    "project_pi1",
    "virial_checks",
    "numerical_range_curve",
    "rayleigh_quotient_dilation",
    "triangle_contains",
    "range_contains_eigenvalue",
    "shifted_rayleigh_real_parts",
]

E_PI_6 = cmath.exp(1j * math.pi / 6)
E_PI_3 = cmath.exp(1j * math.pi / 3)
E_MINUS_PI_4 = cmath.exp(-1j * math.pi / 4)


def bilinear(f, g, weights):
    """Unconjugated pairing sum_j w_j f_j g_j."""
    return np.sum(np.asarray(weights) * np.asarray(f) * np.asarray(g), axis=-1)


def hermitian(f, g, weights):
    """Hermitian inner product sum_j w_j conj(f_j) g_j."""
    return np.sum(np.asarray(weights) * np.conj(f) * np.asarray(g), axis=-1)


@dataclass(frozen=True, eq=False)
class FiberEigenfunction:
    """Samples of a fiber ground state on the interior nodes of a y-grid.

    Attributes
    ----------
    y : ndarray
        Interior nodes.
    values : ndarray
        Nodal samples.
    c : complex
        Normalization constant multiplying the Airy factor (for discrete
        fibers, the scalar that makes the grid pairing equal to one).
    x : float or None
    alpha_value : float
    eigenvalue : complex
    integral : complex
        Bilinear self-pairing: grid trapezoid plus exact tail.
    """

    y: np.ndarray
    values: np.ndarray
    c: complex
    x: Optional[float]
    alpha_value: float
    eigenvalue: complex
    integral: complex


def _airy_antiderivative(t):
    """F(t) = t Ai(t)^2 - Ai'(t)^2, a primitive of Ai(t)^2."""
    a, ap = airy_pair(t, check=False)
    return t * a * a - ap * ap


def airy_square_tail(scale: complex, Y: float) -> complex:
    """Exact value of int_Y^inf Ai(scale*y + z_1)^2 dy.

    Valid when ``scale`` points into the sector where Ai decays
    (|arg scale| < pi/3), so the primitive vanishes at infinity.
    """
    t = scale * Y + airy_zero(1)
    return complex(-_airy_antiderivative(t) / scale)


def _grid_square_integral(scale: complex, g: Grid1D) -> complex:
    """Trapezoid of Ai(scale*y + z1)^2 over [0, upper] plus the exact tail."""
    z1 = airy_zero(1)
    vals = airy_pair(scale * g.nodes + z1, check=False)[0]
    end = airy_pair(scale * g.upper + z1, check=False)[0]
    # the y = 0 endpoint contributes nothing since Ai(z1) = 0
    trap = np.sum(g.weights * vals * vals) + 0.5 * g.spacings[-1] * end * end
    return complex(trap + airy_square_tail(scale, g.upper))


class _NormalizationMemo:
    """Normalization integrals keyed by (alpha value, grid); thread-safe insertion."""

    def __init__(self):
        self._data = {}
        self._lock = threading.Lock()

    def get(self, alpha_value: float, g: Grid1D) -> complex:
        key = (float(alpha_value), g.key())
        val = self._data.get(key)
        if val is None:
            val = _grid_square_integral(E_PI_6 * alpha_value ** (1.0 / 3.0), g)
            with self._lock:
                self._data.setdefault(key, val)
                val = self._data[key]
        return val

    def clear(self):
        with self._lock:
            self._data.clear()


_MEMO = _NormalizationMemo()


def _fiber(alpha_value: float, g: Grid1D, x) -> FiberEigenfunction:
    if not alpha_value > 0:
        raise ValueError("alpha(x) must be positive")
    integral = _MEMO.get(alpha_value, g)
    if not np.isfinite(integral) or integral == 0:
        raise ArithmeticError("fiber normalization quadrature failed")
    scale = E_PI_6 * alpha_value ** (1.0 / 3.0)
    c = 1.0 / cmath.sqrt(integral)
    vals = c * airy_pair(scale * g.nodes + airy_zero(1), check=False)[0]
    lam = alpha_value ** (2.0 / 3.0) * abs(airy_zero(1)) * E_PI_3
    return FiberEigenfunction(g.nodes, vals, c, x, float(alpha_value), lam,
                              complex(integral * c * c))


def build_u1(y_grid: Grid1D) -> FiberEigenfunction:
    """Ground state u_1(y) = c Ai(e^{i pi/6} y + z_1) with int u_1^2 = 1.

    ``c`` comes from trapezoid quadrature on the grid plus the exact tail
    beyond its upper end, so any grid covering the decay region works.
    """
    if y_grid.lower != 0.0:
        raise ValueError("the y-grid must start at 0")
    return _fiber(1.0, y_grid, None)


def build_u_alpha_x(alpha, x: float, y_grid: Grid1D) -> FiberEigenfunction:
    """Rescaled ground state alpha^{1/6} u_1(alpha^{1/3} y) for alpha = alpha(x)."""
    if y_grid.lower != 0.0:
        raise ValueError("the y-grid must start at 0")
    return _fiber(float(alpha(x)), y_grid, float(x))


def discrete_fiber(alpha_value: float, y_grid: Grid1D, shift=None, start=None) -> FiberEigenfunction:
    """Ground state of the discretized fiber operator itself.

    Inverse iteration on the tridiagonal matrix of D_y^2 + i alpha y near
    ``shift`` (default: the continuum eigenvalue).  Any real ``alpha`` is
    accepted, which is how columns with alpha <= 0 are handled.  Values are
    nodal and normalized so that the grid pairing is one.
    """
    s = second_derivative_matrix(y_grid)
    diag = s.diagonal() + 1j * alpha_value * y_grid.nodes
    off = s.diagonal(1)
    if shift is None:
        if alpha_value > 0:
            shift = alpha_value ** (2.0 / 3.0) * abs(airy_zero(1)) * E_PI_3
        elif alpha_value < 0:
            shift = (abs(alpha_value) ** (2.0 / 3.0) * abs(airy_zero(1)) * E_PI_3).conjugate()
        else:
            shift = (math.pi / y_grid.upper) ** 2
    v0 = None if start is None else y_grid.from_nodal(start)
    lam, v = tridiagonal_inverse_iteration(diag, off, shift, iterations=4, v0=v0)
    u = y_grid.to_nodal(v)
    pair = bilinear(u, u, y_grid.weights)
    c = 1.0 / cmath.sqrt(pair)
    u = u * c
    if start is not None and np.real(np.sum(u * np.conj(start))) < 0:
        u, c = -u, -c
    elif start is None and u[0].real < 0:
        u, c = -u, -c
    return FiberEigenfunction(y_grid.nodes, u, c, None, float(alpha_value), lam, complex(1.0))


def fiber_matrix(alpha, grid: Grid2D, kind: str = "analytic"):
    """Fiber ground states for every x-column.

    Parameters
    ----------
    alpha : AlphaProfile
    grid : Grid2D
    kind : {"analytic", "discrete"}
        ``analytic`` samples the closed form and marks columns with
        alpha <= 0 invalid; ``discrete`` uses the eigenvector of the
        discretized fiber operator, continued from x = 0 outward.

    Returns
    -------
    (U, valid)
        ``U`` has shape (nx, ny); ``valid`` flags usable columns.
    """
    xs = grid.gx.nodes
    a = np.asarray(alpha(xs), dtype=float)
    nx, ny = grid.shape
    U = np.zeros((nx, ny), dtype=complex)
    if kind == "analytic":
        valid = a > 0
        z1 = airy_zero(1)
        for i in np.flatnonzero(valid):
            integral = _MEMO.get(a[i], grid.gy)
            scale = E_PI_6 * a[i] ** (1.0 / 3.0)
            U[i] = airy_pair(scale * grid.gy.nodes + z1, check=False)[0] / cmath.sqrt(integral)
        return U, valid
    if kind != "discrete":
        raise ValueError("kind must be 'analytic' or 'discrete'")
    valid = np.ones(nx, dtype=bool)
    mid = int(np.argmin(np.abs(xs)))
    first = discrete_fiber(a[mid], grid.gy)
    U[mid] = first.values
    for direction in (1, -1):
        prev = first
        i = mid + direction
        while 0 <= i < nx:
            prev = discrete_fiber(a[i], grid.gy, shift=prev.eigenvalue, start=prev.values)
            U[i] = prev.values
            i += direction
    return U, valid


def project_pi1(psi, alpha, grid: Grid2D, kind: str = "analytic", fibers=None):
    """Apply the fiberwise rank-one projector to nodal values ``psi`` (nx, ny).

    Each column becomes ``[<psi, u> / <u, u>] u`` with the bilinear grid
    pairing, so the discrete operator is an exact projection.  Columns
    where the fiber is undefined are mapped to zero.
    """
    psi = np.asarray(psi).reshape(grid.shape)
    U, valid = fiber_matrix(alpha, grid, kind) if fibers is None else fibers
    w = grid.gy.weights
    num = bilinear(psi, U, w)
    den = bilinear(U, U, w)
    coef = np.where(valid, num / np.where(valid, den, 1.0), 0.0)
    return coef[:, None] * U


def _full_trapezoid(values_full, full_nodes):
    return np.trapezoid(values_full, full_nodes)


def virial_checks(y_grid: Grid1D):
    """Kinetic and potential parts of the self-adjoint Airy ground state.

    For ``u = Ai(y + z_1) / ||Ai(. + z_1)||`` returns ``(a, b)`` with
    ``a = ||u'||^2`` and ``b = <y u, u>``, by trapezoid quadrature on the
    grid (boundary points included) using Ai' for the derivative.
    """
    y = y_grid.full
    ai, aip = airy_pair(y + airy_zero(1), check=False)
    norm2 = _full_trapezoid(ai * ai, y)
    a = _full_trapezoid(aip * aip, y) / norm2
    b = _full_trapezoid(y * ai * ai, y) / norm2
    return float(a), float(b)


def numerical_range_curve(gammas):
    """z(gamma) = |z_1| / (3 gamma^2) + 2 i gamma |z_1| / 3."""
    g = np.asarray(gammas, dtype=float)
    if np.any(g <= 0):
        raise ValueError("gamma must be positive")
    z1 = abs(airy_zero(1))
    out = z1 / (3.0 * g * g) + 2j * g * z1 / 3.0
    return out.item() if out.ndim == 0 else out


def rayleigh_quotient_dilation(gamma: float, y_grid: Grid1D) -> complex:
    """<A u_g, u_g> / ||u_g||^2 for u_g(y) = u(y / gamma), by quadrature.

    ``A = D_y^2 + i y`` and ``u`` is the real ground state of D_y^2 + y.
    Independent numerical counterpart of :func:`numerical_range_curve`;
    the grid has to reach about ``15 * gamma``.
    """
    y = y_grid.full
    ai, aip = airy_pair(y / gamma + airy_zero(1), check=False)
    norm2 = _full_trapezoid(ai * ai, y)
    kinetic = _full_trapezoid(aip * aip, y) / (gamma * gamma)
    potential = _full_trapezoid(y * ai * ai, y)
    return complex((kinetic + 1j * potential) / norm2)


def _cross(o, a, b):
    return (a.real - o.real) * (b.imag - o.imag) - (a.imag - o.imag) * (b.real - o.real)


def triangle_contains(a: complex, b: complex, c: complex, p: complex) -> bool:
    """Strict point-in-triangle test (False on the boundary)."""
    d1, d2, d3 = _cross(a, b, p), _cross(b, c, p), _cross(c, a, p)
    return bool((d1 > 0 and d2 > 0 and d3 > 0) or (d1 < 0 and d2 < 0 and d3 < 0))


def range_contains_eigenvalue(gamma: float) -> bool:
    """Is |z_1| e^{i pi/3} strictly inside the triangle z(gamma), z(1/gamma), z(1)?"""
    za, zb, zc = numerical_range_curve([gamma, 1.0 / gamma, 1.0])
    return triangle_contains(za, zb, zc, abs(airy_zero(1)) * E_PI_3)


def shifted_rayleigh_real_parts(gammas):
    """Re(e^{-i pi/4} (z(gamma) - lambda_1)) along the curve."""
    lam = abs(airy_zero(1)) * E_PI_3
    return np.real(E_MINUS_PI_4 * (np.asarray(numerical_range_curve(gammas)) - lam))
