"""Quantitative checks on computed eigenpairs.

Localization widths and their scaling with h, weighted (Agmon) norms,
the quasimode residual, the fiber projection deficit, eigenvalue
asymptotics and the flat-potential sharpness experiment.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .discretize import (
    AgmonWeight,
    Grid1D,
    Grid2D,
    assemble_L2d,
    assemble_schrodinger_1d,
    assemble_T2d,
    make_grid2d,
    second_derivative_matrix,
    uniform_grid,
)
from .eigensolve import EigenPair, shift_invert_arnoldi, twisted_eigenvector
from .fiber import fiber_matrix, project_pi1
from .model import (
    E_PI_4,
    ModelConfig,
    Potential,
    agmon_phi,
    config_from_dict,
    config_to_dict,
    kappa,
    lambda1,
    quasimode_eigenvalue,
    sharpness_potential,
)
from .specfn import airy_pair, airy_zero

__all__ = [
    "WidthReport",
    "ScalingFit",
    "SweepPoint",
    "AsymptoticsRow",
    "AsymptoticsTable",
    "SharpnessRow",
    "SharpnessReport",
    "AgmonOverflow",
    "RefinementCapReached",
    "SHIFT_POLICIES",
    "solve_lowest",
    "run_sweep",
    "marginal_quantile_width",
    "localization_widths",
    "scaling_fit",
    "log_agmon_ratio",
    "agmon_ratio",
    "quasimode_factors",
    "quasimode_residual",
    "quasimode_residual_history",
    "QUASIMODE_Y",
    "projection_deficit",
    "eigenvalue_asymptotics",
    "sharpness_experiment",
]

# the quasimode is not truncated in y; its Airy factor is below 1e-12 here
QUASIMODE_Y = 16.0


class AgmonOverflow(OverflowError):
    """The weighted norm ratio is not representable in double precision."""

    def __init__(self, log_value):
        super().__init__(f"weighted norm ratio exp({log_value:.6g}) overflows")
        self.log_value = log_value


class RefinementCapReached(RuntimeError):
    """Mesh refinement did not stabilize the quasimode residual."""


# ------------------------------------------------------------------ solving

SHIFT_POLICIES = ("quasimode", "leading")


def _shift_value(cfg: ModelConfig, policy: str) -> complex:
    if policy == "quasimode":
        return quasimode_eigenvalue(cfg)
    if policy == "leading":
        return complex(lambda1(cfg.alpha, 0.0) * cfg.h ** (2.0 / 3.0))
    raise ValueError(f"unknown shift policy {policy!r}")


def solve_lowest(cfg: ModelConfig, grid: Optional[Grid2D] = None, *, mode: str = "L",
                 weight_mu: Optional[float] = None, k: int = 2, tol: float = 1e-10,
                 seed: int = 0, shift: str = "quasimode", v0=None):
    """Smallest-modulus eigenpair near the two-term guess mu_1(h).

    Parameters
    ----------
    cfg : ModelConfig
    grid : Grid2D, optional
        Defaults to :func:`make_grid2d` for ``mode``.
    mode : {"L", "T"}
        Rescaled operator on (0, Y) or unscaled one on (0, T).
    weight_mu : float, optional
        Solve the operator conjugated by exp(phi_mu / h) instead.  The
        returned pair then carries ``log_scale = -phi_mu / h`` so that it
        still represents the eigenfunction of the original operator.
    k : int
        Number of eigenvalues computed around the shift; the one of
        smallest modulus is returned.
    shift : {"quasimode", "leading"}
        Shift mu_1(h) = lambda_1(0) h^{2/3} + e^{i pi/4} kappa h, or its
        first term only.

    Returns
    -------
    (EigenPair, Grid2D)
    """
    grid = make_grid2d(cfg, mode) if grid is None else grid
    weight = None
    if weight_mu is not None:
        if mode != "L":
            raise ValueError("weighted solves are only set up for the rescaled operator")
        weight = AgmonWeight.from_potential(cfg.potential, weight_mu)
    if mode == "L":
        m = assemble_L2d(cfg, grid, weight)
    elif mode == "T":
        m = assemble_T2d(cfg, grid)
    else:
        raise ValueError("mode must be 'L' or 'T'")
    sigma = _shift_value(cfg, shift)
    pairs = shift_invert_arnoldi(m, sigma, k=min(k, m.shape[0]), tol=tol, seed=seed, v0=v0)
    pair = min(pairs, key=lambda e: abs(e.value))
    if weight is not None:
        phi = np.asarray(weight.phi(grid.gx.nodes)) / cfg.h
        pair.log_scale = np.repeat(-phi, grid.gy.n)
    return pair, grid


@dataclass
class SweepPoint:
    n: int
    h: float
    cfg: ModelConfig
    grid: Grid2D
    pair: EigenPair


def _sweep_task(args):
    cfg_dict, n, kw = args
    cfg = config_from_dict(cfg_dict)
    pair, grid = solve_lowest(cfg, **kw)
    return n, pair.value, pair.vector, pair.residual, pair.log_scale


def run_sweep(base: ModelConfig, exponents: Sequence[int], *, mode: str = "L",
              weight_mu: Optional[float] = None, k: int = 2, tol: float = 1e-10,
              seed: int = 0, shift: str = "quasimode", workers: int = 1) -> list:
    """Solve at h = 2^-n for each n; results ordered by n.

    With ``workers > 1`` the solves run in a process pool; the result does
    not depend on the number of workers.
    """
    points = []
    cfgs = {n: base.with_h(2.0 ** -n) for n in exponents}
    kw = dict(mode=mode, weight_mu=weight_mu, k=k, tol=tol, seed=seed, shift=shift)
    if workers > 1:
        tasks = [(config_to_dict(cfgs[n]), n, kw) for n in exponents]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
        for n, value, vector, residual, log_scale in results:
            cfg = cfgs[n]
            points.append(SweepPoint(n, cfg.h, cfg, make_grid2d(cfg, mode),
                                     EigenPair(value, vector, residual, log_scale)))
    else:
        for n in exponents:
            cfg = cfgs[n]
            pair, grid = solve_lowest(cfg, **kw)
            points.append(SweepPoint(n, cfg.h, cfg, grid, pair))
    points.sort(key=lambda p: p.n)
    return points


# ------------------------------------------------------------------- widths

@dataclass(frozen=True)
class WidthReport:
    """Central 90% mass widths of an eigenfunction's marginals.

    ``mass_outside_box`` is the fraction of mass outside
    ``|x| <= box[0], y <= box[1]``.
    """

    h: float
    width_x: float
    width_y: float
    mass_outside_box: float
    box: tuple = (0.0, 0.0)


def _log_density(pair: EigenPair) -> np.ndarray:
    """log |psi|^2 in weighted coordinates (cell masses)."""
    with np.errstate(divide="ignore"):
        out = 2.0 * np.log(np.abs(pair.vector))
    if pair.log_scale is not None:
        out = out + 2.0 * np.asarray(pair.log_scale)
    return out


def _cell_masses(pair: EigenPair) -> np.ndarray:
    logd = _log_density(pair)
    logd = logd - np.max(logd)
    mass = np.exp(logd)
    return mass / mass.sum()


def _quantile(edges, cdf, q):
    i = int(np.searchsorted(cdf, q, side="left"))
    i = min(max(i, 1), len(cdf) - 1)
    c0, c1 = cdf[i - 1], cdf[i]
    t = 0.0 if c1 == c0 else (q - c0) / (c1 - c0)
    return edges[i - 1] + t * (edges[i] - edges[i - 1])


def marginal_quantile_width(g: Grid1D, mass, lo: float = 0.05, hi: float = 0.95) -> float:
    """Length of the [lo, hi] quantile interval of a marginal.

    ``mass[i]`` is the mass of the dual cell of node i; the density is
    constant on each dual cell, so the CDF is piecewise linear.
    """
    mass = np.asarray(mass, dtype=float)
    total = mass.sum()
    if not total > 0:
        raise ValueError("marginal has no mass")
    cdf = np.concatenate([[0.0], np.cumsum(mass) / total])
    edges = g.dual_edges
    return float(_quantile(edges, cdf, hi) - _quantile(edges, cdf, lo))


def localization_widths(pair: EigenPair, grid: Grid2D, h: float, box=None) -> WidthReport:
    """Marginal 5%-95% widths in x and y plus the mass outside a box.

    The default box is ``|x| <= 4 sqrt(h)`` and ``y <= 6`` in the grid's
    second coordinate (pass ``box`` explicitly for the unscaled t-variable).
    """
    mass = _cell_masses(pair).reshape(grid.shape)
    wx = marginal_quantile_width(grid.gx, mass.sum(axis=1))
    wy = marginal_quantile_width(grid.gy, mass.sum(axis=0))
    if box is None:
        box = (4.0 * math.sqrt(h), 6.0)
    inside = (np.abs(grid.gx.nodes)[:, None] <= box[0]) & (grid.gy.nodes[None, :] <= box[1])
    outside = float(mass[~inside].sum())
    return WidthReport(h, wx, wy, min(max(outside, 0.0), 1.0), tuple(float(b) for b in box))


# ---------------------------------------------------------------- fitting

@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through (log h, log q)."""

    slope: float
    intercept: float
    r_squared: float
    points: tuple = field(default=())

    def predict(self, h):
        return math.exp(self.intercept) * np.asarray(h) ** self.slope


def scaling_fit(points) -> ScalingFit:
    """Ordinary least squares on (log h, log q) for ``points = [(h, q), ...]``."""
    pts = [(float(h), float(q)) for h, q in points]
    if len(pts) < 3:
        raise ValueError("a scaling fit needs at least 3 points")
    if any(h <= 0 or q <= 0 for h, q in pts):
        raise ValueError("scaling fit needs positive h and quantities")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    r2 = min(max(r2, 0.0), 1.0)
    return ScalingFit(float(slope), float(intercept), r2, tuple(zip(lx.tolist(), ly.tolist())))


# ------------------------------------------------------------------ Agmon

def _x_nodes(grid):
    return grid.gx.nodes if isinstance(grid, Grid2D) else grid.nodes


def log_agmon_ratio(pair: EigenPair, potential: Potential, mu: float, grid, h: float) -> float:
    """log(||exp(phi_mu/h) psi|| / ||psi||), accumulated in the log domain.

    ``grid`` is a Grid2D (weight constant along y) or a Grid1D.
    """
    phi = np.asarray(agmon_phi(potential, mu, _x_nodes(grid))) / h
    logd = _log_density(pair)
    if isinstance(grid, Grid2D):
        phi = np.repeat(phi, grid.gy.n)
    if logd.shape != phi.shape:
        raise ValueError("eigenvector does not match the grid")
    return 0.5 * float(logsumexp(logd + 2.0 * phi) - logsumexp(logd))


def agmon_ratio(pair: EigenPair, potential: Potential, mu: float, grid, h: float) -> float:
    """||exp(phi_mu/h) psi|| / ||psi|| with overflow-guarded accumulation.

    Raises
    ------
    AgmonOverflow
        If the ratio itself exceeds the double range.
    """
    lv = log_agmon_ratio(pair, potential, mu, grid, h)
    if lv > math.log(np.finfo(float).max):
        raise AgmonOverflow(lv)
    return math.exp(lv)


# -------------------------------------------------------------- quasimode

def quasimode_factors(cfg: ModelConfig, grid: Grid2D):
    """Weighted x- and y-factors of the quasimode f_h(x) u(y).

    ``f_h = h^{-1/4} exp(-c x^2 / h)`` with ``c = e^{i pi/4} kappa / 2`` and
    ``u(y) = Ai(e^{i pi/6} alpha(0)^{1/3} y + z_1)``.
    """
    h = cfg.h
    c = E_PI_4 * kappa(cfg.potential) / 2.0
    x = grid.gx.nodes
    f = h ** -0.25 * np.exp(-c * x * x / h)
    a0 = float(cfg.alpha(0.0))
    scale = cmath.exp(1j * math.pi / 6) * a0 ** (1.0 / 3.0)
    u = airy_pair(scale * grid.gy.nodes + airy_zero(1), check=False)[0]
    return grid.gx.from_nodal(f), grid.gy.from_nodal(u)


def _factored_residual(cfg: ModelConfig, grid: Grid2D) -> float:
    h = cfg.h
    s = h ** (2.0 / 3.0)
    F, U = quasimode_factors(cfg, grid)
    x, y = grid.gx.nodes, grid.gy.nodes
    a0 = float(cfg.alpha(0.0))
    lam0 = lambda1(cfg.alpha, 0.0)
    hx = h * h * second_derivative_matrix(grid.gx) + sp.diags(1j * cfg.potential(x))
    sy = second_derivative_matrix(grid.gy)
    A = np.column_stack([
        hx @ F - E_PI_4 * kappa(cfg.potential) * h * F,
        F,
        1j * s * (cfg.alpha(x) - a0) * F,
    ])
    B = np.column_stack([
        U,
        s * (sy @ U + 1j * a0 * y * U - lam0 * U),
        y * U,
    ])
    ga = A.conj().T @ A
    gb = B.conj().T @ B
    r2 = float(np.real(np.sum(ga * gb)))
    norm = np.linalg.norm(F) * np.linalg.norm(U)
    return math.sqrt(max(r2, 0.0)) / norm


def _assembled_residual(cfg: ModelConfig, grid: Grid2D) -> float:
    F, U = quasimode_factors(cfg, grid)
    psi = np.kron(F, U)
    m = assemble_L2d(cfg, grid)
    r = m @ psi - quasimode_eigenvalue(cfg) * psi
    return float(np.linalg.norm(r) / np.linalg.norm(psi))


def _quasimode_grid(cfg: ModelConfig, level: int, nx: int, ny: int) -> Grid2D:
    from dataclasses import replace

    c = replace(cfg, y_extent=max(cfg.y_extent, QUASIMODE_Y))
    f = 2 ** level
    return make_grid2d(c, "L", nx=nx * f, ny=ny * f,
                       min_spacing=math.sqrt(cfg.h) / cfg.min_spacing_ratio / f)


def quasimode_residual_history(cfg: ModelConfig, levels: int = 6, nx: int = 400,
                               ny: int = 200) -> list:
    """Residuals on successively doubled grids, ``[(nx, ny, value), ...]``."""
    out = []
    for lev in range(levels):
        g = _quasimode_grid(cfg, lev, nx, ny)
        out.append((g.gx.n, g.gy.n, _factored_residual(cfg, g)))
    return out


def quasimode_residual(cfg: ModelConfig, grid: Optional[Grid2D] = None, *,
                       refine: bool = True, rtol: float = 0.05, max_levels: int = 8,
                       method: str = "factored") -> float:
    """||(M - mu_1(h)) psi|| / ||psi|| for the discretized quasimode.

    Parameters
    ----------
    grid : Grid2D, optional
        Evaluate on this grid only (``refine`` is then ignored).
    refine : bool
        Without a grid, double the default quasimode grid until two
        successive values agree to ``rtol``.
    method : {"factored", "assembled"}
        The factored route exploits the tensor structure (three outer
        products) and never forms the 2-D matrix; the assembled route
        applies the sparse matrix and is meant for cross-checks.

    Raises
    ------
    RefinementCapReached
    """
    fn = _factored_residual if method == "factored" else _assembled_residual
    if grid is not None:
        return fn(cfg, grid)
    if not refine:
        return fn(cfg, _quasimode_grid(cfg, 0, cfg.nx, cfg.ny))
    prev = None
    for lev in range(max_levels):
        val = fn(cfg, _quasimode_grid(cfg, lev, cfg.nx, cfg.ny))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
    raise RefinementCapReached(f"residual not stable to {rtol:g} after {max_levels} levels")


# ------------------------------------------------------------- projection

def _nodal_values(pair: EigenPair, grid: Grid2D) -> np.ndarray:
    v = pair.vector
    if pair.log_scale is not None:
        ls = np.asarray(pair.log_scale)
        v = v * np.exp(ls - ls.max())
    return grid.to_nodal(v)


def projection_deficit(pair: EigenPair, alpha, grid: Grid2D, kind: str = "analytic",
                       fibers=None) -> float:
    """||psi - Pi psi|| / ||psi|| in the discrete L^2 norm."""
    psi = _nodal_values(pair, grid)
    proj = project_pi1(psi, alpha, grid, kind, fibers=fibers)
    w = grid.weights
    num = np.sum(w * np.abs(psi - proj) ** 2)
    den = np.sum(w * np.abs(psi) ** 2)
    return float(math.sqrt(num / den))


# ------------------------------------------------------------- asymptotics

@dataclass(frozen=True)
class AsymptoticsRow:
    n: int
    h: float
    value: complex
    mu1: complex
    error: float  # |lambda - mu_1(h)|
    disk_offset: float  # |lambda - lambda_1(0) h^{2/3}| / h
    in_disk: bool


@dataclass(frozen=True)
class AsymptoticsTable:
    rows: tuple
    fit: Optional[ScalingFit]
    radius: float


def eigenvalue_asymptotics(base: ModelConfig, exponents: Sequence[int], *, radius: float = 5.0,
                           points: Optional[list] = None, **sweep_kw) -> AsymptoticsTable:
    """Eigenvalue near mu_1(h) for each h = 2^-n, with a fit of |lambda - mu_1|.

    ``points`` reuses an existing sweep of the same configuration.
    """
    pts = run_sweep(base, exponents, **sweep_kw) if points is None else points
    rows = []
    for p in pts:
        mu1 = quasimode_eigenvalue(p.cfg)
        lead = lambda1(p.cfg.alpha, 0.0) * p.h ** (2.0 / 3.0)
        off = abs(p.pair.value - lead) / p.h
        rows.append(AsymptoticsRow(p.n, p.h, p.pair.value, mu1, abs(p.pair.value - mu1),
                                   off, off <= radius))
    fit = scaling_fit([(r.h, r.error) for r in rows]) if len(rows) >= 3 else None
    return AsymptoticsTable(tuple(rows), fit, radius)


# --------------------------------------------------------------- sharpness

@dataclass(frozen=True)
class SharpnessRow:
    n: int
    h: float
    eigenvalue: complex
    residual: float
    nodes: int
    ratios: dict


@dataclass(frozen=True)
class SharpnessReport:
    rows: tuple
    mus: tuple

    def ratios(self, mu) -> list:
        return [r.ratios[mu] for r in self.rows]

    @property
    def unweighted_increasing(self) -> bool:
        """Ratios at mu = 0 strictly increase as h decreases."""
        r = self.ratios(0.0)
        return all(b > a for a, b in zip(r, r[1:]))

    def variation(self, mu) -> float:
        r = self.ratios(mu)
        return max(r) / min(r)

    @property
    def positive_real_parts(self) -> bool:
        return all(r.eigenvalue.real > 0 for r in self.rows)


def _sharpness_grid(h: float, half_width: float) -> Grid1D:
    # the tails oscillate and decay on the scale h
    dx = min(h ** 1.5 / 4.0, math.sqrt(h) / 16.0)
    n = int(math.ceil(2.0 * half_width / dx)) - 1
    return uniform_grid(-half_width, half_width, n)


def sharpness_experiment(exponents: Sequence[int] = (4, 5, 6, 7, 8),
                         mus: Sequence[float] = (0.0, 0.25, 0.5), *,
                         potential: Optional[Potential] = None,
                         half_width: float = 2.0, tol: float = 1e-10) -> SharpnessReport:
    """Weighted norms of the 1-D ground state for a potential flat at infinity.

    For each h the eigenvalue of (hD)^2 + iV near e^{i pi/4} kappa h is
    found by shift-invert; the eigenvector is then rebuilt from both ends
    in log form so its exponentially small tails are exact.  For a product
    f(x) u(y) the weighted ratio equals that of f, so the ratios below are
    those of the full 2-D function.
    """
    pot = sharpness_potential() if potential is None else potential
    kap = kappa(pot)
    rows = []
    for n in exponents:
        h = 2.0 ** -n
        g = _sharpness_grid(h, half_width)
        m = assemble_schrodinger_1d(h, pot, g)
        shift = E_PI_4 * kap * h
        lam = shift_invert_arnoldi(m, shift, k=1, tol=tol)[0].value
        pair = twisted_eigenvector(m.diagonal(), m.diagonal(1), lam)
        ratios = {float(mu): agmon_ratio(pair, pot, mu, g, h) for mu in mus}
        rows.append(SharpnessRow(n, h, lam, pair.residual, g.n, ratios))
    return SharpnessReport(tuple(rows), tuple(float(m) for m in mus))
