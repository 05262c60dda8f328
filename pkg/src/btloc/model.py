"""Problem definitions: potentials, absorption profiles and derived scalars.

The 2-D model operator acts on the half-strip [-X, X] x (0, Y)::

    L_h = h^{2/3} (D_y^2 + i alpha(x) y) + (h D_x)^2 + i V(x),   D = -i d/dx

with Dirichlet conditions.  ``V`` is a nonnegative well with a single
nondegenerate zero at the origin and ``alpha`` is a positive profile with
``alpha'(0) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .specfn import airy_zero

__all__ = [
    "Potential",
    "AlphaProfile",
    "ModelConfig",
    "AssumptionItem",
    "AssumptionReport",
    "polynomial_potential",
    "quadratic_potential",
    "sharpness_potential",
    "constant_alpha",
    "quadratic_alpha",
    "potential_from_spec",
    "alpha_from_spec",
    "catalog_config",
    "config_to_dict",
    "config_from_dict",
    "CATALOG",
    "lambda1",
    "lambda_n",
    "kappa",
    "agmon_phi",
    "agmon_phi_prime",
    "quasimode_eigenvalue",
    "first_eigenvalue_guess",
    "oscillator_spectrum",
    "validate_assumptions",
]

E_PI_3 = complex(math.cos(math.pi / 3), math.sin(math.pi / 3))
E_PI_4 = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))

H_MIN = 2.0 ** -12
H_MAX = 1.0


# ---------------------------------------------------------------- potentials

@dataclass(frozen=True)
class Potential:
    """A real confining potential V.

    Attributes
    ----------
    name : str
        Catalog tag.
    func : callable
        Vectorized ``x -> V(x)``.
    second_deriv_at_0 : float
        Declared V''(0).
    liminf_floor : float
        Lower bound of V outside ``[-compact_half_width, compact_half_width]``.
    compact_half_width : float
    spec : tuple
        ``(key, value)`` pairs that rebuild the potential through
        :func:`potential_from_spec`.
    even : bool
    """

    name: str
    func: Callable = field(repr=False, compare=False)
    second_deriv_at_0: float
    liminf_floor: float
    compact_half_width: float
    spec: tuple = ()
    even: bool = False

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def to_spec(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.spec}


def polynomial_potential(coefficients, name="polynomial") -> Potential:
    """V(x) = sum_k c_k x^k with ``coefficients = (c_0, c_1, ...)``."""
    c = tuple(float(v) for v in coefficients)
    if not c:
        raise ValueError("need at least one coefficient")
    poly = np.polynomial.Polynomial(c)
    d2 = 2.0 * c[2] if len(c) > 2 else 0.0
    even = all(v == 0.0 for v in c[1::2])
    # floor outside [-1, 1], sampled; polynomials here grow at infinity
    s = np.linspace(1.0, 10.0, 2001)
    floor = float(min(poly(s).min(), poly(-s).min()))
    return Potential(
        name=name,
        func=lambda x: poly(x),
        second_deriv_at_0=d2,
        liminf_floor=floor,
        compact_half_width=1.0,
        spec=(("kind", "polynomial"), ("coefficients", c))
        + ((("name", name),) if name != "polynomial" else ()),
        even=even,
    )


def quadratic_potential(scale=1.0) -> Potential:
    """V(x) = scale * x**2."""
    p = polynomial_potential((0.0, 0.0, scale), name="quadratic")
    return replace(p, spec=(("kind", "quadratic"), ("scale", float(scale))))


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def sharpness_potential(inner=0.3, outer=0.5) -> Potential:
    """Even well equal to x**2 near 0 and to 1 for |x| >= outer.

    ``V = x**2 * chi + (1 - chi)`` where ``chi`` is a smooth cutoff equal to
    one on ``|x| <= inner`` and zero on ``|x| >= outer``.
    """
    if not 0 < inner < outer <= 1.0:
        raise ValueError("need 0 < inner < outer <= 1")

    def func(x):
        chi = 1.0 - _smooth_step((np.abs(x) - inner) / (outer - inner))
        return x * x * chi + (1.0 - chi)

    return Potential(
        name="sharpness",
        func=func,
        second_deriv_at_0=2.0,
        liminf_floor=1.0,
        compact_half_width=outer,
        spec=(("kind", "sharpness"), ("inner", float(inner)), ("outer", float(outer))),
        even=True,
    )


# ------------------------------------------------------------------ profiles

@dataclass(frozen=True)
class AlphaProfile:
    """Positive absorption profile alpha(x) with alpha'(0) = 0.

    ``lower_bound`` is an optional declared alpha_0; when absent the
    sampled infimum on the assumption window plays that role.
    """

    name: str
    func: Callable = field(repr=False, compare=False)
    spec: tuple = ()
    lower_bound: Optional[float] = None

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def extrema(self, window, samples=10_000):
        """(inf, sup) of alpha sampled on ``window``."""
        x = np.linspace(window[0], window[1], samples)
        a = self(x)
        return float(a.min()), float(a.max())

    def to_spec(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.spec}


def constant_alpha(value=1.0) -> AlphaProfile:
    value = float(value)
    return AlphaProfile(
        name="constant",
        func=lambda x: np.full(np.shape(x), value),
        spec=(("kind", "constant"), ("value", value)),
        lower_bound=value,
    )


def quadratic_alpha(a0=1.0, curvature=0.1) -> AlphaProfile:
    """alpha(x) = a0 - curvature * x**2."""
    a0, curvature = float(a0), float(curvature)
    return AlphaProfile(
        name="quadratic",
        func=lambda x: a0 - curvature * x * x,
        spec=(("kind", "quadratic"), ("a0", a0), ("curvature", curvature)),
    )


def potential_from_spec(spec: dict) -> Potential:
    """Rebuild a potential from ``{"kind": ..., params...}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "quadratic":
        return quadratic_potential(**spec)
    if kind == "polynomial":
        return polynomial_potential(spec["coefficients"], name=spec.get("name", "polynomial"))
    if kind == "sharpness":
        return sharpness_potential(**spec)
    raise ValueError(f"unknown potential kind {kind!r}")


def alpha_from_spec(spec: dict) -> AlphaProfile:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "constant":
        return constant_alpha(**spec)
    if kind == "quadratic":
        return quadratic_alpha(**spec)
    raise ValueError(f"unknown alpha kind {kind!r}")


# -------------------------------------------------------------------- config

@dataclass(frozen=True)
class ModelConfig:
    """Resolved configuration of one 2-D solve.

    Parameters
    ----------
    h : float
        Semiclassical parameter, ``2**-12 <= h <= 1``.
    potential, alpha
        Model data.
    x_extent, y_extent : float
        Half-width X of the x-interval and height Y of the y-interval.
    nx, ny : int
        Interior node counts.
    grading : {"graded", "uniform"}
        x-grid type; graded grids cluster nodes around x = 0.
    min_spacing_ratio : float
        Graded grids aim for a smallest x-spacing of ``sqrt(h) / ratio``.
    assumption_window : tuple or None
        Interval on which the model assumptions are checked; defaults to
        ``(-X, X)``.
    max_unknowns : int
        Assembly refuses larger problems.
    """

    h: float
    potential: Potential
    alpha: AlphaProfile
    x_extent: float = 4.0
    y_extent: float = 8.0
    nx: int = 400
    ny: int = 200
    grading: str = "graded"
    min_spacing_ratio: float = 8.0
    assumption_window: Optional[tuple] = None
    max_unknowns: int = 2_000_000

    def __post_init__(self):
        if not H_MIN <= self.h <= H_MAX:
            raise ValueError(f"h = {self.h} outside [2^-12, 1]")
        if self.x_extent < 4.0:
            raise ValueError("x_extent must be at least 4")
        if self.y_extent < 2.0 * abs(airy_zero(1)):
            raise ValueError("y_extent must be at least 2|z_1|")
        if self.nx < 3 or self.ny < 3:
            raise ValueError("need at least 3 interior nodes per direction")
        if self.grading not in ("graded", "uniform"):
            raise ValueError("grading must be 'graded' or 'uniform'")
        if self.min_spacing_ratio <= 0:
            raise ValueError("min_spacing_ratio must be positive")

    @property
    def window(self) -> tuple:
        if self.assumption_window is not None:
            return tuple(self.assumption_window)
        return (-self.x_extent, self.x_extent)

    def with_h(self, h: float) -> "ModelConfig":
        return replace(self, h=h)


# (potential, alpha, extra fields) for the named configurations
CATALOG = {
    "quadratic": (lambda: quadratic_potential(1.0), lambda: constant_alpha(1.0), {}),
    "figure2": (
        lambda: quadratic_potential(1.0),
        lambda: quadratic_alpha(1.0, 0.1),
        {"assumption_window": (-2.0, 2.0)},
    ),
    "sharpness": (lambda: sharpness_potential(), lambda: constant_alpha(1.0), {}),
    "generic": (
        lambda: polynomial_potential((0.0, 0.0, 1.0, 0.2, 0.05), name="asym_quartic"),
        lambda: quadratic_alpha(1.0, 0.1),
        {"assumption_window": (-2.0, 2.0)},
    ),
}


def catalog_config(name: str, h: float, **overrides) -> ModelConfig:
    """Build one of the named configurations at parameter ``h``.

    ``quadratic``: V = x^2, alpha = 1 (separable).
    ``figure2``: V = x^2, alpha = 1 - 0.1 x^2, assumptions checked on [-2, 2].
    ``sharpness``: flat-topped well, alpha = 1.
    ``generic``: asymmetric quartic well, alpha = 1 - 0.1 x^2.
    """
    try:
        pot, alp, extra = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown catalog entry {name!r}") from None
    kw = dict(extra)
    kw.update(overrides)
    return ModelConfig(h=h, potential=pot(), alpha=alp(), **kw)


def config_to_dict(cfg: ModelConfig) -> dict:
    """Plain-data form of a configuration (JSON/TOML friendly)."""
    out = {
        "h": cfg.h,
        "potential": cfg.potential.to_spec(),
        "alpha": cfg.alpha.to_spec(),
        "x_extent": cfg.x_extent,
        "y_extent": cfg.y_extent,
        "nx": cfg.nx,
        "ny": cfg.ny,
        "grading": cfg.grading,
        "min_spacing_ratio": cfg.min_spacing_ratio,
        "max_unknowns": cfg.max_unknowns,
    }
    if cfg.assumption_window is not None:
        out["assumption_window"] = [float(v) for v in cfg.assumption_window]
    return out


def config_from_dict(data: dict) -> ModelConfig:
    """Inverse of :func:`config_to_dict`."""
    data = dict(data)
    pot = potential_from_spec(data.pop("potential"))
    alp = alpha_from_spec(data.pop("alpha"))
    if data.get("assumption_window") is not None:
        data["assumption_window"] = tuple(data["assumption_window"])
    return ModelConfig(potential=pot, alpha=alp, **data)


# ----------------------------------------------------------- derived scalars

def lambda_n(alpha, x, n: int):
    """n-th fiber eigenvalue alpha(x)^{2/3} |z_n| e^{i pi/3}."""
    a = np.asarray(alpha(x), dtype=float)
    if np.any(a <= 0):
        raise ValueError("alpha(x) must be positive")
    out = a ** (2.0 / 3.0) * abs(airy_zero(n)) * E_PI_3
    return out.item() if out.ndim == 0 else out


def lambda1(alpha, x):
    """First fiber eigenvalue alpha(x)^{2/3} |z_1| e^{i pi/3}."""
    return lambda_n(alpha, x, 1)


def kappa(potential: Potential) -> float:
    """Oscillator frequency sqrt(V''(0)/2)."""
    if potential.second_deriv_at_0 <= 0:
        raise ValueError("V''(0) must be positive")
    return math.sqrt(potential.second_deriv_at_0 / 2.0)


def first_eigenvalue_guess(potential: Potential, alpha: AlphaProfile, h: float) -> complex:
    """lambda_1(0) h^{2/3} + e^{i pi/4} kappa h."""
    return complex(lambda1(alpha, 0.0) * h ** (2.0 / 3.0) + E_PI_4 * kappa(potential) * h)


def quasimode_eigenvalue(cfg: ModelConfig) -> complex:
    """Two-term eigenvalue approximation mu_1(h) for the configuration."""
    return first_eigenvalue_guess(cfg.potential, cfg.alpha, cfg.h)


def oscillator_spectrum(kappa_value: float, h: float, n_max: int) -> list:
    """First ``n_max`` eigenvalues e^{i pi/4}(2n-1) kappa h of (hD)^2 + i kappa^2 x^2."""
    if kappa_value <= 0 or h <= 0 or n_max < 1:
        raise ValueError("need kappa > 0, h > 0, n_max >= 1")
    return [E_PI_4 * (2 * n - 1) * kappa_value * h for n in range(1, n_max + 1)]


# ----------------------------------------------------------- Agmon distance

_GL = {n: np.polynomial.legendre.leggauss(n) for n in (10, 20)}


def _gauss(f, a, b, n):
    t, w = _GL[n]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * t[None, :]
    return half * (f(pts) @ w)


def _adaptive_gauss(f, a, b, tol=1e-10, max_depth=40):
    """Integrals of f over the intervals [a_i, b_i], vectorized and adaptive.

    Each interval is accepted when the 10- and 20-point Gauss-Legendre rules
    agree to its share of ``tol``; otherwise it is bisected.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros(a.shape)
    total = max(float(np.sum(np.abs(b - a))), 1e-300)
    idx = np.arange(a.size)
    lo, hi = a.ravel(), b.ravel()
    flat = out.ravel()
    for _ in range(max_depth):
        if idx.size == 0:
            return out
        coarse = _gauss(f, lo, hi, 10)
        fine = _gauss(f, lo, hi, 20)
        ok = np.abs(fine - coarse) <= tol * np.abs(hi - lo) / total + 1e-16 * np.abs(fine)
        np.add.at(flat, idx[ok], fine[ok])
        bad = ~ok
        mid = 0.5 * (lo[bad] + hi[bad])
        idx = np.concatenate([idx[bad], idx[bad]])
        lo, hi = np.concatenate([lo[bad], mid]), np.concatenate([mid, hi[bad]])
    raise RuntimeError("adaptive quadrature did not converge")


def _sqrt_v(potential):
    return lambda s: np.sqrt(np.maximum(potential(s), 0.0))


def _distance_from_origin(potential: Potential, x):
    """|int_0^x sqrt(V)| for every entry of x (cumulative over sorted nodes)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    f = _sqrt_v(potential)
    for sign in (1.0, -1.0):
        mask = sign * x > 0
        if not mask.any():
            continue
        r = sign * x[mask]
        knots, inverse = np.unique(r, return_inverse=True)
        left = np.concatenate([[0.0], knots[:-1]])
        pieces = _adaptive_gauss(lambda s: f(sign * s), left, knots)
        out[mask] = np.cumsum(pieces)[inverse]
    return out


def agmon_phi(potential: Potential, mu: float, x):
    """Agmon weight (1 - mu)/sqrt(2) * |int_0^x sqrt(V(s)) ds|.

    Parameters
    ----------
    potential : Potential
    mu : float in [0, 1]
    x : float or array

    Returns
    -------
    float or ndarray, same shape as ``x``
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError("mu must lie in [0, 1]")
    arr = np.asarray(x, dtype=float)
    if mu == 1.0:
        val = np.zeros(arr.shape)
    else:
        val = (1.0 - mu) / math.sqrt(2.0) * _distance_from_origin(potential, arr)
    return float(val) if val.ndim == 0 else val


def agmon_phi_prime(potential: Potential, mu: float, x):
    """Derivative of :func:`agmon_phi` (zero at the origin)."""
    arr = np.asarray(x, dtype=float)
    val = (1.0 - mu) / math.sqrt(2.0) * np.sign(arr) * np.sqrt(np.maximum(potential(arr), 0.0))
    return float(val) if val.ndim == 0 else val


# --------------------------------------------------------------- validation

@dataclass(frozen=True)
class AssumptionItem:
    name: str
    passed: bool
    witness: Optional[float]
    detail: str


@dataclass(frozen=True)
class AssumptionReport:
    items: tuple
    window: tuple

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def failures(self) -> list:
        return [item for item in self.items if not item.passed]

    def __getitem__(self, name) -> AssumptionItem:
        for item in self.items:
            if item.name == name:
                return item
        raise KeyError(name)

    def summary(self) -> str:
        lines = []
        for it in self.items:
            tag = "PASS" if it.passed else "FAIL"
            where = "" if it.witness is None else f" at x = {it.witness:.6g}"
            lines.append(f"{tag} {it.name}{where}: {it.detail}")
        return "\n".join(lines)


def validate_assumptions(potential: Potential, alpha: AlphaProfile, window) -> AssumptionReport:
    """Check the standing assumptions on 10^4 uniform samples of ``window``.

    Failures are reported as items with a witnessing x, never raised.
    """
    lo, hi = float(window[0]), float(window[1])
    if not lo < 0.0 < hi:
        raise ValueError("window must be a finite interval containing 0")
    x = np.linspace(lo, hi, 10_000)
    v = potential(x)
    items = []

    v0 = float(potential(0.0))
    items.append(AssumptionItem("V(0) = 0", abs(v0) <= 1e-12, 0.0, f"V(0) = {v0:.3g}"))

    i = int(np.argmin(v))
    items.append(AssumptionItem(
        "V(x) >= 0", bool(v[i] >= -1e-14), float(x[i]), f"min V = {v[i]:.3g}"))

    away = np.abs(x) > 1e-8
    j = int(np.argmin(np.where(away, v, np.inf)))
    items.append(AssumptionItem(
        "V(x) > 0 for x != 0", bool(v[j] > 0), float(x[j]), f"min over x != 0 is {v[j]:.3g}"))

    d = 1e-3
    fd = float((potential(d) - 2 * potential(0.0) + potential(-d)) / d ** 2)
    declared = potential.second_deriv_at_0
    ok = declared > 0 and abs(fd - declared) <= 1e-4 * max(1.0, abs(declared))
    items.append(AssumptionItem(
        "V''(0) > 0", bool(ok), 0.0, f"declared {declared:.6g}, finite difference {fd:.6g}"))

    outside = np.abs(x) >= potential.compact_half_width
    if outside.any():
        k = int(np.argmin(np.where(outside, v, np.inf)))
        ok = potential.liminf_floor > 0 and v[k] >= potential.liminf_floor - 1e-12
        items.append(AssumptionItem(
            "V bounded below outside a compact set", bool(ok), float(x[k]),
            f"floor {potential.liminf_floor:.3g}, sampled min {v[k]:.3g}"))

    a = alpha(x)
    m = int(np.argmin(a))
    a_inf, a_sup = float(a[m]), float(a.max())
    bound = alpha.lower_bound if alpha.lower_bound is not None else a_inf
    ok = a_inf > 0 and bound > 0 and a_inf >= bound - 1e-14
    items.append(AssumptionItem(
        "alpha >= alpha_0 > 0", bool(ok), float(x[m]), f"inf alpha = {a_inf:.6g}"))

    d = 1e-4
    slope = float((alpha(d) - alpha(-d)) / (2 * d))
    items.append(AssumptionItem(
        "alpha'(0) = 0", abs(slope) <= 1e-8, 0.0, f"central difference {slope:.3g}"))

    z1, z2 = abs(airy_zero(1)), abs(airy_zero(2))
    if a_inf > 0:
        gap = a_inf ** (2.0 / 3.0) * z2 - a_sup ** (2.0 / 3.0) * z1
        items.append(AssumptionItem(
            "fiber gap condition", gap > 0, None,
            f"(inf a)^(2/3)|z2| - (sup a)^(2/3)|z1| = {gap:.6g}"))
    else:
        items.append(AssumptionItem(
            "fiber gap condition", False, float(x[m]), "alpha not positive on the window"))
    return AssumptionReport(tuple(items), (lo, hi))
