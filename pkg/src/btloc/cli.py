"""Command-line front end.

Every command that writes files embeds the resolved configuration and a
schema version; re-running with the same configuration reproduces the
outputs byte for byte.

Exit codes: 0 ok, 1 a check reported FAIL, 2 usage, 3 numerical failure,
4 model-assumption failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from . import analysis as an
from .discretize import AssemblyTooLarge, assemble_airy_1d, assemble_schrodinger_1d, uniform_grid
from .eigensolve import (
    ArnoldiNoConvergence,
    DenseEigError,
    EigenPair,
    SingularFactorError,
    dense_eig,
    shift_invert_arnoldi,
)
from .fiber import (
    numerical_range_curve,
    range_contains_eigenvalue,
    rayleigh_quotient_dilation,
    shifted_rayleigh_real_parts,
    virial_checks,
)
from .model import (
    CATALOG,
    E_PI_3,
    ModelConfig,
    alpha_from_spec,
    catalog_config,
    config_from_dict,
    config_to_dict,
    lambda1,
    oscillator_spectrum,
    polynomial_potential,
    potential_from_spec,
    quadratic_potential,
    validate_assumptions,
)
from .specfn import AiryDomainError, airy_ai, airy_zero

SCHEMA_VERSION = 1

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL, EXIT_ASSUMPTION = 0, 1, 2, 3, 4

NUMERICAL_ERRORS = (
    ArnoldiNoConvergence,
    SingularFactorError,
    DenseEigError,
    AssemblyTooLarge,
    an.RefinementCapReached,
    an.AgmonOverflow,
    AiryDomainError,
    ArithmeticError,
    np.linalg.LinAlgError,
)

# acceptance thresholds used by the check commands
THRESHOLDS = {
    "disk_radius": 5.0,
    "eigenvalue_slope_min": 1.2,
    "eigenvalue_r2_min": 0.95,
    "width_x_slope": (0.44, 0.56),
    "width_t_slope": (0.60, 0.74),
    "agmon_max_variation": 3.0,
    "projection_slope_min": 0.25,
    "quasimode_slope": (1.35, 1.65),
    "separable_residual_max": 1e-6,
    "virial_tol": 1e-6,
}


class UsageError(Exception):
    pass


class AssumptionFailure(Exception):
    def __init__(self, report):
        super().__init__(report.summary())
        self.report = report


# ------------------------------------------------------------- run config

@dataclass
class RunConfig:
    """Everything a run depends on.

    ``model`` names a catalog entry; ``potential`` and ``alpha`` (tables
    with a ``kind`` key) replace its model data when given.  ``exponents``
    lists n for h = 2^-n.
    """

    experiment: str = "figure2"
    model: str = "figure2"
    potential: Optional[dict] = None
    alpha: Optional[dict] = None
    exponents: list = field(default_factory=lambda: [4, 5, 6, 7, 8])
    mode: str = "L"
    nx: int = 400
    ny: int = 200
    grading: str = "graded"
    x_extent: float = 4.0
    y_extent: float = 8.0
    min_spacing_ratio: float = 8.0
    assumption_window: Optional[list] = None
    k: int = 2
    tol: float = 1e-10
    shift: str = "quasimode"
    mu: list = field(default_factory=lambda: [0.5])
    fiber: str = "analytic"
    outdir: str = "results"
    seed: int = 0
    workers: int = 1

    def validate(self) -> "RunConfig":
        if self.model not in CATALOG:
            raise UsageError(f"unknown model {self.model!r}; choose from {sorted(CATALOG)}")
        if not self.exponents or any(not isinstance(n, int) or not 0 <= n <= 12
                                     for n in self.exponents):
            raise UsageError("exponents must be integers in [0, 12]")
        if len(set(self.exponents)) != len(self.exponents):
            raise UsageError("exponents must be distinct")
        if self.mode not in ("L", "T"):
            raise UsageError("mode must be 'L' or 'T'")
        if self.shift not in an.SHIFT_POLICIES:
            raise UsageError(f"shift must be one of {an.SHIFT_POLICIES}")
        if self.fiber not in ("analytic", "discrete"):
            raise UsageError("fiber must be 'analytic' or 'discrete'")
        if self.k < 1 or self.tol <= 0 or self.workers < 1:
            raise UsageError("need k >= 1, tol > 0, workers >= 1")
        if any(not 0.0 <= m <= 1.0 for m in self.mu):
            raise UsageError("weights mu must lie in [0, 1]")
        if not self.experiment or any(c in self.experiment for c in "/\\"):
            raise UsageError("experiment must be a plain name")
        return self

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
        data = dict(data)
        for key in ("tol", "x_extent", "y_extent", "min_spacing_ratio"):
            if key in data and isinstance(data[key], int):
                data[key] = float(data[key])
        if "mu" in data:
            data["mu"] = [float(m) for m in data["mu"]]
        return cls(**data).validate()

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"malformed configuration: {exc}") from None
        except TypeError as exc:
            raise UsageError(f"bad configuration value: {exc}") from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc}") from None
        return cls.from_toml(text)

    def model_config(self, n: int) -> ModelConfig:
        over = dict(nx=self.nx, ny=self.ny, grading=self.grading, x_extent=self.x_extent,
                    y_extent=self.y_extent, min_spacing_ratio=self.min_spacing_ratio)
        if self.assumption_window is not None:
            over["assumption_window"] = tuple(self.assumption_window)
        try:
            cfg = catalog_config(self.model, 2.0 ** -n, **over)
            if self.potential is not None:
                cfg = replace(cfg, potential=potential_from_spec(self.potential))
            if self.alpha is not None:
                cfg = replace(cfg, alpha=alpha_from_spec(self.alpha))
        except (ValueError, TypeError, KeyError) as exc:
            raise UsageError(f"invalid model configuration: {exc}") from None
        return cfg


# ----------------------------------------------------------------- output

def fmt(x) -> str:
    """17 significant digits (exact round trip for doubles)."""
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, payload: dict, rc: RunConfig) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "config": rc.to_dict()}
    doc.update(payload)
    atomic_write(path, json.dumps(_jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n")


def csv_text(header, rows, rc: Optional[RunConfig] = None) -> str:
    lines = []
    if rc is not None:
        lines.append(f"# schema_version={SCHEMA_VERSION}")
        lines.append("# config=" + json.dumps(_jsonable(rc.to_dict()), sort_keys=True,
                                              separators=(",", ":")))
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _emit(text: str, out) -> None:
    out.write(text)
    out.flush()


# ------------------------------------------------------------------ solves

def _solve_task(args):
    cfg_dict, n, kw = args
    cfg = config_from_dict(cfg_dict)
    try:
        pair, grid = an.solve_lowest(cfg, **kw)
    except NUMERICAL_ERRORS as exc:
        return n, None, f"{type(exc).__name__}: {exc}"
    return n, (pair.value, pair.vector, pair.residual, pair.log_scale), None


def solve_all(rc: RunConfig, weight_mu: Optional[float] = None, mode: Optional[str] = None):
    """Solve for every exponent; failures are recorded, not raised.

    Returns ``(points, errors)``: SweepPoints ordered by n and a dict n -> message.
    """
    mode = rc.mode if mode is None else mode
    cfgs = {n: rc.model_config(n) for n in sorted(rc.exponents)}
    kw = dict(mode=mode, weight_mu=weight_mu, k=rc.k, tol=rc.tol, seed=rc.seed, shift=rc.shift)
    tasks = [(config_to_dict(cfg), n, kw) for n, cfg in cfgs.items()]
    if rc.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=rc.workers) as pool:
            results = list(pool.map(_solve_task, tasks))
    else:
        results = [_solve_task(t) for t in tasks]
    points, errors = [], {}
    for n, res, err in sorted(results, key=lambda r: r[0]):
        if err is not None:
            errors[n] = err
            continue
        cfg = cfgs[n]
        value, vector, residual, log_scale = res
        grid = an.make_grid2d(cfg, mode)
        points.append(an.SweepPoint(n, cfg.h, cfg, grid, EigenPair(value, vector, residual, log_scale)))
    return points, errors


def check_assumptions(rc: RunConfig) -> None:
    cfg = rc.model_config(rc.exponents[0])
    report = validate_assumptions(cfg.potential, cfg.alpha, cfg.window)
    if not report.passed:
        raise AssumptionFailure(report)


def _experiment_dir(rc: RunConfig) -> Path:
    return Path(rc.outdir) / rc.experiment


def _psi_rows(pair: EigenPair, grid):
    psi = an._nodal_values(pair, grid)
    w = grid.weights
    psi = psi / math.sqrt(float(np.sum(w * np.abs(psi) ** 2)))
    mag = np.abs(psi)
    xs, ys = grid.gx.nodes, grid.gy.nodes
    for i, x in enumerate(xs):
        sx = fmt(x)
        for j, y in enumerate(ys):
            yield (sx, fmt(y), fmt(mag[i, j]))


def _box(p) -> Optional[tuple]:
    if p.grid.gy.upper < p.cfg.y_extent:
        # t-variable: y = t / h^{2/3}
        return (4.0 * math.sqrt(p.h), 6.0 * p.h ** (2.0 / 3.0))
    return None


def write_point(rc: RunConfig, p, widths) -> None:
    d = _experiment_dir(rc) / str(p.n)
    lead = lambda1(p.cfg.alpha, 0.0) * p.h ** (2.0 / 3.0)
    mu1 = an.quasimode_eigenvalue(p.cfg)
    write_json(d / "eigen.json", {
        "n": p.n,
        "h": p.h,
        "mode": rc.mode,
        "eigenvalue": complex(p.pair.value),
        "residual": p.pair.residual,
        "mu1": mu1,
        "error_vs_mu1": abs(p.pair.value - mu1),
        "disk_offset_over_h": abs(p.pair.value - lead) / p.h,
        "grid": {"nx": p.grid.gx.n, "ny": p.grid.gy.n, "x_upper": p.grid.gx.upper,
                 "y_upper": p.grid.gy.upper},
        "model": config_to_dict(p.cfg),
    }, rc)
    header = ["x", "y" if rc.mode == "L" else "t", "abs_psi"]
    atomic_write(d / "psi.csv", csv_text(header, _psi_rows(p.pair, p.grid), rc))
    write_json(d / "widths.json", {
        "n": p.n,
        "h": widths.h,
        "width_x": widths.width_x,
        "width_y": widths.width_y,
        "mass_outside_box": widths.mass_outside_box,
        "box": list(widths.box),
    }, rc)


# ---------------------------------------------------------------- commands

def _pass(flag: bool) -> str:
    return "PASS" if flag else "FAIL"


def cmd_airy_zeros(args, rc, out) -> int:
    rows = []
    for n in range(1, args.count + 1):
        z = airy_zero(n)
        rows.append((str(n), fmt(z), fmt(abs(airy_ai(z)))))
    _emit(csv_text(["n", "z_n", "abs_ai"], rows), out)
    return EXIT_OK


def _spectrum_1d(args):
    op = args.operator
    if op == "airy":
        g = uniform_grid(0.0, args.Y, args.N)
        m = assemble_airy_1d(args.omega, g)
        exact = [args.omega ** (2.0 / 3.0) * abs(airy_zero(n)) * E_PI_3 for n in range(1, args.count + 1)]
    elif op == "oscillator":
        L = args.length if args.length is not None else 1.0
        g = uniform_grid(-L, L, args.N)
        m = assemble_schrodinger_1d(args.h, quadratic_potential(args.kappa ** 2), g)
        exact = oscillator_spectrum(args.kappa, args.h, args.count)
    else:
        L = args.length if args.length is not None else math.pi
        coeffs = [float(c) for c in args.coefficients.split(",")]
        g = uniform_grid(0.0, L, args.N)
        m = assemble_schrodinger_1d(args.h, polynomial_potential(coeffs), g)
        if all(c == 0.0 for c in coeffs):
            exact = [(args.h * n * math.pi / L) ** 2 for n in range(1, args.count + 1)]
        else:
            exact = [None] * args.count
    if args.method == "dense":
        vals = list(dense_eig(m)[: args.count])
    else:
        pairs = shift_invert_arnoldi(m, args.shift, k=args.count, tol=args.tol)
        vals = sorted((p.value for p in pairs), key=lambda v: (abs(v), np.angle(v)))
    return vals, exact


def cmd_spectrum_1d(args, rc, out) -> int:
    vals, exact = _spectrum_1d(args)
    rows = []
    for n, (v, e) in enumerate(zip(vals, exact), start=1):
        if e is None:
            rows.append((str(n), v.real, v.imag, "", "", "", ""))
        else:
            err = abs(v - e)
            rows.append((str(n), v.real, v.imag, e.real if isinstance(e, complex) else e,
                         e.imag if isinstance(e, complex) else 0.0, err, err / abs(e)))
    _emit(csv_text(["n", "re", "im", "exact_re", "exact_im", "abs_error", "rel_error"], rows), out)
    return EXIT_OK


def _widths(p):
    return an.localization_widths(p.pair, p.grid, p.h, box=_box(p))


def _solve_and_write(rc):
    check_assumptions(rc)
    points, errors = solve_all(rc)
    reports = {}
    for p in points:
        reports[p.n] = _widths(p)
        write_point(rc, p, reports[p.n])
    return points, errors, reports


def _summary_rows(points, errors, reports):
    rows = []
    ok = {p.n: p for p in points}
    for n in sorted(set(ok) | set(errors)):
        if n in ok:
            p, w = ok[n], reports[n]
            rows.append((str(n), p.h, p.pair.value.real, p.pair.value.imag, p.pair.residual,
                         w.width_x, w.width_y, w.mass_outside_box, "ok"))
        else:
            rows.append((str(n), 2.0 ** -n, "", "", "", "", "", "", errors[n].replace(",", ";")))
    return rows


SUMMARY_HEADER = ["n", "h", "re", "im", "residual", "width_x", "width_y", "mass_outside_box", "status"]


def cmd_solve_2d(args, rc, out) -> int:
    points, errors, reports = _solve_and_write(rc)
    atomic_write(_experiment_dir(rc) / "summary.csv",
                 csv_text(SUMMARY_HEADER, _summary_rows(points, errors, reports), rc))
    for n, msg in errors.items():
        print(f"n={n}: {msg}", file=sys.stderr)
    for p in points:
        lead = lambda1(p.cfg.alpha, 0.0) * p.h ** (2.0 / 3.0)
        off = abs(p.pair.value - lead) / p.h
        print(f"n={p.n} lambda={fmt(p.pair.value.real)}{p.pair.value.imag:+.17g}j "
              f"|lambda - lambda_1(0)h^(2/3)|/h={off:.6g} "
              f"{_pass(off <= THRESHOLDS['disk_radius'])}", file=out)
    return EXIT_NUMERICAL if errors else EXIT_OK


def _fit_or_none(pairs):
    try:
        return an.scaling_fit(pairs)
    except ValueError:
        return None


def cmd_scaling_sweep(args, rc, out) -> int:
    if len(rc.exponents) < 3:
        raise UsageError("a scaling sweep needs at least 3 exponents")
    points, errors, reports = _solve_and_write(rc)
    d = _experiment_dir(rc)
    atomic_write(d / "summary.csv", csv_text(SUMMARY_HEADER, _summary_rows(points, errors, reports), rc))
    fx = _fit_or_none([(p.h, reports[p.n].width_x) for p in points])
    fy = _fit_or_none([(p.h, reports[p.n].width_y) for p in points])
    payload = {"errors": {str(k): v for k, v in errors.items()}, "points": len(points)}
    for name, fit in (("x", fx), ("y" if rc.mode == "L" else "t", fy)):
        if fit is not None:
            payload[f"slope_{name}"] = fit.slope
            payload[f"r_squared_{name}"] = fit.r_squared
    write_json(d / "summary.json", payload, rc)
    for n, msg in errors.items():
        print(f"n={n}: {msg}", file=sys.stderr)
    if len(points) < 3:
        print("fewer than 3 successful h-points; no fit", file=sys.stderr)
        return EXIT_NUMERICAL
    lo, hi = THRESHOLDS["width_x_slope"]
    print(f"slope_x={fx.slope:.6f} r2={fx.r_squared:.6f} {_pass(lo <= fx.slope <= hi)}", file=out)
    if rc.mode == "T":
        lo, hi = THRESHOLDS["width_t_slope"]
        print(f"slope_t={fy.slope:.6f} r2={fy.r_squared:.6f} {_pass(lo <= fy.slope <= hi)}", file=out)
    else:
        print(f"slope_y={fy.slope:.6f} r2={fy.r_squared:.6f}", file=out)
    return EXIT_OK


def _require(points, errors):
    if errors:
        n, msg = next(iter(errors.items()))
        raise ArithmeticError(f"solve failed at n={n}: {msg}")
    return points


def cmd_agmon_check(args, rc, out) -> int:
    check_assumptions(rc)
    ok_all = True
    rows = []
    for mu in rc.mu:
        points = _require(*solve_all(rc, weight_mu=mu, mode="L"))
        ratios = [an.agmon_ratio(p.pair, p.cfg.potential, mu, p.grid, p.h) for p in points]
        for p, r in zip(points, ratios):
            rows.append((fmt(mu), str(p.n), p.h, r))
        variation = max(ratios) / min(ratios)
        if mu == 1.0:
            ok = all(abs(r - 1.0) <= 1e-12 for r in ratios)
            print(f"mu=1 ratios all 1: {_pass(ok)}", file=out)
        else:
            ok = variation < THRESHOLDS["agmon_max_variation"]
            print(f"mu={mu:g} variation={variation:.6f} {_pass(ok)}", file=out)
        ok_all &= ok
    text = csv_text(["mu", "n", "h", "ratio"], rows, rc)
    atomic_write(_experiment_dir(rc) / "summary.csv", text)
    _emit(text, out)
    return EXIT_OK if ok_all else EXIT_FAIL


def _is_separable(cfg: ModelConfig) -> bool:
    return (cfg.potential.to_spec().get("kind") == "quadratic"
            and cfg.alpha.to_spec().get("kind") == "constant")


def cmd_quasimode_check(args, rc, out) -> int:
    check_assumptions(rc)
    cfgs = [rc.model_config(n) for n in sorted(rc.exponents)]
    if _is_separable(cfgs[0]):
        cfg = cfgs[-1]
        hist = an.quasimode_residual_history(cfg, levels=args.levels, nx=rc.nx, ny=rc.ny)
        rows = [(str(a), str(b), v) for a, b, v in hist]
        text = csv_text(["nx", "ny", "residual"], rows, rc)
        atomic_write(_experiment_dir(rc) / "summary.csv", text)
        _emit(text, out)
        decreasing = all(b[2] < a[2] for a, b in zip(hist, hist[1:]))
        ok = decreasing and hist[-1][2] < THRESHOLDS["separable_residual_max"]
        print(f"separable residual -> {hist[-1][2]:.3e} under refinement {_pass(ok)}", file=out)
        return EXIT_OK if ok else EXIT_FAIL
    res = [(c.h, an.quasimode_residual(c)) for c in cfgs]
    rows = [(str(n), h, r) for n, (h, r) in zip(sorted(rc.exponents), res)]
    text = csv_text(["n", "h", "residual"], rows, rc)
    atomic_write(_experiment_dir(rc) / "summary.csv", text)
    _emit(text, out)
    if len(res) < 3:
        return EXIT_OK
    fit = an.scaling_fit(res)
    lo, hi = THRESHOLDS["quasimode_slope"]
    ok = lo <= fit.slope <= hi
    print(f"slope={fit.slope:.6f} r2={fit.r_squared:.6f} {_pass(ok)}", file=out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_projection_check(args, rc, out) -> int:
    check_assumptions(rc)
    points = _require(*solve_all(rc, mode="L"))
    deficits = [an.projection_deficit(p.pair, p.cfg.alpha, p.grid, rc.fiber) for p in points]
    rows = [(str(p.n), p.h, d) for p, d in zip(points, deficits)]
    text = csv_text(["n", "h", "deficit"], rows, rc)
    atomic_write(_experiment_dir(rc) / "summary.csv", text)
    _emit(text, out)
    decreasing = all(b < a for a, b in zip(deficits, deficits[1:]))
    print(f"deficit decreasing as h decreases: {_pass(decreasing)}", file=out)
    ok = decreasing
    if len(points) >= 3:
        fit = an.scaling_fit([(p.h, d) for p, d in zip(points, deficits)])
        good = fit.slope >= THRESHOLDS["projection_slope_min"]
        print(f"slope={fit.slope:.6f} r2={fit.r_squared:.6f} {_pass(good)}", file=out)
        ok &= good
    return EXIT_OK if ok else EXIT_FAIL


def cmd_numerical_range(args, rc, out) -> int:
    g = uniform_grid(0.0, args.Y, args.N)
    a, b = virial_checks(g)
    z1 = abs(airy_zero(1))
    tol = THRESHOLDS["virial_tol"]
    contains = range_contains_eigenvalue(args.gamma)
    gam = np.linspace(1.0 / args.gamma, args.gamma, 201)
    re = shifted_rayleigh_real_parts(gam)
    both = bool(re.min() < 0 < re.max())
    zq = rayleigh_quotient_dilation(args.gamma, uniform_grid(0.0, 15.0 * args.gamma + args.Y, args.N))
    zc = numerical_range_curve(args.gamma)
    print(f"a = {a:.6f}", file=out)
    print(f"b = {b:.6f}", file=out)
    print(f"a + b = {a + b:.6f}", file=out)
    print(f"containment(gamma={args.gamma:g}) = {str(contains).lower()}", file=out)
    print(f"shifted Rayleigh real parts in [{re.min():.6f}, {re.max():.6f}]", file=out)
    print(f"curve vs quadrature at gamma={args.gamma:g}: {abs(zq - zc):.3e}", file=out)
    checks = [
        ("a = |z1|/3", abs(a - z1 / 3) <= tol),
        ("b = 2|z1|/3", abs(b - 2 * z1 / 3) <= tol),
        ("a + b = |z1|", abs(a + b - z1) <= tol),
        ("triangle contains lambda_1", contains),
        ("shifted real parts take both signs", both),
    ]
    for name, ok in checks:
        print(f"{name}: {_pass(ok)}", file=out)
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_FAIL


def cmd_sharpness(args, rc, out) -> int:
    mus = sorted(set([0.0] + [float(m) for m in rc.mu]))
    rep = an.sharpness_experiment(sorted(rc.exponents), mus)
    header = ["n", "h", "re", "im", "residual"] + [f"ratio_mu_{m:g}" for m in mus]
    rows = [(str(r.n), r.h, r.eigenvalue.real, r.eigenvalue.imag, r.residual)
            + tuple(r.ratios[m] for m in mus) for r in rep.rows]
    text = csv_text(header, rows, rc)
    atomic_write(_experiment_dir(rc) / "summary.csv", text)
    _emit(text, out)
    ok = rep.unweighted_increasing and rep.positive_real_parts
    print(f"mu=0 ratios strictly increasing: {_pass(rep.unweighted_increasing)}", file=out)
    print(f"Re(eigenvalue) > 0: {_pass(rep.positive_real_parts)}", file=out)
    for m in mus:
        if m > 0:
            v = rep.variation(m)
            good = v < THRESHOLDS["agmon_max_variation"]
            print(f"mu={m:g} variation={v:.6f} {_pass(good)}", file=out)
            ok &= good
    return EXIT_OK if ok else EXIT_FAIL


# ------------------------------------------------------------------ parser

def _positive_int(limit=None):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if v < 1 or (limit is not None and v > limit):
            raise argparse.ArgumentTypeError(
                f"must be in [1, {limit}]" if limit else "must be positive")
        return v
    return parse


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _complex(text):
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="btloc", description="Eigenvalue and localization "
                                "experiments for the half-plane Bloch-Torrey model.")
    p.add_argument("--print-defaults", action="store_true",
                   help="print the default run configuration (TOML) and exit")
    sub = p.add_subparsers(dest="command")

    s = sub.add_parser("airy-zeros", help="negative zeros of Ai as CSV")
    s.add_argument("--count", type=_positive_int(100), required=True)
    s.set_defaults(func=cmd_airy_zeros, needs_config=False)

    s = sub.add_parser("spectrum-1d", help="1-D reference spectra")
    s.add_argument("--operator", choices=("airy", "oscillator", "schrodinger"), required=True)
    s.add_argument("--N", type=_positive_int(), default=4000, help="interior nodes")
    s.add_argument("--count", type=_positive_int(50), default=3)
    s.add_argument("--omega", type=_positive_float, default=1.0, help="airy: coupling")
    s.add_argument("--Y", type=_positive_float, default=40.0, help="airy: interval (0, Y)")
    s.add_argument("--kappa", type=_positive_float, default=1.0, help="oscillator: V = kappa^2 x^2")
    s.add_argument("--h", type=_positive_float, default=0.01)
    s.add_argument("--length", type=_positive_float, default=None,
                   help="oscillator: half-width (1); schrodinger: interval (0, L) (pi)")
    s.add_argument("--coefficients", default="0",
                   help="schrodinger: polynomial coefficients c0,c1,... of V")
    s.add_argument("--method", choices=("arnoldi", "dense"), default="arnoldi")
    s.add_argument("--shift", type=_complex, default=0j)
    s.add_argument("--tol", type=_positive_float, default=1e-10)
    s.set_defaults(func=cmd_spectrum_1d, needs_config=False)

    def with_config(name, func, help_text, **extra):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", help="TOML run configuration (defaults if omitted)")
        s.add_argument("--outdir", help="override the output directory")
        s.add_argument("--workers", type=_positive_int(), help="override the worker count")
        s.set_defaults(func=func, needs_config=True, **extra)
        return s

    with_config("solve-2d", cmd_solve_2d, "one solve per configured h; writes eigenpairs and widths")
    with_config("scaling-sweep", cmd_scaling_sweep, "localization widths and their scaling fits")
    with_config("agmon-check", cmd_agmon_check, "weighted norm ratios for each configured mu")
    s = with_config("quasimode-check", cmd_quasimode_check, "quasimode residual and its slope")
    s.add_argument("--levels", type=_positive_int(10), default=5,
                   help="refinement levels for the separable model")
    with_config("projection-check", cmd_projection_check, "fiber projection deficit")
    with_config("sharpness", cmd_sharpness, "weighted norms for the flat-at-infinity well")

    s = sub.add_parser("numerical-range", help="virial identities and numerical-range facts")
    s.add_argument("--gamma", type=_positive_float, default=3.0)
    s.add_argument("--Y", type=_positive_float, default=20.0)
    s.add_argument("--N", type=_positive_int(), default=20000)
    s.set_defaults(func=cmd_numerical_range, needs_config=False)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.print_defaults:
        _emit(RunConfig().to_toml(), out)
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        rc = None
        if args.needs_config:
            rc = RunConfig.load(args.config) if args.config else RunConfig().validate()
            if args.outdir is not None:
                rc = replace(rc, outdir=args.outdir)
            if args.workers is not None:
                rc = replace(rc, workers=args.workers)
            rc.model_config(rc.exponents[0])  # surface model errors as usage errors
        return args.func(args, rc, out)
    except UsageError as exc:
        print(f"btloc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssumptionFailure as exc:
        print("btloc: model assumption violated:", file=sys.stderr)
        for item in exc.report.failures():
            where = "" if item.witness is None else f" at x = {item.witness:.6g}"
            print(f"  {item.name}{where}: {item.detail}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (*NUMERICAL_ERRORS, ValueError) as exc:
        print(f"btloc: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
