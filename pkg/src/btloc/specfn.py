"""Airy function Ai and its derivative for real and complex arguments.

Three evaluation routes are combined:

* the Maclaurin series, used wherever its cancellation error stays small,
* the large-argument asymptotic expansions (decaying form in
  ``|arg z| <= 2*pi/3``, oscillatory form around the negative real axis),
* a Taylor-stepping bridge that carries asymptotic values inward along a
  ray in the decaying sector, where neither of the two above is accurate.

The public functions accept scalars or arrays and are valid for
``|z| <= AIRY_WINDOW``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "AIRY_WINDOW",
    "AiryDomainError",
    "AiryZeroTable",
    "airy_ai",
    "airy_ai_prime",
    "airy_pair",
    "airy_zero",
    "airy_zeros",
]

AIRY_WINDOW = 50.0

# radius beyond which the asymptotic series is used directly
_R_ASYMP = 7.5
# Maclaurin is trusted while |zeta| + Re(zeta) stays below this
_MACLAURIN_BUDGET = 11.5
_BRIDGE_STEP = 0.5
_TAYLOR_TERMS = 40

_AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
_AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)
_SQRT_PI = math.sqrt(math.pi)


class AiryDomainError(ValueError):
    """Raised when an argument lies outside the validity window."""


def _asymptotic_coefficients(nterms=40):
    u = np.empty(nterms)
    v = np.empty(nterms)
    u[0] = v[0] = 1.0
    for k in range(1, nterms):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
        v[k] = -(6 * k + 1) / (6 * k - 1) * u[k]
    return u, v


_U, _V = _asymptotic_coefficients()


def _maclaurin(z):
    """Power series about the origin; returns (Ai, Ai')."""
    z3 = z ** 3
    f = np.ones_like(z)
    g = z.copy()
    fp = 0.5 * z * z
    gp = np.ones_like(z)
    tf, tg, tfp, tgp = f.copy(), g.copy(), fp.copy(), gp.copy()
    for k in range(1, 80):
        tf = tf * z3 / ((3 * k - 1) * (3 * k))
        tg = tg * z3 / ((3 * k) * (3 * k + 1))
        tgp = tgp * z3 / ((3 * k - 2) * (3 * k))
        if k > 1:
            tfp = tfp * z3 / ((3 * k - 3) * (3 * k - 1))
            fp = fp + tfp
        f = f + tf
        g = g + tg
        gp = gp + tgp
        if k > 4:
            scale = np.abs(f) + np.abs(g) + np.abs(fp) + np.abs(gp)
            tail = np.abs(tf) + np.abs(tg) + np.abs(tfp) + np.abs(tgp)
            if np.all(tail <= 1e-18 * scale):
                break
    ai = _AI0 * f + _AIP0 * g
    aip = _AI0 * fp + _AIP0 * gp
    return ai, aip


def _series_sum(coef, zeta, alternate):
    """Sum of coef[k] * (+-1)^k / zeta^k, truncated at its smallest term."""
    out = np.ones_like(zeta)
    term = np.ones_like(zeta)
    prev = np.full(zeta.shape, np.inf)
    active = np.ones(zeta.shape, dtype=bool)
    inv = 1.0 / zeta
    for k in range(1, len(coef)):
        t = coef[k] * inv ** k
        if alternate:
            t = t * (-1.0) ** k
        mag = np.abs(t)
        active &= mag < prev
        if not active.any():
            break
        out = np.where(active, out + t, out)
        prev = np.where(active, mag, prev)
        active &= mag > 1e-17 * np.abs(out)
    return out


def _asymptotic(z):
    """Large-|z| expansions; returns (Ai, Ai')."""
    ai = np.empty_like(z)
    aip = np.empty_like(z)
    decaying = np.abs(np.angle(z)) <= 2.0 * np.pi / 3.0
    if decaying.any():
        zz = z[decaying]
        zeta = 2.0 / 3.0 * zz ** 1.5
        e = np.exp(-zeta)
        q = zz ** 0.25
        ai[decaying] = e / (2.0 * _SQRT_PI * q) * _series_sum(_U, zeta, True)
        aip[decaying] = -q * e / (2.0 * _SQRT_PI) * _series_sum(_V, zeta, True)
    osc = ~decaying
    if osc.any():
        w = -z[osc]
        zeta = 2.0 / 3.0 * w ** 1.5
        inv2 = 1.0 / (zeta * zeta)
        # even and odd parts of the series
        pu = _even_odd(_U, inv2, 0)
        qu = _even_odd(_U, inv2, 1) / zeta
        pv = _even_odd(_V, inv2, 0)
        qv = _even_odd(_V, inv2, 1) / zeta
        arg = zeta - np.pi / 4.0
        c, s = np.cos(arg), np.sin(arg)
        q = w ** 0.25
        ai[osc] = (c * pu + s * qu) / (_SQRT_PI * q)
        aip[osc] = q * (s * pv - c * qv) / _SQRT_PI
    return ai, aip


def _even_odd(coef, inv2, parity):
    """Sum over k of (-1)^k coef[2k+parity] * inv2^k, truncated at the smallest term."""
    out = np.full(inv2.shape, coef[parity], dtype=complex)
    prev = np.full(inv2.shape, np.inf)
    active = np.ones(inv2.shape, dtype=bool)
    power = np.ones_like(inv2)
    for k in range(1, (len(coef) - parity) // 2):
        power = power * inv2
        t = (-1.0) ** k * coef[2 * k + parity] * power
        mag = np.abs(t)
        active &= mag < prev
        if not active.any():
            break
        out = np.where(active, out + t, out)
        prev = np.where(active, mag, prev)
    return out


def _taylor_step(z0, a, ap, dz):
    """Advance (Ai, Ai') from z0 to z0 + dz with a truncated Taylor series."""
    c_prev2 = np.zeros_like(a)  # c_{k-3}
    c_prev1 = a  # c_{k-2}
    c_cur = ap  # c_{k-1}
    val = a + ap * dz
    der = ap.copy()
    p = dz.copy()  # dz^(k-1)
    for k in range(2, _TAYLOR_TERMS):
        c_new = (z0 * c_prev1 + c_prev2) / (k * (k - 1))
        der = der + k * c_new * p
        p = p * dz
        val = val + c_new * p
        c_prev2, c_prev1, c_cur = c_prev1, c_cur, c_new
    return val, der


def _bridge(z):
    """Decaying-sector points inside the asymptotic radius: step in from |z| = _R_ASYMP."""
    theta = np.angle(z)
    z0 = _R_ASYMP * np.exp(1j * theta)
    a, ap = _asymptotic(z0)
    dist = _R_ASYMP - np.abs(z)
    nsteps = int(np.ceil(dist.max() / _BRIDGE_STEP)) if dist.size else 0
    nsteps = max(nsteps, 1)
    dz = (z - z0) / nsteps
    cur = z0
    for _ in range(nsteps):
        a, ap = _taylor_step(cur, a, ap, dz)
        cur = cur + dz
    return a, ap


def _evaluate(z):
    """Vectorized (Ai, Ai') on a flat complex array without window checks."""
    ai = np.empty_like(z)
    aip = np.empty_like(z)
    r = np.abs(z)
    far = r >= _R_ASYMP
    if far.any():
        ai[far], aip[far] = _asymptotic(z[far])
    near = ~far
    if near.any():
        zn = z[near]
        zeta = 2.0 / 3.0 * zn ** 1.5
        series_ok = np.abs(zeta) + zeta.real <= _MACLAURIN_BUDGET
        a = np.empty_like(zn)
        ap = np.empty_like(zn)
        if series_ok.any():
            a[series_ok], ap[series_ok] = _maclaurin(zn[series_ok])
        if (~series_ok).any():
            a[~series_ok], ap[~series_ok] = _bridge(zn[~series_ok])
        ai[near] = a
        aip[near] = ap
    return ai, aip


def _prepare(z, check=True):
    arr = np.asarray(z)
    is_real = not np.iscomplexobj(arr)
    flat = np.atleast_1d(arr).astype(complex).ravel()
    if not np.all(np.isfinite(flat)):
        raise AiryDomainError("non-finite argument")
    if check and flat.size and np.abs(flat).max() > AIRY_WINDOW:
        raise AiryDomainError(
            f"|z| = {np.abs(flat).max():.6g} exceeds the validity window {AIRY_WINDOW}"
        )
    return arr, is_real, flat


def _finish(values, arr, is_real):
    out = values.reshape(arr.shape)
    if is_real:
        out = out.real
    if out.ndim == 0:
        return out.item()
    return out


def airy_pair(z, *, check=True):
    """Return ``(Ai(z), Ai'(z))``.

    Parameters
    ----------
    z : scalar or array_like, real or complex
    check : bool
        Enforce ``|z| <= AIRY_WINDOW``.  Internal callers that need slightly
        larger negative arguments (high-order zeros) switch this off.

    Returns
    -------
    tuple
        Real results for real input, complex results otherwise.
    """
    arr, is_real, flat = _prepare(z, check)
    ai, aip = _evaluate(flat)
    return _finish(ai, arr, is_real), _finish(aip, arr, is_real)


def airy_ai(z):
    """Airy function Ai(z) for ``|z| <= AIRY_WINDOW``, relative accuracy ~1e-10."""
    return airy_pair(z)[0]


def airy_ai_prime(z):
    """Derivative Ai'(z) for ``|z| <= AIRY_WINDOW``."""
    return airy_pair(z)[1]


@dataclass(frozen=True)
class AiryZeroTable:
    """The first ``count`` zeros of Ai, all negative and strictly decreasing."""

    zeros: tuple
    count: int

    def __post_init__(self):
        if self.count != len(self.zeros) or self.count < 1:
            raise ValueError("count must match the number of zeros")
        z = np.asarray(self.zeros)
        if np.any(z >= 0) or np.any(np.diff(z) >= 0):
            raise ValueError("zeros must be negative and strictly decreasing")

    def __getitem__(self, n):
        """1-based access, ``table[1]`` is the rightmost zero."""
        return self.zeros[n - 1]


@lru_cache(maxsize=None)
def airy_zero(n: int) -> float:
    """n-th zero of Ai (n = 1 is the rightmost), for 1 <= n <= 100.

    Newton's method on Ai seeded by ``-(3*pi*(4n-1)/8)**(2/3)``.
    """
    if isinstance(n, bool) or int(n) != n or not 1 <= n <= 100:
        raise ValueError("airy_zero needs an integer 1 <= n <= 100")
    n = int(n)
    x = -((3.0 * math.pi * (4 * n - 1) / 8.0) ** (2.0 / 3.0))
    for _ in range(50):
        a, ap = airy_pair(x, check=False)
        step = a / ap
        x -= step
        if abs(step) < 1e-13:
            return float(x)
    raise RuntimeError(f"Newton iteration for Airy zero {n} did not converge")


def airy_zeros(count: int) -> AiryZeroTable:
    """Table of the first ``count`` Airy zeros."""
    return AiryZeroTable(tuple(airy_zero(k) for k in range(1, count + 1)), count)
