"""Closed-form Gaussian quantities for root-count expectations.

Everything here is deterministic: weighted moment sums of the coefficient
squares, the zero-crossing intensity and its quadrature, the hyperbolic
closed forms, and the pointwise covariance-integrand pieces (cross term and
cosine-identity factor) used when pairing a polynomial with its reversal.

The O(n^2) double sum inside the intensity is replaced everywhere by the
algebraic identity sum_{i<j} ci^2 cj^2 (j-i)^2 t^{2i+2j} = A*C - B^2 with
A, B, C the 0th/1st/2nd index-weighted moment sums; the brute sum stays in
the test suite as the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad as _scipy_quad

from ._numeric import fsum_terms
from .ensemble import CoefficientScheme, coefficients, reversed_scheme
from .exceptions import (NumericsError, PoleError, UndefinedCorrelationError,
                         ValidationError)

_CS_TOL = 1e-14          # Cauchy-Schwarz slack for A*C - B^2
_CLAMP_TOL = 1e-12       # |r| may exceed 1 by at most this before erroring
_STABLE_FORM_MIN = 1e-10  # below this, 1 - r^2 is recomputed at 256 bits


@dataclass(frozen=True)
class MomentSums:
    """A = sum ci^2 t^{2i}, B = sum i ci^2 t^{2i}, C = sum i^2 ci^2 t^{2i}."""

    A: float
    B: float
    C: float


@dataclass(frozen=True)
class QuadConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-11
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.max_subdivisions < 1:
            raise ValidationError("quadrature tolerances must be positive")


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    converged: bool


def _sq_weights(scheme: CoefficientScheme) -> np.ndarray:
    c = coefficients(scheme)
    return c * c


def moment_sums(scheme: CoefficientScheme, t: float) -> MomentSums:
    w = _sq_weights(scheme)
    n = scheme.n
    pw = np.empty(n + 1)
    pw[0] = 1.0
    if n:
        pw[1:] = t * t
        with np.errstate(over="ignore", under="ignore"):
            np.cumprod(pw[1:], out=pw[1:])
    i = np.arange(n + 1, dtype=float)
    terms = w * pw
    return MomentSums(fsum_terms(terms), fsum_terms(terms * i),
                      fsum_terms(terms * i * i))


def variance_V(scheme: CoefficientScheme, x: float) -> float:
    """Var P_n(x) = sum ci^2 x^{2i}; overflows to inf for |x| > 1, large n."""
    return moment_sums(scheme, x).A


def correlation_r(scheme: CoefficientScheme, x: float, y: float) -> float:
    vx = variance_V(scheme, x)
    vy = variance_V(scheme, y)
    if not (vx > 0.0 and vy > 0.0):
        raise UndefinedCorrelationError(
            f"zero variance at x={x!r} or y={y!r}")
    w = _sq_weights(scheme)
    pw = np.empty(scheme.n + 1)
    pw[0] = 1.0
    if scheme.n:
        pw[1:] = x * y
        np.cumprod(pw[1:], out=pw[1:])
    r = fsum_terms(w * pw) / math.sqrt(vx * vy)
    if abs(r) > 1.0:
        if abs(r) > 1.0 + _CLAMP_TOL:
            raise NumericsError(f"|r| = {abs(r)!r} exceeds 1 beyond clamping"
                                " tolerance")
        r = math.copysign(1.0, r)
    return r


def one_minus_r_squared(scheme: CoefficientScheme, x: float, y: float) -> float:
    """1 - r(x, y)^2 without forming 1 minus a near-1 quantity.

    Small degrees use the cancellation-free double sum over index pairs;
    larger degrees use (Ax Ay - Sxy^2)/(Ax Ay) with a 256-bit recompute when
    the result drops below 1e-10.
    """
    if x == y:
        return 0.0
    vx = variance_V(scheme, x)
    vy = variance_V(scheme, y)
    if not (vx > 0.0 and vy > 0.0):
        raise UndefinedCorrelationError(
            f"zero variance at x={x!r} or y={y!r}")
    w = _sq_weights(scheme)
    n = scheme.n
    if n <= 64:
        xi = x ** np.arange(n + 1)
        yi = y ** np.arange(n + 1)
        cross = np.outer(xi, yi)
        diff = cross - cross.T
        num = np.outer(w, w) * diff * diff
        return fsum_terms(num[np.triu_indices(n + 1, k=1)]) / (vx * vy)
    pw = np.empty(n + 1)
    pw[0] = 1.0
    pw[1:] = x * y
    np.cumprod(pw[1:], out=pw[1:])
    s = fsum_terms(w * pw)
    val = (vx * vy - s * s) / (vx * vy)
    if val >= _STABLE_FORM_MIN:
        return val
    import mpmath as mp

    with mp.workprec(256):
        ax = mp.mpf(0)
        ay = mp.mpf(0)
        sxy = mp.mpf(0)
        mx, my, mxy = mp.mpf(x), mp.mpf(y), mp.mpf(x) * mp.mpf(y)
        px = py = pxy = mp.mpf(1)
        for wi in w.tolist():
            ax += wi * px
            ay += wi * py
            sxy += wi * pxy
            px *= mx * mx
            py *= my * my
            pxy *= mxy
        out = (ax * ay - sxy * sxy) / (ax * ay)
        return max(float(out), 0.0)


def kacrice_integrand(scheme: CoefficientScheme, t: float) -> float:
    """Zero-crossing intensity (1/pi) sqrt(A C - B^2) / (|t| A).

    At t = 0 the analytic limit (1/pi) |c_1/c_0| is returned; |t| > 1 is
    routed through the reversed scheme via rho_P(t) = rho_R(1/t) / t^2.
    """
    if abs(t) > 1.0:
        return kacrice_integrand(reversed_scheme(scheme), 1.0 / t) / (t * t)
    if t == 0.0:
        c0 = scheme.coefficient(0)
        if c0 == 0.0:
            raise PoleError("integrand pole: c_0 = 0 at t = 0")
        c1 = scheme.coefficient(1) if scheme.n >= 1 else 0.0
        return abs(c1 / c0) / math.pi
    ms = moment_sums(scheme, t)
    disc = ms.A * ms.C - ms.B * ms.B
    if disc < 0.0:
        if disc < -_CS_TOL * ms.A * ms.C:
            raise NumericsError(
                f"A C - B^2 = {disc!r} violates Cauchy-Schwarz at t={t!r}")
        disc = 0.0
    return math.sqrt(disc) / (abs(t) * ms.A) / math.pi


def _endpoint_knots(a: float, b: float, n: int) -> list[float]:
    """Geometric subdivision points toward +-1 (the near-singular ends)."""
    knots = {a, b}
    if a < 0.0 < b:
        knots.add(0.0)
    levels = max(10, int(math.log2(max(n, 2))) + 6)
    for k in range(1, levels):
        for s in (1.0 - 2.0 ** -k, -(1.0 - 2.0 ** -k)):
            if a < s < b:
                knots.add(s)
    return sorted(knots)


def expected_roots(scheme: CoefficientScheme, a: float, b: float,
                   quad: QuadConfig | None = None) -> QuadResult:
    """Gaussian-case expected root count on (a, b) by adaptive quadrature.

    Panels are split geometrically toward +-1 where the intensity grows like
    1/(1-t); each panel runs an adaptive Gauss-Kronrod rule at the configured
    tolerances. Accuracy failure is reported in the converged flag, never
    raised.
    """
    quad = quad or QuadConfig()
    if not (math.isfinite(a) and math.isfinite(b) and a <= b):
        raise ValidationError("need finite a <= b")
    if a == b:
        return QuadResult(0.0, 0.0, True)
    knots = _endpoint_knots(a, b, scheme.n)
    total = 0.0
    err = 0.0
    converged = True
    for lo, hi in zip(knots, knots[1:]):
        out = _scipy_quad(lambda t: kacrice_integrand(scheme, t), lo, hi,
                          epsabs=quad.abs_tol / max(len(knots) - 1, 1),
                          epsrel=quad.rel_tol,
                          limit=quad.max_subdivisions, full_output=1)
        total += out[0]
        err += out[1]
        if len(out) > 3:
            converged = False
    return QuadResult(total, err, converged)


def hyperbolic_variance_closed(rho: float, x: float) -> float:
    """Limit variance (1 - x^2)^{-(2 rho + 1)} of the hyperbolic family."""
    if not abs(x) < 1.0:
        raise ValidationError("need |x| < 1")
    if rho <= -0.5:
        raise ValidationError("need rho > -1/2")
    return (1.0 - x * x) ** -(2.0 * rho + 1.0)


def c_k_rho(rho: float, k: int) -> float:
    """sqrt((2 rho + 1)(2 rho + 2)...(2 rho + k) / k!), in log space."""
    if k < 0:
        raise ValidationError("need k >= 0")
    if rho <= -0.5:
        raise ValidationError("need rho > -1/2")
    if k == 0:
        return 1.0
    j = np.arange(1, k + 1, dtype=float)
    return math.exp(0.5 * (float(np.log(2.0 * rho + j).sum())
                           - math.lgamma(k + 1.0)))


def c_k_rho_array(rho: float, n: int) -> np.ndarray:
    """Vector (c_{0,rho} .. c_{n,rho}) via cumulative-ratio products."""
    j = np.arange(n, dtype=float)
    ratios = (2.0 * rho + 1.0 + j) / (j + 1.0)
    return np.sqrt(np.concatenate(([1.0], np.cumprod(ratios))))


_ENVELOPE_CACHE: dict = {}


def envelope_variance_bound(scheme: CoefficientScheme, x: float,
                            C: float = 10.0) -> tuple[float, float]:
    """Bracket [k_lo, k_hi] * (1 - x + 1/n)^{-(2 rho + 1)} containing V(x).

    The bracket constants are calibrated once per (scheme, C) by scanning x
    over (1 - 1/C, 1]; this is a measurement of the Theta-constants, not a
    theorem.
    """
    if C <= 1.0:
        raise ValidationError("need C > 1")
    if not (1.0 - 1.0 / C < x <= 1.0):
        raise ValidationError(f"x={x!r} outside the calibrated range "
                              f"(1 - 1/{C}, 1]")
    key = (scheme, C)
    if key not in _ENVELOPE_CACHE:
        n = scheme.n
        expo = 2.0 * scheme.rho + 1.0
        u = np.concatenate((np.geomspace(1.0 / C, 1.0 / (50.0 * n), 1024),
                            [0.0]))
        ratios = [variance_V(scheme, 1.0 - ui) * (ui + 1.0 / n) ** expo
                  for ui in u]
        _ENVELOPE_CACHE[key] = (min(ratios) * (1.0 - 1e-3),
                                max(ratios) * (1.0 + 1e-3))
    k_lo, k_hi = _ENVELOPE_CACHE[key]
    g = (1.0 - x + 1.0 / scheme.n) ** -(2.0 * scheme.rho + 1.0)
    return (k_lo * g, k_hi * g)


def delta_cross(scheme: CoefficientScheme, x: float, y: float) -> float:
    """Cross term sum_i (ci^2 / c_n) x^i y^{n-i} of the covariance integrand."""
    c = coefficients(scheme)
    cn = c[-1]
    if cn == 0.0:
        raise ValidationError("c_n = 0")
    n = scheme.n
    xi = x ** np.arange(n + 1, dtype=float)
    yi = y ** np.arange(n, -1, -1, dtype=float)
    return fsum_terms((c * c / cn) * xi * yi)


def f4_term(scheme: CoefficientScheme, x: float, y: float, s: float,
            t: float) -> float:
    """Gaussian cosine-identity factor of the polynomial/reversal covariance.

    exp(-s^2 V(x)/2) exp(-t^2 V_R(y)/2) (cosh(s t Delta) - 1) with
    V_R(y) = sum ci^2 y^{2(n-i)} / c_n^2; the cosh - 1 uses the stable
    2 sinh^2(u/2) form.
    """
    c = coefficients(scheme)
    cn = c[-1]
    if cn == 0.0:
        raise ValidationError("c_n = 0")
    n = scheme.n
    vx = variance_V(scheme, x)
    yi = y ** (2.0 * np.arange(n, -1, -1, dtype=float))
    v_r = fsum_terms((c * c / (cn * cn)) * yi)
    u = s * t * delta_cross(scheme, x, y)
    cosh_m1 = 2.0 * math.sinh(0.5 * u) ** 2
    return math.exp(-0.5 * s * s * vx) * math.exp(-0.5 * t * t * v_r) * cosh_m1
