"""Certified real-root counting, complex-root oracle, and the Jensen disk bound.

The certified counter is a sign-variation bisection: on each cell it either
proves the polynomial has no zero (first-order Taylor enclosure with a
rigorous remainder), proves it is strictly monotone (then the count is a
certified endpoint-sign comparison), or splits. Cells the float pass cannot
decide escalate through 128/256/512-bit arithmetic; low degrees fall back to
exact rational Sturm chains, so `certified=False` only appears past the
512-bit cap on high-degree near-multiple roots.

Counting intervals are half-open [a, b). Counts are of distinct real roots.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._numeric import (exact_sign, gamma_bound, mp_eval, power_matrix)
from .ensemble import SampledPolynomial, reverse_polynomial
from .exceptions import (DegenerateCoefficientError, ValidationError,
                         ZeroPolynomialError)

STURM_DEGREE_CAP = 128      # exact-rational fallback ceiling
PRECISION_LADDER = (128, 256, 512)
MAX_CELLS = 200_000
_SWEEP_CHUNK = 1024


@dataclass(frozen=True)
class CertifiedCount:
    """Root count plus the certification status of every sign decision."""

    count: int
    certified: bool
    precision_bits: int

    def __add__(self, other: "CertifiedCount") -> "CertifiedCount":
        return CertifiedCount(self.count + other.count,
                              self.certified and other.certified,
                              max(self.precision_bits, other.precision_bits))


@dataclass(frozen=True)
class CoreRegion:
    """The set +-(1-a_n, 1-b_n) union +-(1-a_n, 1-b_n)^{-1}."""

    a_n: float
    b_n: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.b_n < self.a_n < 1.0):
            raise ValidationError(
                f"core region needs 0 <= b_n < a_n < 1, got "
                f"a_n={self.a_n!r}, b_n={self.b_n!r}")

    @property
    def intervals(self):
        u, v = 1.0 - self.a_n, 1.0 - self.b_n
        return ((u, v), (-v, -u), (1.0 / v, 1.0 / u), (-1.0 / u, -1.0 / v))

    @classmethod
    def default_for_degree(cls, n: int) -> "CoreRegion":
        # a_n = exp(-2 log^{1/5} n), b_n = 1/(a_n n)
        a_n = math.exp(-2.0 * math.log(n) ** 0.2)
        return cls(a_n, 1.0 / (a_n * n))


def _coeff_array(p) -> np.ndarray:
    if isinstance(p, SampledPolynomial):
        c = np.asarray(p.coeffs, dtype=float)
    else:
        c = np.asarray(p, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValidationError("expected a one-dimensional coefficient sequence")
    if not np.all(np.isfinite(c)):
        raise ValidationError("coefficients must be finite")
    return c


def _strip_leading(c: np.ndarray) -> np.ndarray:
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        raise ZeroPolynomialError("polynomial is identically zero")
    return c[: nz[-1] + 1]


class _Counter:
    """Per-polynomial state for the certified bisection."""

    def __init__(self, coeffs: np.ndarray):
        c = _strip_leading(_coeff_array(coeffs))
        self.c = c
        self.n = c.size - 1
        i = np.arange(1, c.size)
        self.d1 = c[1:] * i
        self.d2 = self.d1[1:] * np.arange(1, self.d1.size) if self.n >= 2 \
            else np.zeros(0)
        self.ac = np.abs(c)
        self.ad1 = np.abs(self.d1)
        self.ad2 = np.abs(self.d2)
        self.gamma = gamma_bound(self.n + 1)
        self.bits = 53
        self.certified = True

    # -- point sign certification ladder --------------------------------

    def sign_at(self, x: float) -> int:
        pw = power_matrix([x], self.n)[:, 0]
        v = float(self.c @ pw)
        err = self.gamma * float(self.ac @ np.abs(pw))
        if math.isfinite(v) and abs(v) > err:
            return 1 if v > 0 else -1
        import mpmath as mp
        for prec in PRECISION_LADDER:
            with mp.workprec(prec):
                val = mp_eval(self.c, mp.mpf(x), prec)
                mag = mp_eval(self.ac, abs(mp.mpf(x)), prec)
                bound = mag * (self.n + 4) * mp.mpf(2) ** (2 - prec)
                if abs(val) > bound:
                    self.bits = max(self.bits, prec)
                    return 1 if val > 0 else -1
        self.bits = max(self.bits, PRECISION_LADDER[-1])
        return exact_sign(self.c, x)

    # -- vectorized cell tests -------------------------------------------

    def _tests(self, lo: np.ndarray, hi: np.ndarray):
        """Returns (excl, mono) boolean masks for closed cells [lo, hi]."""
        c = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        q = np.maximum(np.abs(lo), np.abs(hi))
        pw = power_matrix(c, self.n)
        apw = np.abs(pw)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            p0 = self.c @ pw
            p1 = self.d1 @ pw[:-1] if self.n >= 1 else np.zeros_like(c)
            e0 = self.gamma * (self.ac @ apw)
            e1 = self.gamma * (self.ad1 @ apw[:-1]) if self.n >= 1 \
                else np.zeros_like(c)
            if self.n >= 2:
                pwq = power_matrix(q, self.n - 2)
                b2 = (self.ad2 @ pwq) * (1.0 + self.gamma)
            else:
                b2 = np.zeros_like(c)
            excl = np.abs(p0) - e0 > h * (np.abs(p1) + e1) + 0.5 * h * h * b2
            mono = (np.abs(p1) - e1 > h * b2) & (self.n >= 1)
        excl &= np.isfinite(p0)
        mono &= np.isfinite(p1)
        return excl, mono

    # -- exact rational Sturm (low degree, exact result) ------------------

    def _sturm_cell(self, lo: float, hi: float) -> int:
        cnt = sturm_count(self.c, lo, hi)
        self.bits = max(self.bits, PRECISION_LADDER[-1])
        return cnt

    # -- arbitrary-precision cell resolution -----------------------------

    def _mp_cell(self, lo: float, hi: float, prec: int, budget: int = 512):
        """Count roots in [lo, hi) at `prec` bits; None when undecidable."""
        import mpmath as mp

        with mp.workprec(prec):
            eps = mp.mpf(2) ** (4 - prec)
            ulp_gate = mp.mpf(2) ** (8 - prec)
            stack = [(mp.mpf(lo), mp.mpf(hi))]
            monos = []
            used = 0
            while stack:
                used += 1
                if used > budget:
                    return None
                a, b = stack.pop()
                c = (a + b) / 2
                h = (b - a) / 2
                q = max(abs(a), abs(b))
                p0 = mp_eval(self.c, c, prec)
                p1 = mp_eval(self.d1, c, prec) if self.n >= 1 else mp.mpf(0)
                mag0 = mp_eval(self.ac, abs(c), prec)
                mag1 = mp_eval(self.ad1, abs(c), prec) if self.n >= 1 else mp.mpf(0)
                b2 = mp_eval(self.ad2, q, prec) * (1 + eps) if self.n >= 2 \
                    else mp.mpf(0)
                e0 = mag0 * (self.n + 4) * eps
                e1 = mag1 * (self.n + 4) * eps
                if abs(p0) - e0 > h * (abs(p1) + e1) + h * h * b2 / 2:
                    continue
                if self.n >= 1 and abs(p1) - e1 > h * b2:
                    monos.append((a, b))
                    continue
                if h < ulp_gate * max(mp.mpf(1), abs(c)):
                    return None
                stack.append((a, c))
                stack.append((c, b))
            total = 0
            for a, b in monos:
                sa = self._mp_sign(a, prec)
                sb = self._mp_sign(b, prec)
                if sa is None or sb is None:
                    return None
                if sa == 0:
                    total += 1
                elif sb != 0 and sa != sb:
                    total += 1
            return total

    def _mp_sign(self, x, prec):
        """Sign of P at an mpf point, or None when prec cannot decide.

        Midpoints produced by the mp bisection are dyadic, so an exact
        rational decision is available as the last step.
        """
        import mpmath as mp

        with mp.workprec(prec):
            val = mp_eval(self.c, x, prec)
            mag = mp_eval(self.ac, abs(x), prec)
            bound = mag * (self.n + 4) * mp.mpf(2) ** (2 - prec)
            if abs(val) > bound:
                return 1 if val > 0 else -1
        sign, man, exp, _ = mp.mpf(x)._mpf_
        if man == 0:
            num = Fraction(0)
        elif exp >= 0:
            num = Fraction(man * 2 ** exp)
        else:
            num = Fraction(man, 2 ** (-exp))
        fx = -num if sign else num
        acc = Fraction(0)
        for a in reversed(self.c.tolist()):
            acc = acc * fx + Fraction(a)
        return (acc > 0) - (acc < 0)

    def _resolve_stuck(self, lo: float, hi: float) -> int:
        if self.n <= STURM_DEGREE_CAP:
            return self._sturm_cell(lo, hi)
        for prec in PRECISION_LADDER:
            out = self._mp_cell(lo, hi, prec)
            if out is not None:
                self.bits = max(self.bits, prec)
                return out
        # best estimate: one root (sign change, or an unresolved touching root)
        self.certified = False
        self.bits = max(self.bits, PRECISION_LADDER[-1])
        return 1

    # -- main half-open counting loop -------------------------------------

    def count_halfopen(self, a: float, b: float) -> int:
        if self.n == 0:
            return 0
        queue = [(float(a), float(b))]
        monotone = []
        stuck = []
        processed = 0
        while queue:
            chunk = queue[: _SWEEP_CHUNK]
            del queue[: _SWEEP_CHUNK]
            processed += len(chunk)
            lo = np.array([t[0] for t in chunk])
            hi = np.array([t[1] for t in chunk])
            mid = 0.5 * (lo + hi)
            too_thin = (mid <= lo) | (mid >= hi)
            excl, mono = self._tests(lo, hi)
            over = processed > MAX_CELLS
            for i in range(lo.size):
                if excl[i]:
                    continue
                if mono[i]:
                    monotone.append((lo[i], hi[i]))
                elif too_thin[i] or over:
                    stuck.append((lo[i], hi[i]))
                else:
                    queue.append((lo[i], mid[i]))
                    queue.append((mid[i], hi[i]))
        count = 0
        if monotone:
            pts = sorted({x for cell in monotone for x in cell})
            signs = self._batch_signs(np.array(pts))
            for clo, chi in monotone:
                s_lo, s_hi = signs[clo], signs[chi]
                if s_lo == 0:
                    count += 1
                elif s_hi != 0 and s_lo != s_hi:
                    count += 1
        for clo, chi in stuck:
            count += self._resolve_stuck(clo, chi)
        return count

    def _batch_signs(self, pts: np.ndarray) -> dict:
        pw = power_matrix(pts, self.n)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            v = self.c @ pw
            err = self.gamma * (self.ac @ np.abs(pw))
        out = {}
        for j, x in enumerate(pts):
            if np.isfinite(v[j]) and abs(v[j]) > err[j]:
                out[x] = 1 if v[j] > 0 else -1
            else:
                out[x] = self.sign_at(float(x))
        return out


def _as_result(counter: _Counter, count: int) -> CertifiedCount:
    return CertifiedCount(int(count), counter.certified, counter.bits)


class IntervalCounter:
    """Reusable certified counter for many intervals of one polynomial.

    Precomputes derivative and absolute-coefficient arrays once; `count`
    is the half-open [a, b) count with the same guarantees as
    count_real_roots.
    """

    def __init__(self, coeffs):
        self._counter = _Counter(coeffs)

    def count(self, a: float, b: float) -> CertifiedCount:
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ValidationError(f"need finite a < b, got a={a!r}, b={b!r}")
        c = self._counter
        return _as_result(c, c.count_halfopen(float(a), float(b)))

    def count_open(self, a: float, b: float) -> CertifiedCount:
        return count_open_interval(self._counter, float(a), float(b))


def count_real_roots(p, a: float, b: float) -> CertifiedCount:
    """Distinct real roots of p in [a, b), certified by interval bisection."""
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise ValidationError(f"need finite a < b, got a={a!r}, b={b!r}")
    counter = _Counter(p)
    return _as_result(counter, counter.count_halfopen(a, b))


def count_all_real_roots(p) -> CertifiedCount:
    """Distinct real roots on the whole real line.

    Uses [-1, 1) for the polynomial itself and for its (exact, unnormalized)
    coefficient reversal, plus certified sign checks at +-1; reversal keeps
    every arithmetic step exact in floats.
    """
    c = _strip_leading(_coeff_array(p))
    inner = _Counter(c)
    outer = _Counter(c[::-1].copy())
    count = inner.count_halfopen(-1.0, 1.0)
    count += outer.count_halfopen(-1.0, 1.0)
    if inner.sign_at(1.0) == 0:
        count += 1
    if inner.sign_at(-1.0) == 0:
        count -= 1
    certified = inner.certified and outer.certified
    bits = max(inner.bits, outer.bits)
    return CertifiedCount(int(count), certified, bits)


def count_open_interval(counter_or_coeffs, a: float, b: float) -> CertifiedCount:
    """Distinct real roots in the open interval (a, b)."""
    counter = counter_or_coeffs if isinstance(counter_or_coeffs, _Counter) \
        else _Counter(counter_or_coeffs)
    count = counter.count_halfopen(a, b)
    if counter.sign_at(a) == 0:
        count -= 1
    return _as_result(counter, count)


def count_core_region(p, region: CoreRegion) -> CertifiedCount:
    """Roots of p in the core region; reciprocal parts counted on the reversal.

    Intervals are open on both sides. Requires nonzero leading and constant
    coefficients (the reciprocal intervals are undefined otherwise).
    """
    c = _coeff_array(p)
    if c[-1] == 0.0:
        raise DegenerateCoefficientError("leading coefficient is zero")
    if c[0] == 0.0:
        raise DegenerateCoefficientError("constant coefficient is zero")
    u = 1.0 - region.a_n
    v = 1.0 - region.b_n
    inner = _Counter(c)
    outer = _Counter(c[::-1].copy())
    total = 0
    for counter in (inner, outer):
        total += count_open_interval(counter, u, v).count
        total += count_open_interval(counter, -v, -u).count
    certified = inner.certified and outer.certified
    bits = max(inner.bits, outer.bits)
    return CertifiedCount(int(total), certified, bits)


# ---------------------------------------------------------------------------
# Exact rational Sturm chain (independent certified method, low degree)

def _sturm_chain(p):
    dp = [c * k for k, c in enumerate(p)][1:]
    chain = [p, dp]
    while len(chain[-1]) > 1:
        r = _poly_rem(chain[-2], chain[-1])
        if not r:
            break
        chain.append([-c for c in r])
    return chain


def _poly_rem(a, b):
    a = list(a)
    db, lb = len(b) - 1, b[-1]
    while len(a) - 1 >= db and any(a):
        da = len(a) - 1
        if a[-1] == 0:
            a.pop()
            continue
        f = a[-1] / lb
        for k in range(db + 1):
            a[da - db + k] -= f * b[k]
        a.pop()
    while a and a[-1] == 0:
        a.pop()
    return a


def _sign_variations(chain, x):
    signs = []
    for poly in chain:
        acc = Fraction(0)
        for c in reversed(poly):
            acc = acc * x + c
        s = (acc > 0) - (acc < 0)
        if s != 0:
            signs.append(s)
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def _deflate_at(p, x):
    """Divide out (X - x) while x is a root; returns (reduced, multiplicity)."""
    mult = 0
    while len(p) > 1:
        acc = Fraction(0)
        for c in reversed(p):
            acc = acc * x + c
        if acc != 0:
            break
        out = [Fraction(0)] * (len(p) - 1)
        carry = Fraction(0)
        for k in range(len(p) - 1, 0, -1):
            carry = p[k] + carry * x
            out[k - 1] = carry
        p = out
        mult += 1
    return p, mult


def sturm_count(coeffs, a: float, b: float) -> int:
    """Exact count of distinct real roots in [a, b) via rational Sturm chains.

    Coefficients and endpoints are binary floats, hence exact rationals; the
    result is exact, including multiple-root inputs.
    """
    if not a < b:
        raise ValidationError("need a < b")
    c = _strip_leading(_coeff_array(coeffs))
    p = [Fraction(float(v)) for v in c]
    if len(p) == 1:
        return 0
    fa, fb = Fraction(float(a)), Fraction(float(b))
    p, mult_a = _deflate_at(p, fa)
    p, _ = _deflate_at(p, fb)
    if len(p) == 1:
        return (1 if mult_a else 0)
    chain = _sturm_chain(p)
    inside = _sign_variations(chain, fa) - _sign_variations(chain, fb)
    return inside + (1 if mult_a else 0)


# ---------------------------------------------------------------------------
# Complex-root oracle and disk counting

def complex_roots(p, *, residual_tol: float = 1e-8,
                  newton_steps: int = 3) -> np.ndarray:
    """All n roots via the balanced companion eigenproblem plus Newton polish.

    Every returned root satisfies |P(z)| <= residual_tol * sum |a_i| |z|^i;
    roots that fail after refinement trigger a warning (flagged roots).
    """
    c = _coeff_array(p)
    if c[-1] == 0.0:
        raise DegenerateCoefficientError("leading coefficient is zero")
    if c.size == 1:
        return np.zeros(0, dtype=complex)
    roots = np.roots(c[::-1])
    d1 = c[1:] * np.arange(1, c.size)
    for _ in range(newton_steps):
        pv = np.polynomial.polynomial.polyval(roots, c)
        dv = np.polynomial.polynomial.polyval(roots, d1)
        step = np.where(dv != 0, pv / np.where(dv == 0, 1.0, dv), 0.0)
        moved = roots - step
        ok = np.abs(np.polynomial.polynomial.polyval(moved, c)) <= np.abs(pv)
        roots = np.where(ok, moved, roots)
    scale = np.polynomial.polynomial.polyval(np.abs(roots), np.abs(c))
    resid = np.abs(np.polynomial.polynomial.polyval(roots, c))
    bad = resid > residual_tol * np.maximum(scale, np.finfo(float).tiny)
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} root(s) exceed the residual "
                      f"tolerance {residual_tol:g}", RuntimeWarning,
                      stacklevel=2)
    return roots


def count_roots_in_disk(p, center: complex, radius: float,
                        *, boundary_tol: float = 1e-9) -> int:
    """Number of complex roots in the open disk B(center, radius)."""
    if radius <= 0:
        raise ValidationError("radius must be positive")
    dist = np.abs(complex_roots(p) - complex(center))
    near = np.abs(dist - radius) <= boundary_tol * max(1.0, radius)
    if np.any(near):
        warnings.warn(f"{int(near.sum())} root(s) within {boundary_tol:g} of "
                      "the disk boundary", RuntimeWarning, stacklevel=2)
    return int(np.count_nonzero(dist < radius))


def jensen_bound(p, z: complex, r: float, R: float,
                 *, initial_samples: int = 256, sup_rel_tol: float = 1e-6,
                 max_doublings: int = 8) -> float:
    """Disk-count bound log(M1/M2) / log((R^2+r^2)/(2 R r)).

    Circle suprema are taken by dense boundary sampling (maximum modulus
    principle), doubling the sample count until both change by less than
    sup_rel_tol relatively. Returns math.inf when M2 is numerically zero.
    """
    if not 0 < r < R:
        raise ValidationError("need 0 < r < R")
    c = _strip_leading(_coeff_array(p))

    def circle_sup(radius: float) -> float:
        m = initial_samples
        prev = -1.0
        for _ in range(max_doublings + 1):
            theta = 2.0 * np.pi * (np.arange(m) + 0.5) / m
            pts = complex(z) + radius * np.exp(1j * theta)
            cur = float(np.abs(
                np.polynomial.polynomial.polyval(pts, c)).max())
            if prev >= 0 and abs(cur - prev) <= sup_rel_tol * max(cur, 1e-300):
                return cur
            prev, m = cur, 2 * m
        return prev

    m1 = circle_sup(R)
    m2 = circle_sup(r)
    if m2 <= 0.0:
        return math.inf
    denom = math.log((R * R + r * r) / (2.0 * R * r))
    return math.log(m1 / m2) / denom


def reversal_counts_match(p: SampledPolynomial, tol: float = 1e-8) -> bool:
    """Check that nonzero roots of reverse_polynomial(p) are reciprocals of p's."""
    rev = reverse_polynomial(p)
    zp = complex_roots(p)
    zr = complex_roots(rev)
    zp = zp[np.abs(zp) > tol]
    inv = np.sort_complex(1.0 / zp)
    zr = np.sort_complex(zr[np.abs(zr) > tol])
    if inv.size != zr.size:
        return False
    return bool(np.all(np.abs(inv - zr) <= tol * (1.0 + np.abs(inv))))
