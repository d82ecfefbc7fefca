"""Low-level polynomial evaluation kernels.

Coefficients are always ascending (index i multiplies x**i). The compensated
Horner scheme follows the error-free-transformation construction (TwoSum +
Dekker TwoProd), giving results accurate to ~1 ulp unless the condition
number exceeds 1/eps. `eval_many` trades the guarantee for speed and returns
a rigorous running error bound instead.
"""

from __future__ import annotations

import math

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1
_EPS = np.finfo(float).eps
_U = _EPS / 2.0


def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _two_prod(a, b):
    p = a * b
    c = _SPLITTER * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLITTER * b
    bh = c - (c - b)
    bl = b - bh
    err = al * bl - (((p - ah * bh) - al * bh) - ah * bl)
    return p, err


def comp_horner(coeffs, x):
    """Compensated Horner evaluation of sum coeffs[i] * x**i.

    Accepts scalar or ndarray x; returns the same shape. Overflow produces
    IEEE infinities (the overflow flag of the evaluation contract).
    """
    c = np.asarray(coeffs, dtype=float)
    scalar = np.isscalar(x) or np.ndim(x) == 0
    xv = np.asarray(x, dtype=float)
    if c.size == 0:
        out = np.zeros_like(xv)
        return float(out) if scalar else out
    s = np.full(xv.shape, c[-1], dtype=float)
    e = np.zeros(xv.shape, dtype=float)
    with np.errstate(invalid="ignore", over="ignore", under="ignore"):
        for a in c[-2::-1]:
            p, pe = _two_prod(s, xv)
            s, se = _two_sum(p, a)
            e = e * xv + (pe + se)
        out = s + e
    return float(out) if scalar else out


def horner(coeffs, x):
    """Plain Horner (numpy polyval, ascending coefficients)."""
    return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float),
                                            np.asarray(coeffs, dtype=float))


def power_matrix(points, degree):
    """Matrix pw[i, j] = points[j]**i for i = 0..degree, via cumprod."""
    pts = np.asarray(points, dtype=float)
    pw = np.empty((degree + 1, pts.size), dtype=float)
    pw[0] = 1.0
    if degree > 0:
        pw[1:] = pts[None, :]
        with np.errstate(over="ignore", under="ignore"):
            np.cumprod(pw[1:], axis=0, out=pw[1:])
    return pw


def gamma_bound(n):
    """Safety-inflated rounding coefficient for an n-term evaluation."""
    return 4.0 * (n + 4) * _U


def eval_rows(coeff_rows, pw):
    """Evaluate several coefficient rows against a shared power matrix.

    coeff_rows: (k, degree+1) array. pw: output of power_matrix. Returns a
    (k, m) value array. Rounding in both cumprod and the dot products is
    covered by gamma_bound(degree) times the absolute-value evaluation.
    """
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        return np.asarray(coeff_rows, dtype=float) @ pw


def mp_eval(coeffs, x, prec):
    """Horner in mpmath at `prec` bits; x may be mpf/mpc or float."""
    import mpmath as mp

    with mp.workprec(prec):
        acc = mp.mpf(0)
        for a in reversed(coeffs):
            acc = acc * x + mp.mpf(float(a))
        return acc


def exact_sign(coeffs, x):
    """Exact sign of sum coeffs[i] x**i for float inputs, via rationals.

    Doubles are dyadic rationals, so the sign is decidable. Returns -1, 0, 1.
    """
    from fractions import Fraction

    xf = Fraction(float(x))
    acc = Fraction(0)
    for a in reversed(coeffs):
        acc = acc * xf + Fraction(float(a))
    return (acc > 0) - (acc < 0)


def fsum_terms(terms):
    """Exactly rounded sum of an iterable/array of floats."""
    return math.fsum(np.asarray(terms, dtype=float).tolist())
