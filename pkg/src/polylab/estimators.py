"""The sign-change / truncation / block approximation chain.

Root counts on the core window are approximated in three stages: sign
changes of P over a dyadic grid x_j = 1 - exp(-j delta); sign changes of the
value-dependent truncation Q (window [m_x, M_x] chosen per node so distant
nodes become independent); and a partition of grid indices into length-p
blocks separated by length-q gaps, making block sums independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._numeric import comp_horner
from .ensemble import CoefficientScheme, SampledPolynomial
from .exceptions import (DegeneratePlanError, ValidationError,
                         WindowUndefinedError)

_INDEX_TOL = 1e-9   # absorbs float noise when log-ratios are exact integers


@dataclass(frozen=True)
class DyadicGrid:
    """Nodes x_j = 1 - exp(-j delta) for j0 <= j <= j1."""

    delta: float
    j0: int
    j1: int
    nodes: np.ndarray

    def __len__(self):
        return int(self.nodes.size)

    @property
    def span(self) -> float:
        """T = (j1 - j0) delta = log((1 - x_{j0}) / (1 - x_{j1}))."""
        return (self.j1 - self.j0) * self.delta


class TruncationWindow(NamedTuple):
    A: float   # log 1/(1-x)
    m: int     # inner cutoff (indices below are dropped)
    M: int     # outer cutoff (indices above are dropped), clamped to n


@dataclass(frozen=True)
class TruncationParams:
    alpha: float
    rho_prime: float

    def __post_init__(self):
        if self.alpha < 1.0:
            raise ValidationError("alpha must be >= 1")
        if not 0.0 < self.rho_prime <= 1.0:
            raise ValidationError("rho' must lie in (0, 1]")


def make_truncation_params(scheme: CoefficientScheme,
                           alpha: float) -> TruncationParams:
    return TruncationParams(float(alpha), min(1.0, 1.0 + 2.0 * scheme.rho))


@dataclass(frozen=True)
class SignChainResult:
    """Sum of sign-change indicators; exact-zero evaluations are flagged.

    A zero evaluation contributes 1/2 per the sign(0) = 0 convention, which
    is why `count` is a float; it is integral whenever zero_evals == 0.
    """

    count: float
    zero_evals: int


@dataclass(frozen=True)
class BlockPlan:
    """Length-p runs (Z/W blocks) separated by length-q gaps (X/Y sums)."""

    p: int
    q: int
    l: int
    z_ranges: tuple[tuple[int, int], ...]
    x_ranges: tuple[tuple[int, int], ...]
    tail: tuple[int, int]


def dyadic_grid(a_n: float, b_n: float, delta: float) -> DyadicGrid:
    """Grid with j0 = ceil(log(1/a_n)/delta), j1 = floor(log(1/b_n)/delta).

    Degenerate (j1 <= j0) inputs produce an empty grid. Integer-valued
    log-ratios are snapped within 1e-9 before rounding.
    """
    if not (0.0 < b_n < a_n < 1.0):
        raise ValidationError(
            f"need 0 < b_n < a_n < 1, got a_n={a_n!r}, b_n={b_n!r}")
    if delta <= 0.0:
        raise ValidationError("delta must be positive")
    j0 = math.ceil(math.log(1.0 / a_n) / delta - _INDEX_TOL)
    j1 = math.floor(math.log(1.0 / b_n) / delta + _INDEX_TOL)
    if j1 <= j0:
        return DyadicGrid(delta, j0, j1, np.zeros(0))
    j = np.arange(j0, j1 + 1, dtype=float)
    nodes = 1.0 - np.exp(-j * delta)
    nodes.setflags(write=False)
    return DyadicGrid(delta, j0, j1, nodes)


def _sign_chain(values: np.ndarray) -> SignChainResult:
    s = np.sign(values)
    terms = 0.5 * (1.0 - s[:-1] * s[1:])
    return SignChainResult(float(terms.sum()), int(np.count_nonzero(s == 0)))


def sign_change_count(p, grid: DyadicGrid) -> SignChainResult:
    """sum_j [1/2 - (1/2) sign(P(x_j) P(x_{j+1}))] over adjacent grid nodes."""
    if len(grid) < 2:
        raise ValidationError("grid has no intervals")
    return _sign_chain(comp_horner(_coeffs(p), grid.nodes))


def _coeffs(p) -> np.ndarray:
    if isinstance(p, SampledPolynomial):
        return p.coeffs
    return np.asarray(p, dtype=float)


def truncation_window(x: float, alpha: float, n: int) -> TruncationWindow:
    """A_x = log 1/(1-x); m = ceil((1-x)^{-1} A^{-alpha}); M = alpha (1-x)^{-1} log A.

    M is clamped to n. Raw inner cutoffs below 1 truncate nothing (m = 0):
    there is no index below 1 to drop, and this keeps the full window
    reachable in the alpha -> infinity limit.
    """
    if not 0.0 < x < 1.0:
        raise ValidationError("need 0 < x < 1")
    A = -math.log1p(-x)
    if A <= 1.0:
        raise WindowUndefinedError(
            f"window undefined at x={x!r}: A_x = {A!r} <= 1")
    inv = 1.0 / (1.0 - x)
    m_raw = inv * A ** -alpha
    m = math.ceil(m_raw) if m_raw > 1.0 else 0
    M = min(int(n), math.floor(alpha * inv * math.log(A)))
    return TruncationWindow(A, m, M)


@dataclass(frozen=True)
class TruncatedEval:
    value: float
    window: TruncationWindow
    empty: bool


def truncated_eval(p, x: float, alpha: float) -> TruncatedEval:
    """Q(x) = sum_{j=m_x}^{M_x} a_j x^j, the per-point truncated evaluation."""
    c = _coeffs(p)
    w = truncation_window(x, alpha, c.size - 1)
    if w.m > w.M:
        return TruncatedEval(0.0, w, True)
    val = comp_horner(c[w.m: w.M + 1], x) * x ** w.m
    return TruncatedEval(float(val), w, False)


def truncated_sign_chain(p, grid: DyadicGrid, alpha: float) -> SignChainResult:
    """Sign-change chain of Q; the window is recomputed at every node."""
    if len(grid) < 2:
        raise ValidationError("grid has no intervals")
    c = _coeffs(p)
    values = np.array([truncated_eval(c, float(x), alpha).value
                       for x in grid.nodes])
    return _sign_chain(values)


def block_plan(grid: DyadicGrid) -> BlockPlan:
    """p = floor(delta^{-1} T^{1/2}), q = floor(delta^{-1} T^{1/8}), l blocks.

    Z-ranges are the length-p index runs, X-ranges the length-q gaps;
    leftover indices beyond l(p+q) are reported as the tail.
    """
    if len(grid) < 2:
        raise ValidationError("grid has no intervals")
    T = grid.span
    if T <= 1.0:
        raise DegeneratePlanError(f"block plan needs T > 1, got T={T!r}")
    inv_delta = 1.0 / grid.delta
    p = math.floor(inv_delta * T ** 0.5 + _INDEX_TOL)
    q = math.floor(inv_delta * T ** 0.125 + _INDEX_TOL)
    l = math.floor((grid.j1 - grid.j0) / (p + q) + _INDEX_TOL)
    z_ranges = []
    x_ranges = []
    for k in range(l):
        start = grid.j0 + k * (p + q)
        z_ranges.append((start, start + p))
        x_ranges.append((start + p, start + p + q))
    tail = (grid.j0 + l * (p + q), grid.j1)
    return BlockPlan(p, q, l, tuple(z_ranges), tuple(x_ranges), tail)


def chain_sums_over_ranges(p, grid: DyadicGrid, alpha: float,
                           ranges) -> list[float]:
    """Truncated-chain partial sums over index ranges of the grid.

    Range (j_lo, j_hi) sums the indicators of cells [x_j, x_{j+1}] for
    j_lo <= j < j_hi, matching the block decomposition's Z_k/X_k sums.
    """
    c = _coeffs(p)
    values = np.array([truncated_eval(c, float(x), alpha).value
                       for x in grid.nodes])
    s = np.sign(values)
    terms = 0.5 * (1.0 - s[:-1] * s[1:])
    out = []
    for j_lo, j_hi in ranges:
        i_lo, i_hi = j_lo - grid.j0, j_hi - grid.j0
        out.append(float(terms[i_lo:i_hi].sum()))
    return out


def independence_check(x: float, y: float, alpha: float, n: int) -> bool:
    """True when the truncation windows at x < y are disjoint (M_x < m_y)."""
    if x == y:
        return False
    if not x < y:
        raise ValidationError("need x < y")
    wx = truncation_window(x, alpha, n)
    wy = truncation_window(y, alpha, n)
    return wx.M < wy.m
