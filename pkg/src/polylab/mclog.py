"""Smoothed zero counting: bumps, Green's identity, and its Monte Carlo form.

A C^3 bump supported on a thin complex rectangle turns the root count near
the real axis into the log-potential integral (1/2pi) int log|P| lap(phi);
sampling the integrand uniformly over the covering ball gives the randomized
estimator (2 delta^2 / 9m) sum log|P(w_k)| lap(phi)(w_k), whose prefactor is
exactly area(ball)/(2pi) divided by m.

The profile is the degree-7 smoothstep 35t^4 - 84t^5 + 70t^6 - 20t^7: its
first three derivatives vanish at both seams, so the piecewise-defined bump
is C^3 and the Laplacian is available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .roots_exact import complex_roots

_UNDERFLOW = 1e-300
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)       # map to [0, 1]
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS

# extrema of the profile derivatives on [0, 1], fixed by the chosen profile
PROFILE_D1_SUP = 140.0 / 64.0             # max 140 t^3 (1-t)^3
PROFILE_D2_SUP = 6.7420                   # max |420 t^2 (1-t)^2 (1-2t)|, rounded up
PROFILE_D3_SUP = 35.0                     # max |840 t (1-t) (1 - 5t + 5t^2)|


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return (((-20.0 * t + 70.0) * t - 84.0) * t + 35.0) * t ** 4


def _smoothstep_d2(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 420.0 * t * t * (1.0 - t) ** 2 * (1.0 - 2.0 * t),
                    0.0)


@dataclass(frozen=True)
class BumpSpec:
    """Bump equal to 1 on [1 - delta_prev, 1 - delta], supported on the
    margin-inflated rectangle; margin = delta^{1 + alpha}."""

    delta: float
    alpha: float
    delta_prev: float = 0.0   # defaults to 2 * delta

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValidationError("delta must lie in (0, 1)")
        if self.alpha <= 0.0:
            raise ValidationError("alpha must be positive")
        if self.delta_prev == 0.0:
            object.__setattr__(self, "delta_prev", 2.0 * self.delta)
        if self.delta_prev <= self.delta:
            raise ValidationError("delta_prev must exceed delta")

    @property
    def margin(self) -> float:
        return self.delta ** (1.0 + self.alpha)

    @property
    def plateau(self) -> tuple[float, float]:
        return (1.0 - self.delta_prev, 1.0 - self.delta)

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.plateau
        return (lo - self.margin, hi + self.margin)

    @property
    def ball(self) -> tuple[float, float]:
        """Center and radius of the sampling ball B(1 - 3 delta/2, 2 delta/3)."""
        return (1.0 - 1.5 * self.delta, 2.0 * self.delta / 3.0)

    def support_in_ball(self) -> bool:
        cx, r = self.ball
        lo, hi = self.support
        m = self.margin
        return max(math.hypot(lo - cx, m), math.hypot(hi - cx, m)) <= r


def _re_profile(spec: BumpSpec, x):
    lo, hi = spec.plateau
    m = spec.margin
    rise = _smoothstep((x - (lo - m)) / m)
    fall = _smoothstep((hi + m - x) / m)
    return np.minimum(rise, fall)


def _re_profile_d2(spec: BumpSpec, x):
    lo, hi = spec.plateau
    m = spec.margin
    out = np.zeros_like(np.asarray(x, dtype=float))
    u = (np.asarray(x) - (lo - m)) / m
    v = (hi + m - np.asarray(x)) / m
    out += _smoothstep_d2(u) / m ** 2
    out += _smoothstep_d2(v) / m ** 2
    return out


def _im_profile(spec: BumpSpec, y):
    t = np.abs(np.asarray(y)) / spec.margin
    return _smoothstep(2.0 * (1.0 - t))


def _im_profile_d2(spec: BumpSpec, y):
    t = np.abs(np.asarray(y)) / spec.margin
    return 4.0 * _smoothstep_d2(2.0 * (1.0 - t)) / spec.margin ** 2


def bump_value(spec: BumpSpec, z):
    """phi(z) = phi_re(Re z) * phi_im(Im z); in [0, 1], C^3, plateau value 1."""
    z = np.asarray(z, dtype=complex)
    out = _re_profile(spec, z.real) * _im_profile(spec, z.imag)
    return float(out) if out.ndim == 0 else out


def bump_laplacian(spec: BumpSpec, z):
    """Closed-form Laplacian of the bump (zero on plateau and off support)."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    out = (_re_profile_d2(spec, x) * _im_profile(spec, y)
           + _re_profile(spec, x) * _im_profile_d2(spec, y))
    return float(out) if out.ndim == 0 else out


def smoothed_count(p, spec: BumpSpec) -> float:
    """sum_j phi(zeta_j) over all complex roots of p."""
    roots = complex_roots(p)
    if roots.size == 0:
        return 0.0
    return float(np.sum(bump_value(spec, roots)))


def _log_abs_p(coeffs: np.ndarray, z: np.ndarray, jitter: float) -> np.ndarray:
    vals = np.abs(np.polynomial.polynomial.polyval(z, coeffs))
    tiny = vals < _UNDERFLOW
    if np.any(tiny):
        moved = np.polynomial.polynomial.polyval(z[tiny] + jitter, coeffs)
        vals = vals.copy()
        vals[tiny] = np.maximum(np.abs(moved), _UNDERFLOW)
    return np.log(vals)


@dataclass(frozen=True)
class GreenResult:
    value: float
    converged: bool
    evaluations: int


def green_integral(p, spec: BumpSpec, tol: float = 1e-3,
                   max_evals: int = 4_000_000) -> GreenResult:
    """(1/2pi) integral of log|P(z)| lap(phi)(z) over the bump support.

    Composite 4x4 Gauss-Legendre panels over the bands where the Laplacian
    is nonzero; panel resolution doubles until successive values differ by
    less than tol. Nodes that underflow |P| are jittered by 1e-12 * delta.
    """
    from .ensemble import SampledPolynomial

    coeffs = p.coeffs if isinstance(p, SampledPolynomial) else \
        np.asarray(p, dtype=float)
    lo, hi = spec.plateau
    m = spec.margin
    bands = (
        (lo - m, lo, -m, m),          # rising Re transition, full height
        (hi, hi + m, -m, m),          # falling Re transition, full height
        (lo, hi, 0.5 * m, m),         # Re plateau, upper Im transition
        (lo, hi, -m, -0.5 * m),       # Re plateau, lower Im transition
    )
    jitter = 1e-12 * spec.delta

    def value_at(cells_x: int, cells_y_trans: int) -> tuple[float, int]:
        total = 0.0
        evals = 0
        for (x0, x1, y0, y1) in bands:
            wide = (x1 - x0) > 2.0 * m  # plateau band: long and thin
            nx = cells_x * (8 if wide else 1)
            ny = cells_y_trans * (1 if wide else 2)
            ex = x0 + (x1 - x0) * (np.arange(nx + 1) / nx)
            ey = y0 + (y1 - y0) * (np.arange(ny + 1) / ny)
            gx = (ex[:-1, None] + (ex[1:] - ex[:-1])[:, None]
                  * _GL_NODES[None, :]).ravel()
            gy = (ey[:-1, None] + (ey[1:] - ey[:-1])[:, None]
                  * _GL_NODES[None, :]).ravel()
            wx = (np.tile(_GL_WEIGHTS, nx) * np.repeat(ex[1:] - ex[:-1],
                                                       _GL_NODES.size))
            wy = (np.tile(_GL_WEIGHTS, ny) * np.repeat(ey[1:] - ey[:-1],
                                                       _GL_NODES.size))
            zz = gx[:, None] + 1j * gy[None, :]
            f = _log_abs_p(coeffs, zz.ravel(), jitter).reshape(zz.shape)
            f *= bump_laplacian(spec, zz)
            total += float(wx @ f @ wy)
            evals += f.size
        return total / (2.0 * math.pi), evals

    prev = None
    cells = 4
    evals_total = 0
    while True:
        cur, used = value_at(cells, cells)
        evals_total += used
        if prev is not None and abs(cur - prev) < tol:
            return GreenResult(cur, True, evals_total)
        if evals_total > max_evals:
            return GreenResult(cur, False, evals_total)
        prev = cur
        cells *= 2


@dataclass(frozen=True)
class MCConfig:
    """Sampling plan of the randomized estimator; ball is fixed by delta."""

    m: int
    center: float
    radius: float
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("need at least one sample")


def make_mc_config(spec: BumpSpec, m: int | None = None,
                   seed: int = 0) -> MCConfig:
    if m is None:
        m = min(int(spec.delta ** (-11.0 * spec.alpha)), 1_000_000)
        m = max(m, 1)
    cx, r = spec.ball
    return MCConfig(int(m), cx, r, int(seed))


@dataclass(frozen=True)
class MCResult:
    value: float
    resamples: int
    support_contained: bool


def mc_zero_estimate(p, spec: BumpSpec, mc: MCConfig) -> MCResult:
    """(2 delta^2 / 9m) sum_k log|P(w_k)| lap(phi)(w_k), w_k uniform in the ball.

    2 delta^2 / 9 is area(ball) / 2pi, so the estimator is the Monte Carlo
    average of the Green integrand over the ball. Points where |P|
    underflows are redrawn (and counted); support sticking out of the ball
    is reported via support_contained, since the estimator then misses that
    mass relative to green_integral.
    """
    from .ensemble import SampledPolynomial

    coeffs = p.coeffs if isinstance(p, SampledPolynomial) else \
        np.asarray(p, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(mc.seed)))
    total = np.zeros(0)
    resamples = 0
    needed = mc.m
    for _ in range(16):
        u = rng.random((needed, 2))
        w = (mc.center
             + mc.radius * np.sqrt(u[:, 0]) * np.exp(2j * math.pi * u[:, 1]))
        vals = np.abs(np.polynomial.polynomial.polyval(w, coeffs))
        good = vals >= _UNDERFLOW
        resamples += int(needed - good.sum())
        contrib = np.log(vals[good]) * bump_laplacian(spec, w[good])
        total = np.concatenate((total, contrib))
        needed = mc.m - total.size
        if needed == 0:
            break
    value = (2.0 * spec.delta ** 2 / (9.0 * mc.m)) * float(total.sum())
    return MCResult(value, resamples, spec.support_in_ball())
