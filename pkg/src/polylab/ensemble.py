"""Random polynomial ensembles.

A polynomial realization is sum_i c_i * xi_i * x**i where the c_i are
deterministic coefficients growing like i**rho inside a (tau1, tau2, N0)
envelope and the xi_i are independent unit-variance atoms. Sampling is
counter-based: coefficient i of a given seed is reproducible regardless of
evaluation order or thread count.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from ._numeric import comp_horner
from .exceptions import DegenerateCoefficientError, ValidationError

SCHEME_KINDS = ("kac", "kac_derivative", "hyperbolic", "custom")
ATOM_KINDS = ("gaussian", "rademacher", "uniform_sym", "custom_discrete")

_ENVELOPE_SLACK = 1e-9  # absorbs roundoff when deriving tau1/tau2 by scan


@dataclass(frozen=True)
class CoefficientScheme:
    """Deterministic coefficients c_i with growth metadata (rho, tau1, tau2, N0)."""

    kind: str
    n: int
    rho: float
    tau1: float
    tau2: float
    n0: int
    d: int = 0                       # kac_derivative order
    L: float = 0.0                   # hyperbolic parameter
    table: tuple[float, ...] | None = None

    @property
    def scheme_id(self) -> str:
        if self.kind == "kac":
            return f"kac(n={self.n})"
        if self.kind == "kac_derivative":
            return f"kac_derivative(d={self.d},n={self.n})"
        if self.kind == "hyperbolic":
            return f"hyperbolic(L={self.L:g},n={self.n})"
        return f"custom(n={self.n})"

    def coefficient(self, i: int) -> float:
        if not 0 <= i <= self.n:
            raise IndexError(f"coefficient index {i} outside 0..{self.n}")
        return float(coefficients(self)[i])

    def coefficients(self) -> np.ndarray:
        return coefficients(self)


def _builtin_coefficients(kind: str, n: int, d: int, L: float,
                          table) -> np.ndarray:
    if kind == "kac":
        return np.ones(n + 1)
    if kind == "kac_derivative":
        # c_j = (j+d)!/j! = (j+1)(j+2)...(j+d); exact in floats below 2**53
        j = np.arange(n + 1, dtype=float)
        c = np.ones(n + 1)
        for k in range(1, d + 1):
            c *= j + k
        return c
    if kind == "hyperbolic":
        # c_i = sqrt(L(L+1)...(L+i-1)/i!); stable cumulative-ratio product
        j = np.arange(n, dtype=float)
        ratios = (L + j) / (j + 1.0)
        csq = np.concatenate(([1.0], np.cumprod(ratios)))
        return np.sqrt(csq)
    return np.asarray(table, dtype=float)


@functools.lru_cache(maxsize=64)
def coefficients(scheme: CoefficientScheme) -> np.ndarray:
    out = _builtin_coefficients(scheme.kind, scheme.n, scheme.d, scheme.L,
                                scheme.table)
    out.setflags(write=False)
    return out


def _derive_envelope(kind, n, d, L, c):
    """(rho, tau1, tau2, n0) for a built-in scheme, by scan at its known rho."""
    if kind == "kac":
        rho = 0.0
    elif kind == "kac_derivative":
        rho = float(d)
    else:
        rho = (L - 1.0) / 2.0
    n0 = 1
    i = np.arange(1, n + 1, dtype=float)
    with np.errstate(over="ignore"):
        ratio = np.abs(c[1:]) / i ** rho
    if not np.all(np.isfinite(ratio)):
        raise ValidationError("coefficient envelope overflows float range")
    tau1 = float(ratio.min()) * (1.0 - _ENVELOPE_SLACK)
    tau2 = float(max(ratio.max(), np.abs(c[:n0]).max())) * (1.0 + _ENVELOPE_SLACK)
    return rho, tau1, tau2, n0


def _validate_envelope(c, rho, tau1, tau2, n0, n):
    for i in range(n0):
        if abs(c[i]) > tau2:
            raise ValidationError(
                f"coefficient {i}: |c_i|={abs(c[i])!r} exceeds tau2={tau2!r}")
    for i in range(max(n0, 1), n + 1):
        lo, hi = tau1 * i ** rho, tau2 * i ** rho
        if not lo <= abs(c[i]) <= hi:
            raise ValidationError(
                f"coefficient {i}: |c_i|={abs(c[i])!r} outside "
                f"[{lo!r}, {hi!r}] (tau1, tau2)=({tau1!r}, {tau2!r})")


def make_scheme(kind: str, n: int, *, d: int = 1, L: float = 1.0,
                table=None, rho=None, tau1=None, tau2=None,
                n0=None) -> CoefficientScheme:
    """Build a coefficient scheme; built-ins derive their envelope automatically.

    Custom tables must declare (rho, tau1, tau2, n0) and are validated
    coefficient by coefficient; the first offending index is reported.
    """
    if kind not in SCHEME_KINDS:
        raise ValidationError(f"unknown scheme kind {kind!r}")
    if n < 1:
        raise ValidationError("degree n must be >= 1")
    if kind == "hyperbolic" and not L > 0:
        raise ValidationError("hyperbolic L must be > 0")
    if kind == "kac_derivative" and d < 0:
        raise ValidationError("derivative order d must be >= 0")
    if kind == "custom":
        if table is None:
            raise ValidationError("custom scheme requires a coefficient table")
        table = tuple(float(v) for v in table)
        if len(table) != n + 1:
            raise ValidationError(
                f"custom table has {len(table)} entries, expected n+1={n + 1}")
        if None in (rho, tau1, tau2, n0):
            raise ValidationError(
                "custom scheme requires declared (rho, tau1, tau2, n0)")
        if rho <= -0.5 or tau1 <= 0 or tau2 <= 0 or n0 < 0:
            raise ValidationError("envelope constants out of range")
        _validate_envelope(np.asarray(table), rho, tau1, tau2, int(n0), n)
        return CoefficientScheme("custom", n, float(rho), float(tau1),
                                 float(tau2), int(n0), table=table)
    c = _builtin_coefficients(kind, n, d, L, None)
    erho, etau1, etau2, en0 = _derive_envelope(kind, n, d, L, c)
    return CoefficientScheme(kind, n, erho, etau1, etau2, en0,
                             d=d if kind == "kac_derivative" else 0,
                             L=L if kind == "hyperbolic" else 0.0)


@dataclass(frozen=True)
class AtomSpec:
    """Distribution of the random multipliers: mean 0, variance 1, 2+eps moment."""

    kind: str
    epsilon_moment: float = 1.0
    support: tuple[float, ...] | None = None
    probabilities: tuple[float, ...] | None = None
    mean_exceptions: tuple[tuple[int, float], ...] = ()

    @property
    def atom_id(self) -> str:
        return self.kind


def make_atom(kind: str, *, epsilon_moment: float = 1.0, support=None,
              probabilities=None, mean_exceptions=()) -> AtomSpec:
    if kind not in ATOM_KINDS:
        raise ValidationError(f"unknown atom kind {kind!r}")
    if epsilon_moment <= 0:
        raise ValidationError("epsilon_moment must be positive")
    if kind == "custom_discrete":
        if support is None or probabilities is None:
            raise ValidationError("custom_discrete needs support and probabilities")
        s = np.asarray(support, dtype=float)
        p = np.asarray(probabilities, dtype=float)
        if s.size != p.size or s.size == 0:
            raise ValidationError("support and probabilities sizes differ")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError("probabilities must be nonnegative, sum 1")
        if abs(float(p @ s)) > 1e-12:
            raise ValidationError("custom atom mean must be 0")
        if abs(float(p @ s ** 2) - 1.0) > 1e-12:
            raise ValidationError("custom atom variance must be 1")
        support = tuple(float(v) for v in s)
        probabilities = tuple(float(v) for v in p)
    return AtomSpec(kind, float(epsilon_moment), support, probabilities,
                    tuple((int(i), float(m)) for i, m in mean_exceptions))


@dataclass(frozen=True, eq=False)
class SampledPolynomial:
    """One realization a_i = c_i * xi_i, with enough provenance to resample."""

    coeffs: np.ndarray
    n: int
    scheme: CoefficientScheme
    atom: AtomSpec
    seed: int
    transform: str = ""    # "", or a chain like "reverse", "negate.reverse"

    @property
    def scheme_id(self) -> str:
        base = self.scheme.scheme_id
        return f"{self.transform}({base})" if self.transform else base

    @property
    def atom_id(self) -> str:
        return self.atom.atom_id


def _counter_uniforms(seed: int, count: int) -> np.ndarray:
    """Open-interval (0,1) uniforms; value i is a function of (seed, i) only."""
    bg = np.random.Philox(key=np.uint64(seed & (2 ** 64 - 1)))
    u = np.random.Generator(bg).random(count)
    return u + 2.0 ** -54


def draw_atoms(atom: AtomSpec, seed: int, count: int) -> np.ndarray:
    """Vector (xi_0 .. xi_{count-1}) drawn per the atom, keyed by (seed, index)."""
    u = _counter_uniforms(seed, count)
    if atom.kind == "gaussian":
        xi = ndtri(u)
    elif atom.kind == "rademacher":
        xi = np.where(u < 0.5, -1.0, 1.0)
    elif atom.kind == "uniform_sym":
        xi = (2.0 * u - 1.0) * math.sqrt(3.0)
    else:
        s = np.asarray(atom.support)
        cdf = np.cumsum(np.asarray(atom.probabilities))
        cdf[-1] = 1.0 + 2.0 ** -50
        xi = s[np.searchsorted(cdf, u, side="left")]
    return xi


def sample_polynomial(scheme: CoefficientScheme, atom: AtomSpec,
                      seed: int) -> SampledPolynomial:
    """Draw one realization; pure in (scheme, atom, seed)."""
    xi = draw_atoms(atom, seed, scheme.n + 1)
    for idx, mu in atom.mean_exceptions:
        if idx >= scheme.n0:
            raise ValidationError(
                f"mean exception at index {idx} >= N0={scheme.n0}: atoms "
                f"beyond N0 must be centered")
        if idx <= scheme.n:
            xi[idx] = xi[idx] + mu
    coeffs = coefficients(scheme) * xi
    coeffs.setflags(write=False)
    return SampledPolynomial(coeffs, scheme.n, scheme, atom, int(seed))


def _coeffs_of(p) -> np.ndarray:
    if isinstance(p, SampledPolynomial):
        return p.coeffs
    return np.asarray(p, dtype=float)


def evaluate(p, x):
    """Compensated-Horner value of the polynomial at x (scalar or array).

    Overflow is reported as a signed infinity in the result.
    """
    return comp_horner(_coeffs_of(p), x)


def derivative_coefficients(p, k: int) -> np.ndarray:
    c = _coeffs_of(p)
    n = c.size - 1
    if not 0 <= k <= n:
        raise IndexError(f"derivative order {k} outside 0..{n}")
    for _ in range(k):
        c = c[1:] * np.arange(1, c.size)
    return c


def derivative_eval(p, x, k: int = 1):
    """Value of the k-th derivative at x (Horner on differentiated coefficients)."""
    return comp_horner(derivative_coefficients(p, k), x)


def reverse_polynomial(p: SampledPolynomial) -> SampledPolynomial:
    """x**n P(1/x) / c_n: coefficient i becomes a_{n-i}/c_n.

    Nonzero roots map to their reciprocals. Degenerate a_n = 0 is surfaced,
    never patched; the caller decides whether to resample or skip.
    """
    if p.coeffs[-1] == 0.0:
        raise DegenerateCoefficientError(
            "leading coefficient is zero; reversal undefined")
    c_n = p.scheme.coefficient(p.n)
    coeffs = p.coeffs[::-1] / c_n
    coeffs.setflags(write=False)
    transform = f"reverse.{p.transform}" if p.transform else "reverse"
    return SampledPolynomial(coeffs, p.n, p.scheme, p.atom, p.seed, transform)


def negate_argument(p: SampledPolynomial) -> SampledPolynomial:
    """P(-x): coefficient i picks up (-1)**i; roots are negated."""
    signs = np.where(np.arange(p.n + 1) % 2 == 0, 1.0, -1.0)
    coeffs = p.coeffs * signs
    coeffs.setflags(write=False)
    transform = f"negate.{p.transform}" if p.transform else "negate"
    return SampledPolynomial(coeffs, p.n, p.scheme, p.atom, p.seed, transform)


@functools.lru_cache(maxsize=32)
def reversed_scheme(scheme: CoefficientScheme) -> CoefficientScheme:
    """Scheme with coefficients c_{n-i}/c_n (growth exponent 0).

    This is the deterministic-coefficient counterpart of reverse_polynomial,
    used to integrate expected counts over |t| > 1.
    """
    c = coefficients(scheme)
    table = tuple((c[::-1] / c[-1]).tolist())
    a = np.abs(np.asarray(table))
    tau1 = float(a[1:].min()) * (1.0 - _ENVELOPE_SLACK)
    tau2 = float(a.max()) * (1.0 + _ENVELOPE_SLACK)
    return make_scheme("custom", scheme.n, table=table, rho=0.0,
                       tau1=tau1, tau2=tau2, n0=1)


# JSON round trip for scheme/atom specifications (see docs/formats.md).

def scheme_to_json(scheme: CoefficientScheme) -> str:
    doc = {"kind": scheme.kind, "n": scheme.n, "rho": scheme.rho,
           "tau1": scheme.tau1, "tau2": scheme.tau2, "n0": scheme.n0}
    if scheme.kind == "kac_derivative":
        doc["d"] = scheme.d
    if scheme.kind == "hyperbolic":
        doc["L"] = scheme.L
    if scheme.kind == "custom":
        doc["table"] = list(scheme.table)
    return json.dumps(doc, sort_keys=True)


def scheme_from_json(text: str) -> CoefficientScheme:
    doc = json.loads(text)
    kind, n = doc["kind"], int(doc["n"])
    if kind == "custom":
        return make_scheme(kind, n, table=doc["table"], rho=doc["rho"],
                           tau1=doc["tau1"], tau2=doc["tau2"], n0=doc["n0"])
    return make_scheme(kind, n, d=int(doc.get("d", 1)),
                       L=float(doc.get("L", 1.0)))


def atom_to_json(atom: AtomSpec) -> str:
    doc = {"kind": atom.kind, "epsilon_moment": atom.epsilon_moment,
           "mean_exceptions": [list(t) for t in atom.mean_exceptions]}
    if atom.kind == "custom_discrete":
        doc["support"] = list(atom.support)
        doc["probabilities"] = list(atom.probabilities)
    return json.dumps(doc, sort_keys=True)


def atom_from_json(text: str) -> AtomSpec:
    doc = json.loads(text)
    return make_atom(doc["kind"],
                     epsilon_moment=float(doc.get("epsilon_moment", 1.0)),
                     support=doc.get("support"),
                     probabilities=doc.get("probabilities"),
                     mean_exceptions=[tuple(t) for t in
                                      doc.get("mean_exceptions", [])])
