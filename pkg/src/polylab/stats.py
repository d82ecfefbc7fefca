"""Monte Carlo experiment harness: CLT runs, variance-slope regression,
universality comparisons, tail moments, and the estimator-chain sweep.

Every run is deterministic in (config, seed): per-sample seeds are derived
by keyed hashing, aggregation is ordered, and thread count never changes
results.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.stats

from .ensemble import (AtomSpec, CoefficientScheme, atom_from_json,
                       atom_to_json, make_atom, make_scheme,
                       sample_polynomial)
from .estimators import (dyadic_grid, sign_change_count, truncated_sign_chain)
from .exceptions import ValidationError
from .kacrice import QuadConfig, expected_roots
from .ensemble import reversed_scheme
from .roots_exact import (CoreRegion, IntervalCounter, count_all_real_roots,
                          count_core_region, count_real_roots)


def maslova_constant() -> float:
    """K = (4/pi)(1 - 2/pi), the Kac variance-growth slope."""
    return (4.0 / math.pi) * (1.0 - 2.0 / math.pi)


def derive_seed(master: int, *tags) -> int:
    """Stable 64-bit sub-seed from (master seed, component tags)."""
    h = hashlib.blake2b(repr(tags).encode(),
                        key=int(master).to_bytes(8, "little", signed=False),
                        digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class SchemeFamily:
    """A coefficient scheme minus its degree (instantiated per experiment n)."""

    kind: str = "kac"
    d: int = 1
    L: float = 1.0

    def instantiate(self, n: int) -> CoefficientScheme:
        return make_scheme(self.kind, n, d=self.d, L=self.L)


@dataclass(frozen=True)
class RegionSpec:
    """Counting region: whole line, core region, or a fixed interval [a, b)."""

    kind: str = "real_line"
    a: float = math.nan
    b: float = math.nan
    a_n: float = math.nan     # explicit core gaps; nan = default rule
    b_n: float = math.nan

    def __post_init__(self):
        if self.kind not in ("real_line", "core", "interval"):
            raise ValidationError(f"unknown region kind {self.kind!r}")
        if self.kind == "interval" and not (math.isfinite(self.a)
                                            and math.isfinite(self.b)
                                            and self.a < self.b):
            raise ValidationError("interval region needs finite a < b")

    def core_for(self, n: int) -> CoreRegion:
        if math.isfinite(self.a_n):
            return CoreRegion(self.a_n, self.b_n if math.isfinite(self.b_n)
                              else 0.0)
        return CoreRegion.default_for_degree(n)


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str = "exact"        # exact | sign_chain | truncated_chain
    delta: float = 0.05
    alpha: float = 2.0

    def __post_init__(self):
        if self.kind not in ("exact", "sign_chain", "truncated_chain"):
            raise ValidationError(f"unknown estimator {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: SchemeFamily = SchemeFamily()
    atom: AtomSpec = field(default_factory=lambda: make_atom("gaussian"))
    n_list: tuple[int, ...] = (256,)
    samples: int = 200
    region: RegionSpec = RegionSpec()
    seed: int = 0
    estimator: EstimatorSpec = EstimatorSpec()

    def __post_init__(self):
        if self.samples < 2:
            raise ValidationError("need at least two samples")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ValidationError("degrees must all be >= 1")


@dataclass(frozen=True)
class DegreeReport:
    n: int
    samples: int
    mean: float
    variance: float
    m4: float
    se_mean: float
    se_variance: float
    ks_D: float
    ks_p: float
    ks_skipped: bool
    kacrice_mean: float          # nan when not applicable
    kacrice_agrees: bool | None
    standardized: np.ndarray | None
    counts: np.ndarray | None
    uncertified: int = 0


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    degrees: tuple[DegreeReport, ...]


def _count_sample(scheme: CoefficientScheme, atom: AtomSpec, seed: int,
                  region: RegionSpec, estimator: EstimatorSpec) -> tuple:
    sample = sample_polynomial(scheme, atom, seed)
    if estimator.kind == "exact":
        if region.kind == "real_line":
            cc = count_all_real_roots(sample.coeffs)
        elif region.kind == "interval":
            cc = count_real_roots(sample.coeffs, region.a, region.b)
        else:
            cc = count_core_region(sample.coeffs, region.core_for(scheme.n))
        return float(cc.count), not cc.certified
    if region.kind != "core":
        raise ValidationError("chain estimators are defined on the core region")
    core = region.core_for(scheme.n)
    grid = dyadic_grid(core.a_n, core.b_n, estimator.delta)
    parity = np.where(np.arange(scheme.n + 1) % 2 == 0, 1.0, -1.0)
    branches = (sample.coeffs, sample.coeffs * parity,
                sample.coeffs[::-1], sample.coeffs[::-1] * parity)
    total = 0.0
    for coeffs in branches:
        if estimator.kind == "sign_chain":
            total += sign_change_count(coeffs, grid).count
        else:
            total += truncated_sign_chain(coeffs, grid,
                                          estimator.alpha).count
    return total, False


def _count_block(args) -> list:
    scheme, atom, seeds, region, estimator = args
    return [_count_sample(scheme, atom, s, region, estimator) for s in seeds]


def resolve_threads(threads: int | None) -> int:
    if threads is not None and threads >= 1:
        return int(threads)
    env = os.environ.get("POLYLAB_THREADS", "")
    if env.isdigit() and int(env) >= 1:
        return int(env)
    return os.cpu_count() or 1


def _collect_counts(cfg: ExperimentConfig, scheme: CoefficientScheme,
                    threads: int) -> tuple[np.ndarray, int]:
    seeds = [derive_seed(cfg.seed, "sample", scheme.n, i)
             for i in range(cfg.samples)]
    if threads <= 1:
        rows = [_count_sample(scheme, cfg.atom, s, cfg.region, cfg.estimator)
                for s in seeds]
    else:
        blocks = [(scheme, cfg.atom, seeds[i::threads], cfg.region,
                   cfg.estimator) for i in range(threads)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(_count_block, blocks))
        rows = [None] * len(seeds)
        for off, block in enumerate(outs):
            rows[off::threads] = block
    counts = np.array([r[0] for r in rows])
    uncertified = sum(1 for r in rows if r[1])
    return counts, uncertified


def ks_statistic(samples) -> tuple[float, float]:
    """One-sample KS statistic against the standard normal, asymptotic p."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValidationError("empty sample")
    if arr.size < 50:
        warnings.warn("KS asymptotic p-value is unreliable below 50 samples",
                      RuntimeWarning, stacklevel=2)
    out = scipy.stats.kstest(arr, "norm", mode="asymp")
    return float(out.statistic), float(out.pvalue)


def _kacrice_region_mean(scheme: CoefficientScheme, region: RegionSpec,
                         n: int) -> float:
    quad = QuadConfig(rel_tol=1e-8, abs_tol=1e-9, max_subdivisions=200)
    rev = reversed_scheme(scheme)
    if region.kind == "real_line":
        return (expected_roots(scheme, -1.0, 1.0, quad).value
                + expected_roots(rev, -1.0, 1.0, quad).value)
    if region.kind == "interval":
        return expected_roots(scheme, region.a, region.b, quad).value
    core = region.core_for(n)
    u, v = 1.0 - core.a_n, 1.0 - core.b_n
    total = 0.0
    for s in (scheme, rev):
        total += expected_roots(s, u, v, quad).value
        total += expected_roots(s, -v, -u, quad).value
    return total


def _degree_report(cfg: ExperimentConfig, n: int, counts: np.ndarray,
                   uncertified: int) -> DegreeReport:
    mean = float(counts.mean())
    variance = float(counts.var(ddof=1))
    centered = counts - mean
    m4 = float((centered ** 4).mean())
    s = counts.size
    se_mean = math.sqrt(variance / s) if variance > 0 else 0.0
    m2 = float((centered ** 2).mean())
    se_variance = math.sqrt(max(m4 - m2 * m2, 0.0) / s)
    if variance > 0:
        sd = math.sqrt(variance)
        standardized = centered / sd
        ks_d, ks_p = ks_statistic(standardized)
        skipped = False
    else:
        standardized = None
        ks_d, ks_p, skipped = math.nan, math.nan, True
    kr = math.nan
    agrees = None
    if cfg.atom.kind == "gaussian" and cfg.estimator.kind == "exact":
        kr = _kacrice_region_mean(cfg.scheme.instantiate(n), cfg.region, n)
        agrees = bool(abs(mean - kr) <= 3.0 * max(se_mean, 1e-12))
    return DegreeReport(n, s, mean, variance, m4, se_mean, se_variance,
                        ks_d, ks_p, skipped, kr, agrees, standardized,
                        counts, uncertified)


def run_clt_experiment(cfg: ExperimentConfig,
                       threads: int | None = 1) -> ExperimentReport:
    """Count roots per (degree, sample) and report all per-degree statistics."""
    threads = resolve_threads(threads)
    rows = []
    for n in cfg.n_list:
        scheme = cfg.scheme.instantiate(n)
        counts, uncertified = _collect_counts(cfg, scheme, threads)
        rows.append(_degree_report(cfg, n, counts, uncertified))
    return ExperimentReport(cfg, tuple(rows))


def report_from_variances(n_list, variances) -> ExperimentReport:
    """Minimal report wrapper for slope fitting on externally supplied variances."""
    cfg = ExperimentConfig(n_list=tuple(int(n) for n in n_list), samples=2)
    rows = tuple(DegreeReport(int(n), 0, math.nan, float(v), math.nan, 0.0,
                              0.0, math.nan, math.nan, True, math.nan, None,
                              None, None)
                 for n, v in zip(n_list, variances))
    return ExperimentReport(cfg, rows)


@dataclass(frozen=True)
class SlopeResult:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xm, ym = x.mean(), y.mean()
    slope = float(((x - xm) @ (y - ym)) / ((x - xm) @ (x - xm)))
    return slope, float(ym - slope * xm)


def variance_slope(report: ExperimentReport, *, bootstrap: int = 1000,
                   seed: int = 0) -> SlopeResult:
    """OLS slope of variance against log n, with a bootstrap CI.

    The bootstrap resamples per-degree counts when they are available;
    variance-only reports fall back to a normal-theory CI from the OLS
    residuals.
    """
    rows = report.degrees
    if len(rows) < 3:
        raise ValidationError("variance slope needs at least 3 degrees")
    x = np.array([math.log(r.n) for r in rows])
    y = np.array([r.variance for r in rows])
    slope, intercept = _ols(x, y)
    if all(r.counts is not None for r in rows):
        rng = np.random.Generator(np.random.Philox(
            key=np.uint64(derive_seed(seed, "bootstrap"))))
        slopes = np.empty(bootstrap)
        for b in range(bootstrap):
            yb = np.array([r.counts[rng.integers(0, r.counts.size,
                                                 r.counts.size)].var(ddof=1)
                           for r in rows])
            slopes[b], _ = _ols(x, yb)
        lo, hi = np.percentile(slopes, [2.5, 97.5])
        return SlopeResult(slope, intercept, float(lo), float(hi))
    resid = y - (slope * x + intercept)
    dof = max(len(rows) - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / float((x - x.mean()) @
                                                      (x - x.mean())))
    t = scipy.stats.t.ppf(0.975, dof)
    return SlopeResult(slope, intercept, slope - t * se, slope + t * se)


@dataclass(frozen=True)
class MomentRow:
    n: int
    k: int
    moment_a: float
    moment_b: float
    diff: float
    combined_se: float
    passed: bool


@dataclass(frozen=True)
class UniversalityResult:
    rows: tuple[MomentRow, ...]
    smooth_f: tuple[float, float, bool]   # (diff, combined se, passed)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows) and self.smooth_f[2]


def _cubic_smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def universality_compare(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig,
                         k_max: int, threads: int | None = 1
                         ) -> UniversalityResult:
    """Empirical moment differences of N(region) under two atoms.

    Pass/fail is at the 3-combined-standard-error level. A smooth-function
    comparison (clipped cubic smoothstep of the centered count) is emitted
    alongside the raw moments, mirroring the smooth-metric form of the
    distributional claim.
    """
    if (cfg_a.scheme != cfg_b.scheme or cfg_a.n_list != cfg_b.n_list
            or cfg_a.region != cfg_b.region):
        raise ValidationError(
            "configs must share scheme, degrees and region (atoms may differ)")
    rep_a = run_clt_experiment(cfg_a, threads)
    rep_b = run_clt_experiment(cfg_b, threads)
    rows = []
    pooled = []
    for ra, rb in zip(rep_a.degrees, rep_b.degrees):
        pooled.extend([ra.counts, rb.counts])
        for k in range(1, k_max + 1):
            pa = ra.counts ** k
            pb = rb.counts ** k
            diff = float(pa.mean() - pb.mean())
            se = math.sqrt(pa.var(ddof=1) / pa.size + pb.var(ddof=1) / pb.size)
            rows.append(MomentRow(ra.n, k, float(pa.mean()), float(pb.mean()),
                                  diff, se, abs(diff) <= 3.0 * se))
    allc = np.concatenate(pooled)
    center = float(allc.mean())
    width = 4.0 * max(float(allc.std()), 1.0)
    fa = np.concatenate([_cubic_smoothstep(
        (r.counts - center) / width + 0.5) for r in rep_a.degrees])
    fb = np.concatenate([_cubic_smoothstep(
        (r.counts - center) / width + 0.5) for r in rep_b.degrees])
    diff = float(fa.mean() - fb.mean())
    se = math.sqrt(fa.var(ddof=1) / fa.size + fb.var(ddof=1) / fb.size)
    smooth = (diff, se, bool(abs(diff) <= 3.0 * max(se, 1e-12)))
    return UniversalityResult(tuple(rows), smooth)


@dataclass(frozen=True)
class TailMomentResult:
    estimate: float
    se: float
    mean_tail: float


def tail_moment(cfg: ExperimentConfig, k: int,
                threads: int | None = 1) -> TailMomentResult:
    """Monte Carlo estimate of E N^k over the complement of the region.

    The complement count is total minus region count, both exact. Accepts
    core or interval regions (the interval form covers the classical
    outside-(-1,1) checks).
    """
    if k not in (1, 2):
        raise ValidationError("tail moments are defined for k in {1, 2}")
    if cfg.region.kind == "real_line":
        raise ValidationError("tail of the whole line is empty")
    threads = resolve_threads(threads)
    n = cfg.n_list[0]
    scheme = cfg.scheme.instantiate(n)
    seeds = [derive_seed(cfg.seed, "tail", n, i) for i in range(cfg.samples)]

    def one(seed: int) -> float:
        sample = sample_polynomial(scheme, cfg.atom, seed)
        total = count_all_real_roots(sample.coeffs).count
        if cfg.region.kind == "interval":
            inner = count_real_roots(sample.coeffs, cfg.region.a,
                                     cfg.region.b).count
        else:
            inner = count_core_region(sample.coeffs,
                                      cfg.region.core_for(n)).count
        return float(total - inner)

    tails = np.array([one(s) for s in seeds])
    vals = tails ** k
    est = float(vals.mean())
    if k == 2:
        assert est >= float(tails.mean()) ** 2 - 1e-12  # E N^2 >= (E N)^2
    return TailMomentResult(est, float(np.sqrt(vals.var(ddof=1) / vals.size)),
                            float(tails.mean()))


@dataclass(frozen=True)
class ChainConfig:
    scheme: SchemeFamily = SchemeFamily()
    n: int = 2048
    a_n: float = 0.2
    b_n: float = 0.02
    deltas: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    alpha: float = 4.0
    samples: int = 500
    seed: int = 0


@dataclass(frozen=True)
class ChainRow:
    delta: float
    e_sign_sq: float        # E (S - S^sign)^2
    e_trun_sq: float        # E (S^trun - S^sign)^2
    m4_trun: float          # fourth central moment of S^trun
    span: float
    p: int
    q: int
    blocks: int


@dataclass(frozen=True)
class ChainReport:
    config: ChainConfig
    rows: tuple[ChainRow, ...]

    @property
    def sign_sq_decreasing(self) -> bool:
        vals = [r.e_sign_sq for r in self.rows]   # rows ordered by delta desc
        return all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def estimator_chain_report(cfg: ChainConfig) -> ChainReport:
    """Accuracy sweep of the sign-change and truncation estimators.

    For each delta: E(S - S^sign)^2, E(S^trun - S^sign)^2, and the fourth
    central moment of S^trun, with S the exact count on the grid span.
    Gaussian atoms only (the comparison lemmas are Gaussian statements).
    """
    atom = make_atom("gaussian")
    scheme = cfg.scheme.instantiate(cfg.n)
    deltas = tuple(sorted(cfg.deltas, reverse=True))
    grids = [dyadic_grid(cfg.a_n, cfg.b_n, d) for d in deltas]
    if any(len(g) < 2 for g in grids):
        raise ValidationError("a delta produced an empty grid")
    try:
        from .estimators import block_plan
        plans = [block_plan(g) for g in grids]
    except Exception:
        plans = [None] * len(grids)
    diffs_sign = [[] for _ in deltas]
    diffs_trun = [[] for _ in deltas]
    struns = [[] for _ in deltas]
    for i in range(cfg.samples):
        sample = sample_polynomial(scheme, atom,
                                   derive_seed(cfg.seed, "chain", i))
        counter = IntervalCounter(sample.coeffs)
        for gi, grid in enumerate(grids):
            s_exact = counter.count(float(grid.nodes[0]),
                                    float(grid.nodes[-1])).count
            s_sign = sign_change_count(sample.coeffs, grid).count
            s_trun = truncated_sign_chain(sample.coeffs, grid,
                                          cfg.alpha).count
            diffs_sign[gi].append((s_exact - s_sign) ** 2)
            diffs_trun[gi].append((s_trun - s_sign) ** 2)
            struns[gi].append(s_trun)
    rows = []
    for gi, (d, grid) in enumerate(zip(deltas, grids)):
        st = np.array(struns[gi])
        plan = plans[gi]
        rows.append(ChainRow(
            d, float(np.mean(diffs_sign[gi])), float(np.mean(diffs_trun[gi])),
            float(((st - st.mean()) ** 4).mean()), grid.span,
            plan.p if plan else 0, plan.q if plan else 0,
            plan.l if plan else 0))
    return ChainReport(cfg, tuple(rows))


# ---------------------------------------------------------------------------
# Serialization (formats documented in docs/formats.md)

CSV_HEADER = "n,mean,var,m4,ks_D,ks_p,kacrice_mean"


def report_to_csv(report: ExperimentReport) -> str:
    lines = [CSV_HEADER]
    for r in report.degrees:
        lines.append(f"{r.n},{r.mean!r},{r.variance!r},{r.m4!r},"
                     f"{r.ks_D!r},{r.ks_p!r},{r.kacrice_mean!r}")
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: ExperimentConfig) -> dict:
    region = {"kind": cfg.region.kind}
    for name in ("a", "b", "a_n", "b_n"):
        value = getattr(cfg.region, name)
        if math.isfinite(value):
            region[name] = value
    return {
        "scheme": {"kind": cfg.scheme.kind, "d": cfg.scheme.d,
                   "L": cfg.scheme.L},
        "atom": json.loads(atom_to_json(cfg.atom)),
        "n_list": list(cfg.n_list),
        "samples": cfg.samples,
        "region": region,
        "seed": cfg.seed,
        "estimator": {"kind": cfg.estimator.kind,
                      "delta": cfg.estimator.delta,
                      "alpha": cfg.estimator.alpha},
    }


def config_from_dict(doc: dict) -> ExperimentConfig:
    scheme = doc.get("scheme", {})
    region = doc.get("region", {})
    est = doc.get("estimator", {})
    atom = doc.get("atom", {"kind": "gaussian"})
    return ExperimentConfig(
        scheme=SchemeFamily(scheme.get("kind", "kac"),
                            int(scheme.get("d", 1)),
                            float(scheme.get("L", 1.0))),
        atom=atom_from_json(json.dumps(atom)),
        n_list=tuple(int(n) for n in doc.get("n_list", [256])),
        samples=int(doc.get("samples", 200)),
        region=RegionSpec(region.get("kind", "real_line"),
                          float(region.get("a", math.nan)),
                          float(region.get("b", math.nan)),
                          float(region.get("a_n", math.nan)),
                          float(region.get("b_n", math.nan))),
        seed=int(doc.get("seed", 0)),
        estimator=EstimatorSpec(est.get("kind", "exact"),
                                float(est.get("delta", 0.05)),
                                float(est.get("alpha", 2.0))),
    )


def report_to_json(report: ExperimentReport) -> str:
    doc = {"config": config_to_dict(report.config), "degrees": []}
    for r in report.degrees:
        doc["degrees"].append({
            "n": r.n, "samples": r.samples, "mean": r.mean,
            "variance": r.variance, "m4": r.m4, "se_mean": r.se_mean,
            "se_variance": r.se_variance, "ks_D": r.ks_D, "ks_p": r.ks_p,
            "ks_skipped": r.ks_skipped, "kacrice_mean": r.kacrice_mean,
            "kacrice_agrees": r.kacrice_agrees,
            "uncertified": r.uncertified,
            "counts": None if r.counts is None else r.counts.tolist(),
        })
    if len(report.degrees) >= 3:
        slope = variance_slope(report)
        doc["variance_slope"] = {"slope": slope.slope,
                                 "ci": [slope.ci_low, slope.ci_high],
                                 "maslova_K": maslova_constant()}
    return json.dumps(doc, sort_keys=True)
