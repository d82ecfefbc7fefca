"""Command-line front door.

Standard output is machine-readable (JSON, or CSV where documented);
progress goes to standard error. One seed governs a run; sub-seeds are
derived by keyed hashing. Identical invocations produce byte-identical
outputs. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .ensemble import make_atom, make_scheme, sample_polynomial
from .exceptions import PolylabError
from .kacrice import QuadConfig, expected_roots
from .mclog import (BumpSpec, green_integral, make_mc_config,
                    mc_zero_estimate, smoothed_count)
from .roots_exact import (count_all_real_roots, count_core_region,
                          count_real_roots)
from .stats import (ChainConfig, SchemeFamily, config_from_dict,
                    config_to_dict, derive_seed, estimator_chain_report,
                    report_to_csv, report_to_json, resolve_threads,
                    run_clt_experiment, tail_moment, universality_compare)

CHAIN_CSV_HEADER = "delta,e_sign_sq,e_trun_sq,m4_trun,span,p,q,blocks"
MCZERO_CSV_HEADER = "seed,estimate,green_integral,smoothed_count,resamples"


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _scheme_from_args(args) -> "CoefficientScheme":
    return make_scheme(args.scheme, args.n, d=args.d, L=args.L)


def _add_scheme_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", default="kac",
                   choices=["kac", "kac_derivative", "hyperbolic"])
    p.add_argument("--n", type=int, default=64, help="polynomial degree")
    p.add_argument("--d", type=int, default=1, help="kac_derivative order")
    p.add_argument("--L", type=float, default=1.0, help="hyperbolic parameter")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--output", default=None, help="output file (default stdout)")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: POLYLAB_THREADS or cores)")
    p.add_argument("--dump-config", action="store_true",
                   help="print the effective config JSON and exit")


def _experiment_config(args):
    doc = _load_config(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        doc["samples"] = args.samples
    if getattr(args, "n_list", None):
        doc["n_list"] = [int(v) for v in args.n_list.split(",")]
    return config_from_dict(doc)


def _cmd_sample(args) -> int:
    scheme = _scheme_from_args(args)
    atom = make_atom(args.atom)
    sample = sample_polynomial(scheme, atom, args.seed or 0)
    doc = {"scheme_id": sample.scheme_id, "atom_id": sample.atom_id,
           "seed": sample.seed, "n": sample.n,
           "coeffs": sample.coeffs.tolist()}
    _emit(json.dumps(doc, sort_keys=True) + "\n", args.output)
    return 0


def _cmd_count(args) -> int:
    scheme = _scheme_from_args(args)
    atom = make_atom(args.atom)
    sample = sample_polynomial(scheme, atom, args.seed or 0)
    if args.region == "real_line":
        cc = count_all_real_roots(sample.coeffs)
    elif args.region == "interval":
        cc = count_real_roots(sample.coeffs, args.a, args.b)
    else:
        from .roots_exact import CoreRegion
        region = (CoreRegion(args.a_n, args.b_n)
                  if args.a_n is not None
                  else CoreRegion.default_for_degree(scheme.n))
        cc = count_core_region(sample.coeffs, region)
    doc = {"count": cc.count, "certified": cc.certified,
           "precision_bits": cc.precision_bits, "region": args.region,
           "seed": sample.seed}
    _emit(json.dumps(doc, sort_keys=True) + "\n", args.output)
    return 0


def _cmd_kacrice(args) -> int:
    scheme = _scheme_from_args(args)
    quad = QuadConfig(rel_tol=args.rel_tol, abs_tol=args.abs_tol,
                      max_subdivisions=args.max_subdivisions)
    a, b = args.interval
    out = expected_roots(scheme, a, b, quad)
    doc = {"value": out.value, "error": out.error, "converged": out.converged,
           "interval": [a, b], "scheme_id": scheme.scheme_id}
    _emit(json.dumps(doc, sort_keys=True) + "\n", args.output)
    return 0


def _cmd_clt(args) -> int:
    cfg = _experiment_config(args)
    if args.dump_config:
        sys.stdout.write(json.dumps(config_to_dict(cfg), sort_keys=True) + "\n")
        return 0
    threads = resolve_threads(args.threads)
    _progress(f"clt: degrees {list(cfg.n_list)}, {cfg.samples} samples, "
              f"{threads} thread(s)")
    report = run_clt_experiment(cfg, threads)
    if args.output:
        with open(args.output + ".json", "w") as fh:
            fh.write(report_to_json(report) + "\n")
        with open(args.output + ".csv", "w") as fh:
            fh.write(report_to_csv(report))
        _progress(f"wrote {args.output}.json and {args.output}.csv")
    else:
        sys.stdout.write(report_to_json(report) + "\n")
    return 0


def _cmd_universality(args) -> int:
    doc = _load_config(args.config)
    base = doc.get("base", {})
    if args.seed is not None:
        base["seed"] = args.seed
    cfg_a = config_from_dict({**base, "atom": doc["atom_a"]})
    cfg_b = config_from_dict({**base, "atom": doc["atom_b"],
                              "seed": base.get("seed", 0) + 1})
    k_max = int(doc.get("k_max", 2))
    if args.dump_config:
        sys.stdout.write(json.dumps(
            {"base": config_to_dict(cfg_a), "atom_a": doc["atom_a"],
             "atom_b": doc["atom_b"], "k_max": k_max}, sort_keys=True) + "\n")
        return 0
    result = universality_compare(cfg_a, cfg_b, k_max,
                                  resolve_threads(args.threads))
    out = {"rows": [{"n": r.n, "k": r.k, "moment_a": r.moment_a,
                     "moment_b": r.moment_b, "diff": r.diff,
                     "combined_se": r.combined_se, "passed": r.passed}
                    for r in result.rows],
           "smooth_f": {"diff": result.smooth_f[0], "se": result.smooth_f[1],
                        "passed": result.smooth_f[2]},
           "all_passed": result.all_passed}
    _emit(json.dumps(out, sort_keys=True) + "\n", args.output)
    return 0


def _cmd_chain(args) -> int:
    doc = _load_config(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    scheme_doc = doc.get("scheme", {})
    cfg = ChainConfig(
        scheme=SchemeFamily(scheme_doc.get("kind", "kac"),
                            int(scheme_doc.get("d", 1)),
                            float(scheme_doc.get("L", 1.0))),
        n=int(doc.get("n", 2048)),
        a_n=float(doc.get("a_n", 0.2)),
        b_n=float(doc.get("b_n", 0.02)),
        deltas=tuple(float(v) for v in doc.get("deltas",
                                               [0.2, 0.1, 0.05, 0.025])),
        alpha=float(doc.get("alpha", 4.0)),
        samples=int(doc.get("samples", 500)),
        seed=int(doc.get("seed", 0)))
    if args.dump_config:
        sys.stdout.write(json.dumps({
            "scheme": {"kind": cfg.scheme.kind, "d": cfg.scheme.d,
                       "L": cfg.scheme.L},
            "n": cfg.n, "a_n": cfg.a_n, "b_n": cfg.b_n,
            "deltas": list(cfg.deltas), "alpha": cfg.alpha,
            "samples": cfg.samples, "seed": cfg.seed}, sort_keys=True) + "\n")
        return 0
    _progress(f"chain: n={cfg.n}, deltas {list(cfg.deltas)}, "
              f"{cfg.samples} samples")
    report = estimator_chain_report(cfg)
    lines = [CHAIN_CSV_HEADER]
    for r in report.rows:
        lines.append(f"{r.delta!r},{r.e_sign_sq!r},{r.e_trun_sq!r},"
                     f"{r.m4_trun!r},{r.span!r},{r.p},{r.q},{r.blocks}")
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def _cmd_mczero(args) -> int:
    scheme = _scheme_from_args(args)
    atom = make_atom(args.atom)
    spec = BumpSpec(args.delta, args.alpha)
    master = args.seed or 0
    lines = [MCZERO_CSV_HEADER]
    for trial in range(args.trials):
        seed = derive_seed(master, "mczero", trial)
        sample = sample_polynomial(scheme, atom, seed)
        sc = smoothed_count(sample.coeffs, spec)
        gr = green_integral(sample.coeffs, spec)
        mc = mc_zero_estimate(sample.coeffs, spec,
                              make_mc_config(spec, m=args.m, seed=seed))
        lines.append(f"{seed},{mc.value!r},{gr.value!r},{sc!r},{mc.resamples}")
        _progress(f"trial {trial}: mc={mc.value:.4f} green={gr.value:.4f} "
                  f"smoothed={sc:.4f}")
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def _cmd_tail(args) -> int:
    cfg = _experiment_config(args)
    if args.dump_config:
        sys.stdout.write(json.dumps(config_to_dict(cfg), sort_keys=True) + "\n")
        return 0
    out = tail_moment(cfg, args.k, resolve_threads(args.threads))
    doc = {"k": args.k, "estimate": out.estimate, "se": out.se,
           "mean_tail": out.mean_tail}
    _emit(json.dumps(doc, sort_keys=True) + "\n", args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polylab",
        description="Real roots of random polynomials: sampling, certified "
                    "counting, Kac-Rice quadrature, estimator chains, and "
                    "Monte Carlo zero counting.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw one polynomial realization")
    _add_scheme_flags(p)
    p.add_argument("--atom", default="gaussian",
                   choices=["gaussian", "rademacher", "uniform_sym"])
    _add_common(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("count", help="certified real-root count of one sample")
    _add_scheme_flags(p)
    p.add_argument("--atom", default="gaussian",
                   choices=["gaussian", "rademacher", "uniform_sym"])
    p.add_argument("--region", default="real_line",
                   choices=["real_line", "core", "interval"])
    p.add_argument("--a", type=float, default=-1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--a-n", dest="a_n", type=float, default=None)
    p.add_argument("--b-n", dest="b_n", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=_cmd_count)

    p = sub.add_parser("kacrice", help="expected Gaussian root count on (a, b)")
    _add_scheme_flags(p)
    p.add_argument("--interval", type=float, nargs=2, default=[-1.0, 1.0],
                   metavar=("A", "B"))
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--abs-tol", type=float, default=1e-11)
    p.add_argument("--max-subdivisions", type=int, default=200)
    _add_common(p)
    p.set_defaults(func=_cmd_kacrice)

    p = sub.add_parser("clt", help="CLT experiment over a degree list")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--n-list", default=None,
                   help="comma-separated degrees, e.g. 256,512,1024")
    _add_common(p)
    p.set_defaults(func=_cmd_clt)

    p = sub.add_parser("universality",
                       help="compare root-count moments under two atoms")
    _add_common(p)
    p.set_defaults(func=_cmd_universality)

    p = sub.add_parser("chain", help="sign-change/truncation estimator sweep")
    _add_common(p)
    p.set_defaults(func=_cmd_chain)

    p = sub.add_parser("mczero",
                       help="Monte Carlo log-potential zero counting trials")
    _add_scheme_flags(p)
    p.add_argument("--atom", default="gaussian",
                   choices=["gaussian", "rademacher", "uniform_sym"])
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--m", type=int, default=None, help="points per trial")
    p.add_argument("--trials", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=_cmd_mczero)

    p = sub.add_parser("tail", help="moments of the count outside the region")
    p.add_argument("--k", type=int, default=1, choices=[1, 2])
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--n-list", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_tail)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PolylabError as exc:
        print(f"polylab: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"polylab: i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
