"""Command-line interface.

Subcommands: generate, approx, altproj, bounds, experiment, plot.
Every stochastic subcommand requires an explicit --seed.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bounds as bounds_mod
from . import kernels, matio, rff, taylor, tensors
from .altproj import AltProjConfig, binary_search_eps, run_trials
from .compress import jl_compress, rank_formula
from .experiments import (
    ExperimentConfig,
    bounds_table_text,
    emit_plot_data,
    kernel_for,
    load_config,
    run_experiment,
    write_bounds_table,
)
from .lowrank import Factorization
from .records import write_csv
from .rng import split
from .sampling import SamplingScheme, sample_ball, sample_sphere


def _sample(kind: str, seed, n: int, m: int, radius: float):
    if kind == "sphere":
        return sample_sphere(seed, n, m)
    return sample_ball(seed, n, m, radius)


def _point_pair(args):
    streams = split(args.seed, 2)
    X = _sample(args.sampling, streams[0], args.n, args.m, args.radius)
    scheme = SamplingScheme.coerce(args.scheme)
    Y = X if scheme is SamplingScheme.SYMMETRIC else _sample(
        args.sampling, streams[1], args.n, args.m, args.radius
    )
    return X, Y


def _add_common_points(p, scheme_default="independent"):
    p.add_argument("--n", type=int, required=True, help="points per side")
    p.add_argument("--m", type=int, required=True, help="point dimension")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--scheme", choices=["independent", "symmetric"], default=scheme_default)
    p.add_argument("--sampling", choices=["ball", "sphere"], default="ball")


def cmd_generate(args) -> int:
    if args.function == "f3":
        print("f3 generates a tensor; the flat binary format stores matrices only", file=sys.stderr)
        return 2
    spec = kernel_for(args.function, args.radius)
    X, Y = _point_pair(args)
    F = kernels.eval_kernel_matrix(spec, args.scheme, X, None if Y is X else Y)
    matio.save_matrix(args.out, F)
    print(f"wrote {F.shape[0]} x {F.shape[1]} matrix to {args.out}")
    return 0


def _print_report(tag: str, payload: dict):
    print(json.dumps({"algorithm": tag, **payload}, indent=2, sort_keys=True, default=str))


def cmd_approx(args) -> int:
    alg = args.algorithm
    if alg == "tt-taylor":
        streams = split(args.seed, 4)
        sets = [_sample(args.sampling, streams[j], args.n, args.m, args.radius) for j in range(3)]
        spec = kernel_for("f3", args.radius)
        P = tensors.cp_from_points(sets)
        t = args.t if args.t is not None else taylor.default_order(args.eps)
        _, rep = tensors.taylor_tt_approx(spec, P, t, args.r, args.eps, streams[3])
        _print_report(alg, {
            "ranks": rep.ranks, "rank_budget": rep.rank_budget,
            "measured_relative_error": rep.measured_relative_error,
            "error_sampled": rep.error_sampled,
            "incremental_powers": rep.incremental_powers,
        })
        return 0

    X, Y = _point_pair(args)
    if alg == "jl":
        if args.function != "linear":
            print("jl compresses the exact factorization of the linear kernel x'y; "
                  "use --function linear", file=sys.stderr)
            return 2
        G, rep = jl_compress(Factorization(X.points, Y.points), args.eps, args.seed)
        _print_report(alg, {
            "rank": G.width, "requested_rank": rep.requested_rank,
            "achieved_max_error": rep.achieved_max_error,
            "target_bound": rep.target_bound, "attempts": rep.attempts,
            "certified": rep.certified,
        })
    elif alg == "rff":
        tag = "cauchy" if args.function == "cauchy" else kernel_for(
            "gauss" if args.function == "gauss" else "f1", args.radius
        )
        if args.function not in ("gauss", "f1", "cauchy"):
            print("rff supports gauss, f1 (exponential), and cauchy", file=sys.stderr)
            return 2
        G, rep = rff.rff_then_compress(
            tag, X, Y, rho=args.rho, eps=args.eps, seed=args.seed, theta=args.theta
        )
        _print_report(alg, {
            "rank": rep.rank, "rho": rep.rho,
            "feature_error": rep.feature_error,
            "measured_relative_error": rep.measured_relative_error,
            "sketch_certified": rep.sketch.certified,
        })
    else:
        if alg == "taylor-ip":
            if args.function != "gauss" or args.sampling != "sphere":
                print("taylor-ip covers the gaussian kernel on the unit sphere; "
                      "pass --function gauss --sampling sphere", file=sys.stderr)
                return 2
            spec = kernels.gaussian_on_sphere()
            builder = taylor.approx_inner_product
        elif alg == "taylor-dist":
            if args.function not in ("gauss", "f2"):
                print("taylor-dist covers gauss and f2", file=sys.stderr)
                return 2
            spec = kernel_for(args.function, args.radius)
            builder = taylor.approx_sq_distance
        else:  # taylor-dist-local
            if args.function not in ("gauss", "f1", "f2"):
                print("taylor-dist-local covers gauss, f1, and f2", file=sys.stderr)
                return 2
            spec = kernel_for(args.function, args.radius)
            builder = taylor.approx_sq_distance_local
        G, rep = builder(spec, X, None, Y, t=args.t, eps=args.eps, seed=args.seed)
        _print_report(alg, {
            "rank": rep.rank, "order": rep.order,
            "measured_relative_error": rep.measured_relative_error,
            "certified_bound": rep.certified_bound,
            "corollary_bound": rep.corollary_bound,
            "regime_ok": rep.regime_ok, "certified": rep.certified,
        })
    if args.out_prefix and alg != "tt-taylor":
        matio.save_matrix(args.out_prefix + ".left.bin", G.left)
        matio.save_matrix(args.out_prefix + ".right.bin", G.right)
    return 0


def _solver_from_args(args) -> AltProjConfig:
    return AltProjConfig(
        max_iters=args.max_iters, tol=args.tol, bisect_iters=args.bisect_iters,
        restarts=args.restarts, init=args.init,
        stall_patience=args.stall_patience, stall_rtol=args.stall_rtol,
    )


def cmd_altproj(args) -> int:
    spec = kernel_for(args.function, args.radius)
    cfg = _solver_from_args(args)
    if args.trials > 1:
        summary = run_trials(
            spec, args.scheme, args.n, args.m, args.r, cfg=cfg,
            trials=args.trials, seed=args.seed, radius=args.radius,
            function=args.function,
        )
        print(f"median relative eps* over {args.trials} trials: "
              f"{summary.median_relative:.6g}")
        if summary.baseline_median is not None:
            print(f"truncated-SVD baseline median: {summary.baseline_median:.6g}")
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                write_csv(summary.records, fh)
            print(f"wrote {len(summary.records)} rows to {args.out}")
        return 0
    streams = split(args.seed, 4)
    if args.function == "f3":
        sets = [sample_ball(streams[j], args.n, args.m, args.radius) for j in range(3)]
        F = kernels.eval_kernel_tensor(spec, sets)
        rank = (args.r, args.r)
    else:
        X = sample_ball(streams[0], args.n, args.m, args.radius)
        scheme = SamplingScheme.coerce(args.scheme)
        Y = None if scheme is SamplingScheme.SYMMETRIC else sample_ball(
            streams[1], args.n, args.m, args.radius
        )
        F = kernels.eval_kernel_matrix(spec, scheme, X, Y)
        rank = args.r
    result = binary_search_eps(F, rank, cfg, streams[3])
    print(f"eps* = {result.eps_star:.6g} (relative {result.relative:.6g}) "
          f"after {result.evaluations} solver runs")
    return 0


def cmd_bounds(args) -> int:
    cfg = ExperimentConfig(
        experiment="bounds", n_grid=tuple(args.n_grid), m_grid=(args.m,),
        eps=args.eps, C=args.C, M=args.M, Cu=args.Cu, Cv=args.Cv,
        beta2=args.beta2, output=args.out or "-",
    )
    if args.out:
        write_bounds_table(cfg, args.out)
        print(f"wrote bounds table to {args.out}")
    else:
        sys.stdout.write(bounds_table_text(cfg))
    onset = bounds_mod.stage_two_onset(args.eps)
    print(f"# stage-2 onset for eps={args.eps}: n = {onset}", file=sys.stderr)
    return 0


def cmd_experiment(args) -> int:
    overrides = {}
    for key in ("experiment", "function", "scheme", "trials", "seed", "output",
                "radius", "eps", "theta", "rho", "jobs", "max_iters",
                "bisect_iters", "restarts", "init", "stall_patience"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    for key in ("n_grid", "m_grid", "r_grid"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = tuple(value)
    if args.algorithms is not None:
        overrides["algorithms"] = tuple(args.algorithms)
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = ExperimentConfig(**overrides)
        cfg.validate()
    records = run_experiment(cfg)
    print(f"wrote {len(records)} rows to {cfg.output}")
    return 0


def cmd_plot(args) -> int:
    rows = emit_plot_data(args.infile, args.out, args.svg)
    print(f"aggregated {len(rows)} points into {args.out}"
          + (f" and {args.svg}" if args.svg else ""))
    return 0


def _int_list(raw: str) -> list[int]:
    return [int(x) for x in raw.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxnorm-lowrank",
        description="Entrywise low-rank approximation of function-generated "
                    "matrices and tensors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="evaluate a kernel matrix and store it")
    p.add_argument("--function", choices=["f1", "f2", "gauss"], required=True)
    _add_common_points(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("approx", help="run one constructive approximation")
    p.add_argument("--algorithm", required=True, choices=[
        "taylor-ip", "taylor-dist", "taylor-dist-local", "rff", "jl", "tt-taylor",
    ])
    p.add_argument("--function", default="gauss",
                   choices=["f1", "f2", "f3", "gauss", "cauchy", "linear"])
    _add_common_points(p)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--r", type=int, default=10, help="TT target rank (tt-taylor)")
    p.add_argument("--rho", type=int, default=64)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--out-prefix", default=None)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("altproj", help="alternating projections with binary search")
    p.add_argument("--function", choices=["f1", "f2", "f3", "gauss"], required=True)
    _add_common_points(p)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--bisect-iters", type=int, default=20)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--init", choices=["gaussian", "zero"], default="gaussian")
    p.add_argument("--stall-patience", type=int, default=50)
    p.add_argument("--stall-rtol", type=float, default=1e-3)
    p.set_defaults(func=cmd_altproj)

    p = sub.add_parser("bounds", help="closed-form rank-bound table")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--Cu", type=float, default=0.0)
    p.add_argument("--Cv", type=float, default=0.0)
    p.add_argument("--beta2", type=int, default=None)
    p.add_argument("--n-grid", type=_int_list, default=[10**3, 10**5, 10**7, 10**9])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("experiment", help="run a full experiment grid to CSV")
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--experiment", choices=["varm", "varr", "varn", "bounds", "single"], default=None)
    p.add_argument("--function", choices=["f1", "f2", "f3", "gauss"], default=None)
    p.add_argument("--scheme", choices=["independent", "symmetric"], default=None)
    p.add_argument("--n-grid", dest="n_grid", type=_int_list, default=None)
    p.add_argument("--m-grid", dest="m_grid", type=_int_list, default=None)
    p.add_argument("--r-grid", dest="r_grid", type=_int_list, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--rho", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--algorithms", type=lambda s: s.split(","), default=None)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    p.add_argument("--bisect-iters", dest="bisect_iters", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--init", choices=["gaussian", "zero"], default=None)
    p.add_argument("--stall-patience", dest="stall_patience", type=int, default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("plot", help="aggregate an experiment CSV for plotting")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
