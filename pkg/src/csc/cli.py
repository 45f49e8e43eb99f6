"""``csc`` command line: run / verify experiment plans, generate dictionaries, solve.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings

import numpy as np

from .bench import ExperimentPlan, run_experiment, verify
from .conv_model import ConvOperator, LocalDictionary, mutual_coherence
from .errors import CSCError, FormatError, MissingArtifact, NoConvergence, PlanInvalid
from .io import load_dictionary, load_vector, save_dictionary, save_vector
from .pursuit_convex import (BpConfig, LambdaSchedule, bp_admm_local, bp_global_reference,
                             bp_ist_local)
from .pursuit_greedy import OmpConfig, omp
from .signals import dct_local_dictionary, generate_low_coherence_dictionary

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _cmd_run(args):
    plan = ExperimentPlan.load(args.plan)
    if args.workers is not None:
        plan = ExperimentPlan(plan.name, plan.out, plan.options, args.workers)
    summary = run_experiment(plan)
    print(f"{plan.name}: {summary.rows} rows in {summary.wall_time:.1f}s -> {summary.out}")
    for trial, err in sorted(summary.failures.items()):
        print(f"  trial {trial} failed: {err}", file=sys.stderr)
    return EXIT_OK


def _cmd_verify(args):
    report = verify(args.dir)
    print(f"{report.experiment}:")
    print(report.render(), end="")
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_gen_dict(args):
    if args.dct:
        local = dct_local_dictionary(args.n, args.m)
    else:
        local = generate_low_coherence_dictionary(args.n, args.m, band=tuple(args.band),
                                                  target=args.target, seed=args.seed)
    save_dictionary(args.out, local.atoms)
    if args.N:
        print(f"mu = {mutual_coherence(ConvOperator(local, args.N)):.6g} at N={args.N}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, ("iter", "objective", "primal_res", "dual_res", "wall_time"),
                           lineterminator="\n")
        w.writeheader()
        w.writerows(trace)


def _cmd_solve(args):
    local = LocalDictionary(load_dictionary(args.dict))
    Y = load_vector(args.inp)
    op = ConvOperator(local, Y.size)
    if args.solver == "omp":
        if (args.n_nonzero is None) == (args.eps is None):
            raise PlanInvalid("omp needs exactly one of --n-nonzero or --eps")
        cfg = OmpConfig(n_nonzero=args.n_nonzero, eps=args.eps, max_iterations=args.max_iters)
        res = omp(op, Y, cfg)
    else:
        if (args.lam is None) == (args.lambda_schedule is None):
            raise PlanInvalid("give exactly one of --lambda or --lambda-schedule")
        schedule = None if args.lambda_schedule is None else LambdaSchedule(decay=args.lambda_schedule)
        cfg = BpConfig(lam=args.lam, schedule=schedule, max_iterations=args.max_iters or 100_000,
                       tol=args.tol, mode=args.mode)
        if args.solver == "ista":
            res = bp_global_reference(op, Y, cfg)
        elif args.solver == "ist-local":
            res = bp_ist_local(op, Y, cfg)
        else:
            res = bp_admm_local(op, Y, cfg, rho=args.rho)
    save_vector(args.out, res.code)
    if args.trace:
        _write_trace(args.trace, res.trace)
    print(f"{args.solver}: {res.iterations} iterations, converged={res.converged}, "
          f"nnz={np.count_nonzero(res.code)}, residual={res.residual_norms[-1]:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment plan (key=value file)")
    p.add_argument("plan")
    p.add_argument("--workers", type=int, default=None, help="override the plan's worker count")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="check the artifacts of a finished run")
    p.add_argument("dir")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("gen-dict", help="write a local dictionary file")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", type=float, default=0.09)
    p.add_argument("--band", type=float, nargs=2, default=(0.085, 0.095), metavar=("LO", "HI"))
    p.add_argument("--N", type=int, default=None, help="report the coherence at this signal length")
    p.add_argument("--dct", action="store_true", help="first m DCT-II basis vectors instead")
    p.set_defaults(func=_cmd_gen_dict)

    p = sub.add_parser("solve", help="sparse-code one signal")
    p.add_argument("--solver", choices=("omp", "ista", "admm", "ist-local"), required=True)
    p.add_argument("--in", dest="inp", required=True, help="signal in vec v1 format")
    p.add_argument("--dict", required=True, help="local dictionary in convdict v1 format")
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--lambda-schedule", type=float, default=None, metavar="BETA",
                   help="decay factor of the geometric penalty schedule")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--mode", choices=("l1", "l0"), default="l1")
    p.add_argument("--n-nonzero", type=int, default=None, help="omp: fixed number of atoms")
    p.add_argument("--eps", type=float, default=None, help="omp: residual stopping level")
    p.add_argument("--trace", default=None, help="write the per-iteration trace as CSV")
    p.set_defaults(func=_cmd_solve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default", NoConvergence)
            return args.func(args)
    except (MissingArtifact, FormatError, PlanInvalid, OSError, ValueError, CSCError) as exc:
        print(f"csc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
