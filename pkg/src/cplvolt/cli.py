"""Command-line front end.

Exit codes:
    0  success (analysis reached a verdict: dominant equilibrium or none)
    1  input fails validation
    2  input cannot be parsed
    3  analysis inconclusive
    4  oracle requested for n > 2
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .adapters import system_from_document
from .engine import INCONCLUSIVE, IntegrationOptions, classify
from .model import ParseError, loads_document, symmetrized
from .oracle import enumerate_equilibria
from .sweep import SweepSpec, sweep

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARSE = 2
EXIT_INCONCLUSIVE = 3
EXIT_ORACLE_SIZE = 4

REPORT_VERSION = 1


def _load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return system_from_document(loads_document(text))


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_validate(args) -> int:
    try:
        _, _, report = _load(args.input)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    _emit(report.to_dict())
    return EXIT_OK if report.passed else EXIT_INVALID


def _options(args) -> IntegrationOptions:
    defaults = IntegrationOptions()
    return IntegrationOptions(
        rel_tol=args.rel_tol if args.rel_tol is not None else defaults.rel_tol,
        abs_tol=args.abs_tol if args.abs_tol is not None else defaults.abs_tol,
        converge_tol=(args.converge_tol if args.converge_tol is not None
                      else defaults.converge_tol),
        max_time=args.max_time if args.max_time is not None else defaults.max_time,
    )


def build_report(model, system, validation, outcome=None, traj_path=None, timings=None) -> dict:
    report = {
        "version": REPORT_VERSION,
        "input": {"model": model, "n": system.n},
        "validation": validation.to_dict(),
    }
    if outcome is not None:
        report["seed"] = outcome.seed.to_dict()
        report["outcome"] = outcome.to_dict()
        if outcome.stability is not None:
            report["stability"] = outcome.stability.to_dict()
    if traj_path is not None:
        report["trajectory_file"] = str(traj_path)
    if timings is not None:
        report["timings"] = timings
    return report


def cmd_analyze(args) -> int:
    t_start = time.perf_counter()
    try:
        model, system, validation = _load(args.input)
        opts = _options(args)
        if not args.safety > 1:
            raise ValueError(f"--safety must exceed 1, got {args.safety}")
    except (ParseError, ValueError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if not validation.passed:
        report = build_report(model, system, validation)
        if args.json:
            _emit(report)
        else:
            for rule, detail in validation.violations:
                print(f"validation failed: {rule}: {detail}", file=sys.stderr)
        return EXIT_INVALID

    t0 = time.perf_counter()
    outcome = classify(symmetrized(system), opts, safety=args.safety)
    t1 = time.perf_counter()

    traj_path = None
    if args.traj_out:
        traj_path = Path(args.traj_out)
        traj_path.write_text(outcome.trajectory.to_csv())
    timings = None if args.no_timings else {
        "classify_s": t1 - t0,
        "total_s": time.perf_counter() - t_start,
    }
    report = build_report(model, system, validation, outcome, traj_path, timings)

    if args.json:
        _emit(report)
    else:
        _print_summary(report)
    return EXIT_INCONCLUSIVE if outcome.kind == INCONCLUSIVE else EXIT_OK


def _print_summary(report):
    out = report["outcome"]
    seed = report["seed"]
    print(f"model: {report['input']['model']}  n = {report['input']['n']}")
    print(f"seed:  mu = {seed['mu']:.6g}, margin = {seed['margin']:.6g}")
    print(f"x0:    {np.array2string(np.array(seed['x0']), precision=6)}")
    if out["kind"] == "dominant":
        stab = report["stability"]
        print("outcome: dominant equilibrium")
        print(f"x_max: {np.array2string(np.array(out['x_max']), precision=8)}")
        print(f"eigenvalues: {np.array2string(np.array(stab['eigenvalues']), precision=6)}")
        print(f"long-term stable: {stab['long_term_stable']}")
    elif out["kind"] == "none":
        print("outcome: no equilibrium")
        print(f"collapsed nodes: {out['collapsed']}  at t = {out['t_collapse']:.6g}")
    else:
        print(f"outcome: inconclusive ({out['reason']})")
        if out.get("non_hyperbolic_suspect"):
            print("non-hyperbolic equilibrium suspected")
    for w in out.get("warnings", []):
        print(f"warning: {w}")


def cmd_sweep(args) -> int:
    try:
        _, system, validation = _load(args.input)
        opts = _options(args)
    except (ParseError, ValueError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if not validation.passed:
        print("base system fails validation", file=sys.stderr)
        return EXIT_INVALID
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("CPL_WORKERS", "1"))
    lo_i, hi_i, lo_j, hi_j = args.range
    try:
        spec = SweepSpec(symmetrized(system), args.axis_i - 1, args.axis_j - 1,
                         (lo_i, hi_i, args.steps[0]), (lo_j, hi_j, args.steps[1]))
    except ValueError as exc:
        print(f"bad sweep: {exc}", file=sys.stderr)
        return EXIT_PARSE
    region = sweep(spec, opts, workers=max(1, workers), refine=args.refine)
    text = region.to_csv(system.n)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for lo, hi in region.transitions:
        print(f"transition between {lo} and {hi}", file=sys.stderr)
    for w in region.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        _, system, validation = _load(args.input)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if system.n > 2:
        print("oracle supports n <= 2 only", file=sys.stderr)
        return EXIT_ORACLE_SIZE
    if not validation.passed:
        print("input fails validation", file=sys.stderr)
        return EXIT_INVALID
    result = enumerate_equilibria(symmetrized(system), args.grid_density)
    _emit(result.to_dict())
    return EXIT_OK


def _add_integration_flags(p):
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--abs-tol", type=float)
    p.add_argument("--converge-tol", type=float)
    p.add_argument("--max-time", type=float)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cplvolt",
        description="Existence and long-term stability of voltage equilibria "
                    "with constant power loads.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check structural assumptions on the input")
    p.add_argument("input")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="decide existence and compute the dominant equilibrium")
    p.add_argument("input")
    p.add_argument("--safety", type=float, default=1.05, help="seed scaling safety factor (>1)")
    _add_integration_flags(p)
    p.add_argument("--traj-out", help="write the characteristic trajectory as CSV")
    p.add_argument("--json", action="store_true", help="emit the full JSON report")
    p.add_argument("--no-timings", action="store_true", help="omit timings from the report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="feasibility map over two power coefficients")
    p.add_argument("input")
    p.add_argument("--axis-i", type=int, required=True, help="1-based node index")
    p.add_argument("--axis-j", type=int, required=True, help="1-based node index")
    p.add_argument("--range", type=float, nargs=4, required=True,
                   metavar=("LO_I", "HI_I", "LO_J", "HI_J"))
    p.add_argument("--steps", type=int, nargs=2, required=True, metavar=("N_I", "N_J"))
    p.add_argument("--workers", type=int, help="worker processes (default: $CPL_WORKERS or 1)")
    p.add_argument("--refine", action="store_true", help="bisect feasibility transitions")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    _add_integration_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="enumerate equilibria of 1- or 2-node systems")
    p.add_argument("input")
    p.add_argument("--grid-density", type=int, default=400)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
