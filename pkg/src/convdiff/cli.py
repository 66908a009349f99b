"""Command line: ``convdiff {solve,converge,figure,verify}``.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from .experiments import FORMATS, ExperimentConfig, dump_solution, run_convergence
from .norms import NORM_NAMES
from .solvers import METHODS, SD_LOADS

FORCING_CHOICES = ("1", "1-2x", "2x", "cos7pi2")
EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _levels(text: str):
    try:
        a, b = (int(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b, got {text!r}") from None
    if b < a:
        raise argparse.ArgumentTypeError(f"empty level range {text!r}")
    return list(range(a, b + 1))


def _delta(text: str):
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("delta must be non-negative")
    return value


def _nonneg_float(text: str):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="convdiff", description="1D convection-diffusion finite element lab")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, multi_eps: bool):
        sp.add_argument("--method", choices=METHODS, required=True)
        sp.add_argument("--f", dest="forcing", choices=FORCING_CHOICES, required=True)
        if multi_eps:
            sp.add_argument("--eps", type=_nonneg_float, action="append", required=True, help="repeatable")
        else:
            sp.add_argument("--eps", type=_nonneg_float, required=True)
        sp.add_argument("--delta", type=_delta, default=None, help="stabilization weight, or 'auto' for 2h/3")
        sp.add_argument("--sd-load", choices=SD_LOADS, default="consistent", help="streamline-diffusion right-hand side")
        sp.add_argument("--format", dest="fmt", choices=FORMATS, default="csv")
        sp.add_argument("--out", help="write here instead of stdout")

    s = sub.add_parser("solve", help="nodal values of one discrete solution")
    common(s, multi_eps=False)
    s.add_argument("--n", type=int, required=True)

    fg = sub.add_parser("figure", help="solution samples with exact and reduced overlays")
    common(fg, multi_eps=False)
    fg.add_argument("--n", type=int, required=True)
    fg.add_argument("--samples", type=int, default=0, help="extra points per element")

    c = sub.add_parser("converge", help="errors and orders over mesh levels")
    common(c, multi_eps=True)
    c.add_argument("--levels", type=_levels, default=list(range(1, 7)), help="a:b, inclusive")
    c.add_argument("--norm", dest="norms", choices=NORM_NAMES, action="append", help="repeatable")
    c.add_argument("--exclude-right", type=_nonneg_float, default=0.0, help="fraction of nodes dropped next to x = 1")
    c.add_argument("--level-offset", type=int, default=5, help="level i uses n = 2^(i + offset)")
    c.add_argument("--jobs", type=int, default=1)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--samples", type=int, default=100)
    v.add_argument("--quick", action="store_true", help="skip the theorem-bound grid")
    return p


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _check_env():
    raw = os.environ.get("CONVDIFF_QUAD_POINTS")
    if raw is None:
        return
    try:
        ok = int(raw) >= 1
    except ValueError:
        ok = False
    if not ok:
        raise UsageError(f"CONVDIFF_QUAD_POINTS must be a positive integer, got {raw!r}")


def _cmd_solve(args, samples: int, overlay: bool) -> int:
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    data = dump_solution(args.method, args.forcing, args.eps, args.n, samples, overlay, args.delta, args.sd_load)
    _emit(data.render(args.fmt), args.out)
    if not data.ok:
        print(f"convdiff: {data.diagnosis}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_converge(args) -> int:
    try:
        cfg = ExperimentConfig(
            method=args.method,
            forcing=args.forcing,
            eps=args.eps,
            levels=args.levels,
            norms=args.norms or ["l2"],
            exclude_right=args.exclude_right,
            delta=args.delta,
            sd_load=args.sd_load,
            level_offset=args.level_offset,
            fmt=args.fmt,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = run_convergence(cfg, jobs=max(1, args.jobs))
    _emit(report.render(), args.out)
    if report.failed:
        for s in report.series:
            for lv, fail in zip(s.levels, s.failures):
                if fail:
                    print(f"convdiff: eps={s.eps:g} level {lv}: {fail}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_verify(args) -> int:
    from . import checks

    results = checks.identity_suite(args.samples) + checks.residual_gate()
    if not args.quick:
        results += checks.theorem_bounds()
    for r in results:
        print(r.line())
    bad = sum(not r.ok for r in results)
    print(f"{len(results) - bad}/{len(results)} checks passed")
    return EXIT_NUMERICAL if bad else EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_env()
        if args.command == "solve":
            return _cmd_solve(args, 0, overlay=False)
        if args.command == "figure":
            if args.samples < 0:
                raise UsageError("--samples must be non-negative")
            return _cmd_solve(args, args.samples, overlay=True)
        if args.command == "converge":
            return _cmd_converge(args)
        return _cmd_verify(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"convdiff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"convdiff: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
