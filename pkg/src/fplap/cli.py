"""Command-line front end.

Exit codes: 0 success, 2 invalid input or failed verification, 3 solver did
not converge, 4 requested object not found, 5 output I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from fplap import pipeline
from fplap.errors import (ConvergenceError, NotFoundError, ParameterError)

_RUNNERS = {
    "solve-extremal": pipeline.run_extremal,
    "solve-nodal": pipeline.run_nodal,
    "eig": pipeline.run_eig,
    "oracle": pipeline.run_oracle,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fplap",
        description="Nonlocal Dirichlet solver: eigenpairs, extremal constant-sign "
                    "solutions, nodal solutions, and brute-force solution surveys.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, help_text in (
        ("solve-extremal", "smallest positive and biggest negative solutions"),
        ("solve-nodal", "extremal pair plus a sign-changing solution"),
        ("eig", "principal eigenpair and second-eigenvalue estimate"),
        ("oracle", "enumerate all solutions in the extremal interval (n <= 8)"),
    ):
        sp = sub.add_parser(verb, help=help_text)
        sp.add_argument("config", help="INI config file")
        sp.add_argument("--seed", type=int, default=None, help="override solver seed")
        sp.add_argument("--n", type=int, default=None, help="override node count")
        sp.add_argument("--out", default=None, help="override output directory")
        sp.add_argument("--quiet", action="store_true", help="suppress progress lines")
    spv = sub.add_parser("verify", help="recompute the claims of a finished run")
    spv.add_argument("run_dir", help="run directory containing report.json")
    spv.add_argument("--quiet", action="store_true", help="suppress per-check lines")
    return parser


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    if args.n is not None:
        prob = cfg.problem
        cfg.problem = type(prob)(p=prob.p, s=prob.s, a=prob.a, b=prob.b, n=args.n,
                                 c0=prob.c0, q=prob.q)
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _verify(args, say):
    report = pipeline.verify_run(args.run_dir)
    for line in report.checks:
        say(f"ok   {line}")
    for line in report.mismatches:
        print(f"FAIL {line}", file=sys.stderr)
    if not report.ok:
        print(f"verify: {len(report.mismatches)} mismatch(es)", file=sys.stderr)
        return 2
    say(f"verify: {len(report.checks)} checks passed")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    def say(msg):
        if not args.quiet:
            print(msg)

    try:
        if args.verb == "verify":
            return _verify(args, say)
        cfg = _apply_overrides(pipeline.load_config(args.config), args)
        report = _RUNNERS[args.verb](cfg, progress=say)
        target = pipeline.emit_outputs(report, out_dir=cfg.out_dir, progress=say)
        if report.status != "ok":
            err = report.error
            print(f"{err['type']} during {err['stage']}: {err['message']}",
                  file=sys.stderr)
            say(f"partial results in {target}")
            exc = report.exception
            if isinstance(exc, NotFoundError):
                return 4
            if isinstance(exc, ConvergenceError):
                return 3
            return 2
        say(f"done: {target}")
        return 0
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
