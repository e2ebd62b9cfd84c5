"""Command-line entry point.

    anisolap run CONFIG [--out DIR]
    anisolap properties [--seed N]
    anisolap report CSV --plot OUT.SVG [--x COL] [--y COL]

Exit codes: 0 all assertions/properties pass, 1 an assertion or property
failed (or a solve errored), 2 usage or config errors.  ANISOLAP_THREADS
controls sweep parallelism.
"""

from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, format_suite_report, property_suite, report, run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="anisolap",
                                     description="anisotropic Orlicz-Laplacian solver "
                                                 "and verification harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=".", help="output directory for CSV/SVG")

    p_prop = sub.add_parser("properties", help="run the randomized property suite")
    p_prop.add_argument("--seed", type=int, default=1234)

    p_rep = sub.add_parser("report", help="re-plot a run CSV")
    p_rep.add_argument("csv")
    p_rep.add_argument("--plot", required=True, help="output SVG path")
    p_rep.add_argument("--x", default="parameter")
    p_rep.add_argument("--y", default="bound_ratio")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        if args.command == "run":
            code, messages = run(args.config, args.out)
            for msg in messages:
                print(msg, file=sys.stderr)
            return code
        if args.command == "properties":
            results = property_suite(seed=args.seed)
            print(format_suite_report(results))
            return 0 if all(r.passed for r in results) else 1
        if args.command == "report":
            report(args.csv, args.plot, xcol=args.x, ycol=args.y)
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
