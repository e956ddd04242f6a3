"""Command line: ``hypbridge run|validate|list-experiments``.

Exit codes: 0 every check passed, 1 a tolerance check failed, 2 bad config,
3 numerical failure.  ``HYPBRIDGE_THREADS`` sets the default worker count.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import NumericalFailure
from .experiments import REGISTRY, ConfigError, ExperimentConfig, read_config, run, validate
from .rng import THREADS_ENV, default_threads

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypbridge", description="Run hyperbolic bridge and CIR experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output_dir in the config)")
    r.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    r.add_argument("--plots", action="store_true", help="also write SVG plots")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    sub.add_parser("list-experiments", help="print the registered experiments")
    return ap


def _print_rows(summary):
    for row in summary["rows"]:
        mark = {True: "PASS", False: "FAIL", None: "    "}[row["passed"]]
        val = row["value"]
        if isinstance(val, float):
            val = f"{val:.6g}"
        tgt = "" if row["target"] is None else f"  target {row['target']}"
        print(f"{mark}  {row['quantity']}: {val}{tgt}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.cmd == "list-experiments":
        for e in REGISTRY.values():
            print(f"{e.name:24s} {e.anchor}: {e.about}")
        return EXIT_PASS
    try:
        raw = read_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    diags = validate(raw)
    if args.cmd == "validate":
        for d in diags:
            print(d)
        return EXIT_CONFIG if diags else EXIT_PASS
    if diags:
        for d in diags:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        threads = args.threads if args.threads is not None else default_threads()
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    cfg = ExperimentConfig.from_dict(raw)
    try:
        bundle = run(cfg, args.out, threads, args.plots)
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, FloatingPointError, ZeroDivisionError, OverflowError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    _print_rows(bundle.summary)
    print(f"wrote {bundle.output_dir}", file=sys.stderr)
    print(json.dumps({"passed": bundle.passed}))
    return EXIT_PASS if bundle.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
