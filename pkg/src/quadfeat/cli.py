"""Command-line entry point: ``quadfeat SUBCOMMAND [flags]``.

Subcommands map one-to-one onto the experiment runners; every run writes
schema-stable CSVs plus a manifest into ``--out``. Exit codes: 0 success,
2 configuration error, 3 invariant failure, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import ConfigError, KINDS, load_config, run_experiment
from .targets import ScaleUnderflowError
from .training import DegenerateScaleError, DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_DIVERGENCE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadfeat",
        description=("Numerical laboratory for three-layer networks learning "
                     "hierarchical functions of quadratic features"),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="single master seed (overrides the seeds grid)")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel independent runs (1 = sequential)")
        p.add_argument("--resume", action="store_true",
                       help="skip runs already present in results.csv")
        p.add_argument("--print-config", action="store_true",
                       help="echo the fully resolved config and exit")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override a config key (repeatable)")
    return parser


def _parse_override(item: str):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    if isinstance(value, list):
        value = tuple(value)
    return key.strip(), value


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides: dict = {}
        for item in args.set:
            key, value = _parse_override(item)
            overrides[key] = value
        if args.out is not None:
            overrides["out"] = args.out
        if args.seed is not None:
            overrides["seeds"] = (args.seed,)
        cfg = load_config(args.config, overrides, kind=args.command)
        if args.print_config:
            print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
            return EXIT_OK
        results = run_experiment(cfg, resume=args.resume, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, DegenerateScaleError,
            ScaleUnderflowError, FloatingPointError) as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    if args.command == "verify":
        failures = [row for row in results if not row["passed"]]
        for row in results:
            status = "PASS" if row["passed"] else "FAIL"
            print(f"{status} {row['name']}: {row['detail']}")
        if failures:
            return EXIT_INVARIANT
    else:
        print(f"wrote {len(results)} rows to {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
