"""Command-line entry point.

Exit codes: 0 success, 2 invalid config, 3 objective failure (partial
artifacts are kept).
"""

import argparse
import json
from pathlib import Path
import sys

from .benchmarks import BENCHMARKS, make_benchmark
from .experiment import ConfigError, ExperimentFailure, aggregate, load_config, run_experiment, write_curve

EXIT_OK, EXIT_CONFIG, EXIT_OBJECTIVE = 0, 2, 3


def _parser():
    parser = argparse.ArgumentParser(prog="spartanbo", description="Spartan Bayesian optimisation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--seed", type=int, help="override the base seed")
    agg = sub.add_parser("aggregate", help="recompute aggregate CSVs from traces")
    agg.add_argument("directory")
    sub.add_parser("list-benchmarks", help="list registered objectives")
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    val.add_argument("--seed", type=int)
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            out = run_experiment(args.config, seed=args.seed)
            print(out)
        elif args.command == "validate":
            config = load_config(args.config, seed=args.seed)
            print(f"ok: {config.benchmark}, methods {', '.join(config.runs)}, {config.repeats} repeats")
        elif args.command == "aggregate":
            try:
                curves = aggregate(args.directory)
            except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            for label, curve in curves.items():
                path = Path(args.directory) / f"aggregate_{label}.csv"
                write_curve(path, curve)
                print(path)
        elif args.command == "list-benchmarks":
            for name in BENCHMARKS:
                print(f"{name}\td={make_benchmark(name).dim}")
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentFailure as exc:
        print(f"objective failure: {exc} (partial artifacts in {exc.output})", file=sys.stderr)
        return EXIT_OBJECTIVE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
