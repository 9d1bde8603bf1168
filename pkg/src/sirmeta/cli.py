"""Command-line entry point.

Subcommands `analyze`, `simulate` and `compare` run an experiment spec from
a JSON config file (forcing the respective mode); `figure <name>` runs one
of the built-in experiment recipes.  Exit codes: 0 full success, 1 config
error, 2 partial sweep failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import SirmetaError
from .harness import FIGURES, ExperimentSpec, figure_recipe, run_experiment


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="root seed override")
    p.add_argument("--out", type=str, default=None, help="output file path")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--threads", type=int, default=1,
                   help="parallel workers for simulation realizations")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sirmeta")
    sub = ap.add_subparsers(dest="command", required=True)
    for mode in ("analyze", "simulate", "compare"):
        p = sub.add_parser(mode, help=f"run a config in {mode} mode")
        p.add_argument("--config", required=True, help="JSON experiment spec")
        _add_common(p)
    p = sub.add_parser("figure", help="run a built-in experiment recipe")
    p.add_argument("name", choices=FIGURES)
    p.add_argument("--config", default=None, help="optional overriding spec")
    _add_common(p)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figure":
            spec = figure_recipe(args.name)
            if args.config:
                spec = ExperimentSpec.from_file(args.config)
        else:
            spec = ExperimentSpec.from_file(args.config)
            spec.mode = args.command
        if args.seed is not None:
            spec.seed = args.seed
        if args.out is not None:
            spec.output_path = args.out
        if args.format is not None:
            spec.output_format = args.format
        spec.validate()
    except (SirmetaError, OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    summary = run_experiment(spec, threads=args.threads)
    for key, rep in summary.reports.items():
        print(f"{key}: ks={rep['ks_distance']:.4f} mae={rep['mean_abs_err']:.4f}")
    for key, err in summary.errors.items():
        print(f"{key}: FAILED {err}", file=sys.stderr)
    print(f"wrote {spec.output_path} (config {summary.digest[:12]})")
    return summary.exit_code


if __name__ == "__main__":
    sys.exit(main())
