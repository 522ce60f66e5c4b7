"""Command-line front end.

One subcommand per experiment plus ``plot-data`` for the per-figure CSV
emitter.  Exit codes: 0 success, 1 partial (some configurations failed
but results were produced, or partial results were flushed after an
error), 2 failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from dataclasses import replace

from .config import (
    EXPERIMENTS,
    ConfigSemanticError,
    ConfigSyntaxError,
    RunConfig,
    load_config,
)
from .experiments import run_experiment, read_bundle, write_bundle
from .montecarlo import EnsembleFailure
from .plotdata import FIGURES, emit_plot_data

OUTPUT_ENV_VAR = "COOPSCAT_OUT"

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FAILURE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopscat",
        description="Coupled-dipole scattering experiments for cold atomic clouds",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for experiment in EXPERIMENTS:
        p = sub.add_parser(experiment, help=f"run the {experiment} experiment")
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--configs", type=int, default=None, help="override n_configs")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None, help="worker hint (results invariant)")
    p = sub.add_parser("plot-data", help="emit per-figure CSV from a finished run")
    p.add_argument("--figure", required=True, choices=FIGURES)
    p.add_argument("--bundle", required=True, help="directory written by a run")
    p.add_argument("--out", default=None, help="output directory (default: bundle dir)")
    return parser


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    montecarlo = config.montecarlo
    if args.seed is not None:
        montecarlo = replace(montecarlo, master_seed=args.seed)
    if args.configs is not None:
        montecarlo = replace(montecarlo, n_configs=args.configs)
    if args.workers is not None:
        montecarlo = replace(montecarlo, workers=args.workers)
    config = replace(config, montecarlo=montecarlo)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    return config


def _output_dir(config: RunConfig) -> str:
    env = os.environ.get(OUTPUT_ENV_VAR)
    if env:
        return env
    if config.output_dir:
        return config.output_dir
    return os.path.join("runs", config.experiment)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "plot-data":
        try:
            bundle = read_bundle(args.bundle)
            out_dir = args.out if args.out is not None else args.bundle
            path = emit_plot_data(bundle, args.figure, out_dir)
        except Exception as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAILURE
        print(path)
        return EXIT_OK

    try:
        config = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ConfigSyntaxError, ConfigSemanticError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if config.experiment != args.command:
        print(
            f"config error: config declares experiment={config.experiment!r} "
            f"but subcommand is {args.command!r}",
            file=sys.stderr,
        )
        return EXIT_FAILURE
    config = _apply_overrides(config, args)
    out_dir = _output_dir(config)
    try:
        bundle = run_experiment(config)
    except EnsembleFailure as exc:
        # too many failed configurations: flush a failure marker and stop
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "FAILED"), "w", encoding="utf-8") as fh:
            fh.write(f"{exc}\n")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception:
        traceback.print_exc()
        return EXIT_FAILURE
    paths = write_bundle(bundle, out_dir)
    for path in paths:
        print(path)
    failed = bundle.metadata.get("failed_configs") or {}
    if any(failed.values()):
        print("warning: some configurations failed; statistics use the rest", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
