#!/usr/bin/env python3
"""Drive the full figure pipeline: experiments -> per-figure CSVs.

Runs each experiment config under scripts/configs/ through the CLI and
emits the matching figure CSV.  Pass figure ids to restrict the set,
--workers to parallelize the Monte Carlo loops, and --out for the
destination root (default: runs/).

The heavy spectra (f6-f9) take tens of minutes at the default statistics;
start with f1/f2/f4 when smoke-testing.
"""

import argparse
import os
import sys

from coopscat.cli import main as coopscat_main

HERE = os.path.dirname(os.path.abspath(__file__))

PIPELINE = {
    "f1": ("fresnel", "fresnel_profile.toml"),
    "f2": ("fresnel", "fresnel_density.toml"),
    "f4": ("angular", "angular.toml"),
    "f5": ("cbs", "cbs_density.toml"),
    "f6": ("spectrum", "spectrum_density.toml"),
    "f7": ("spectrum", "spectrum_radius.toml"),
    "f8": ("spectrum", "spectrum_directional.toml"),
    "f9": ("spectrum", "spectrum_polarization.toml"),
}


def run_figure(figure: str, out_root: str, workers: int | None) -> int:
    experiment, config_name = PIPELINE[figure]
    config_path = os.path.join(HERE, "configs", config_name)
    bundle_dir = os.path.join(out_root, f"{figure}_{experiment}")
    args = [experiment, "--config", config_path, "--out", bundle_dir]
    if workers:
        args += ["--workers", str(workers)]
    print(f"== {figure}: {experiment} ({config_name})")
    code = coopscat_main(args)
    if code != 0:
        return code
    return coopscat_main(
        ["plot-data", "--figure", figure, "--bundle", bundle_dir, "--out", os.path.join(out_root, "figures")]
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("figures", nargs="*", default=[], help="subset of f1 f2 f4 ... f9")
    parser.add_argument("--out", default="runs", help="output root directory")
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()
    figures = args.figures or list(PIPELINE)
    for figure in figures:
        if figure not in PIPELINE:
            print(f"unknown figure {figure}; choose from {list(PIPELINE)}", file=sys.stderr)
            return 2
    for figure in figures:
        code = run_figure(figure, args.out, args.workers)
        if code != 0:
            print(f"figure {figure} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
