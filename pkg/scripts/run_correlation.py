#!/usr/bin/env python3
"""Correlations at rigidity times and the non-mixing verdict."""
import argparse
import dataclasses
import os

from ietlab.config import load_experiment_config
from ietlab.experiments import ExperimentConfig, nonmixing_experiment, verdict_json


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", nargs="?")
    ap.add_argument("--samples", type=int, help="Monte-Carlo points per estimate")
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args(argv)
    cfg = load_experiment_config(args.config) if args.config else ExperimentConfig()
    if args.samples:
        cfg = dataclasses.replace(cfg, corr_samples=args.samples)
    series = nonmixing_experiment(cfg, threads=args.threads)
    print(series.to_csv(), end="")
    print(verdict_json(cfg, series))


if __name__ == "__main__":
    main()
