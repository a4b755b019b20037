#!/usr/bin/env python3
"""Deviation decay table: worst |eps| against the gap between balanced times."""
import argparse
import sys

from ietlab.config import load_experiment_config
from ietlab.experiments import ExperimentConfig, deviation_decay_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", nargs="?")
    args = ap.parse_args(argv)
    cfg = load_experiment_config(args.config) if args.config else ExperimentConfig()
    dd = deviation_decay_experiment(cfg)
    sys.stdout.write(dd.to_csv())
    print(f"# slope {dd.slope:.4f}  R2 {dd.r2:.4f}  balanced times {dd.balanced}", file=sys.stderr)


if __name__ == "__main__":
    main()
