#!/usr/bin/env python3
"""Normalized |S_f'| along balanced times, plus the frozen-constant check."""
import argparse
import dataclasses

from ietlab.config import load_experiment_config
from ietlab.experiments import ExperimentConfig, build_path, build_roof, cancellation_series, frozen_bound_check


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", nargs="?")
    ap.add_argument("--contrast", default="asymmetric")
    args = ap.parse_args(argv)
    cfg = load_experiment_config(args.config) if args.config else ExperimentConfig()
    path = build_path(cfg)
    for name in (cfg.roof, args.contrast):
        roof = build_roof(dataclasses.replace(cfg, roof=name), path.initial)
        series = cancellation_series(path, roof, cfg.nu, cfg.h_max, name)
        print(f"# {name}")
        print(series.to_csv(), end="")
        times = [r.n for r in series.rows]
        if len(times) > 4:
            fb = frozen_bound_check(path, roof, times)
            held = sum(ok for *_, ok in fb.checked)
            print(f"# M = {fb.M:.4g} fitted at n = {fb.fitted_at}; holds at {held}/{len(fb.checked)} later checks")


if __name__ == "__main__":
    main()
