#!/usr/bin/env python3
"""Birkhoff-sum spread over rigidity sets, symmetric against asymmetric roof."""
import argparse
import dataclasses

from ietlab.config import load_experiment_config
from ietlab.experiments import ExperimentConfig, stretch_sweep
from ietlab.logflow import asymmetric_pair, symmetric_pair


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", nargs="?")
    ap.add_argument("--samples", type=int)
    args = ap.parse_args(argv)
    cfg = load_experiment_config(args.config) if args.config else ExperimentConfig()
    if args.samples:
        cfg = dataclasses.replace(cfg, samples=args.samples)
    reps = stretch_sweep(cfg, {"symmetric": symmetric_pair(), "asymmetric": asymmetric_pair()})
    print("k,r_k,spread_symmetric,spread_asymmetric")
    for s, a in zip(reps["symmetric"], reps["asymmetric"]):
        print(f"{s.k},{s.r_k},{s.spread:.6g},{a.spread:.6g}")


if __name__ == "__main__":
    main()
