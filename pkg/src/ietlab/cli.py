"""``iet-lab`` command line.

Exit codes: 0 success, 2 usage or configuration error, 3 precision
exhausted, 4 verification failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from .config import ConfigError, RunManifest, load_experiment_config, sha256_file
from .errors import IetLabError, PrecisionExhausted, ReduciblePermutation, VerificationFailed
from .experiments import (
    ExperimentConfig,
    build_path,
    build_roof,
    cancellation_series,
    deviation_decay,
    nonmixing_experiment,
    stretch_sweep,
    verdict_json,
)
from .iet_core import Permutation, invariant_prefix, sample_iet, to_json
from .rigidity import build_rigidity_set, verify_rigidity
from .towers import balanced_times_csv, find_balanced_times

EXIT_OK, EXIT_USAGE, EXIT_PRECISION, EXIT_VERIFY = 0, 2, 3, 4
DEFAULT_OUT = "ietlab-out"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _cell(v):
    if not isinstance(v, str):
        return v
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def _rows_to(fmt: str, header: list[str], rows: list[list]) -> str:
    if fmt == "json":
        return json.dumps([{h: _cell(v) for h, v in zip(header, r)} for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _table_from_csv(fmt: str, text: str) -> str:
    rows = list(csv.reader(io.StringIO(text)))
    return _rows_to(fmt, rows[0], rows[1:])


class Run:
    """Collects the files written by one command and its manifest."""

    def __init__(self, command: str, config: ExperimentConfig, out_dir: Path, fmt: str, inputs=(), threads: int = 1):
        self.out = out_dir.resolve()
        self.out.mkdir(parents=True, exist_ok=True)
        self.fmt = fmt
        self.threads = threads
        hashes = {Path(p).name: sha256_file(p) for p in inputs}
        self.manifest = RunManifest(command, config.to_dict(), input_hashes=hashes, options={"format": fmt})

    def write(self, name: str, text: str) -> Path:
        path = (self.out / name).resolve()
        if self.out not in path.parents:
            raise UsageError(f"refusing to write outside {self.out}")
        path.write_text(text)
        self.manifest.add_output(self.out, path)
        return path

    def table(self, stem: str, csv_text: str) -> Path:
        return self.write(f"{stem}.{self.fmt}", _table_from_csv(self.fmt, csv_text))

    def finish(self) -> Path:
        path = self.out / f"manifest-{self.manifest.command}.json"
        path.write_text(self.manifest.to_json() + "\n")
        return path


# -- commands ---------------------------------------------------------------

def cmd_sample(args) -> int:
    perm = Permutation.parse(args.perm)
    k = invariant_prefix(perm)
    if k is not None:
        raise ReduciblePermutation(f"permutation {perm} is reducible: it preserves the prefix {{1..{k}}}")
    print(to_json(sample_iet(perm, args.seed, args.precision)))
    return EXIT_OK


def _induct(run: Run, cfg: ExperimentConfig):
    path = build_path(cfg)
    run.write("path.jsonl", path.to_jsonl())
    if path.stopped_by is PrecisionExhausted:
        raise PrecisionExhausted(f"{path.stop_reason}; rerun with a larger --precision")
    return path


def _towers(run: Run, cfg: ExperimentConfig, path):
    times = find_balanced_times(path, cfg.nu)
    run.table("balanced_times", balanced_times_csv(path, times))
    if len(times) >= 8:
        run.table("deviation", deviation_decay(path, cfg.nu).to_csv())


def _rigidity(run: Run, cfg: ExperimentConfig, path):
    T = path.initial
    reports, failed = [], None
    for n in find_balanced_times(path, cfg.nu)[:6]:
        rs = build_rigidity_set(path, n, Fraction(cfg.beta), max_return=cfg.r_max * 100)
        rep = verify_rigidity(T, rs, raise_on_failure=False)
        reports.append(json.loads(rep.to_json()))
        if not rep.ok and failed is None:
            failed = rep
    run.write("rigidity.json", json.dumps(reports, indent=2) + "\n")
    if failed is not None:
        raise VerificationFailed(failed.detail, report=failed)


def _flow(run: Run, cfg: ExperimentConfig, path):
    T = path.initial
    roof = build_roof(cfg, T)
    reps = stretch_sweep(cfg, {"roof": roof})["roof"]
    rows = [[s.k, s.r_k, s.samples, repr(s.max_sum), repr(s.min_sum), repr(s.spread), repr(s.mean_sum),
             s.singular_hits] for s in reps]
    run.write(f"stretch.{run.fmt}", _rows_to(run.fmt, ["k", "r_k", "samples", "max_sum", "min_sum", "spread",
                                                       "mean_sum", "singular_hits"], rows))
    run.table("cancellation", cancellation_series(path, roof, cfg.nu, cfg.h_max, cfg.roof).to_csv())


def _correlate(run: Run, cfg: ExperimentConfig):
    series = nonmixing_experiment(cfg, threads=run.threads)
    run.table("correlation", series.to_csv())
    run.write("verdict.json", verdict_json(cfg, series) + "\n")


def _pipeline(command: str, cfg: ExperimentConfig, run: Run) -> int:
    if command == "correlate":
        _correlate(run, cfg)
        return EXIT_OK
    path = _induct(run, cfg)
    if command in ("towers", "report"):
        _towers(run, cfg, path)
    if command in ("rigidity", "report"):
        _rigidity(run, cfg, path)
    if command in ("flow", "report"):
        _flow(run, cfg, path)
    if command == "report":
        _correlate(run, cfg)
    return EXIT_OK


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get("IETLAB_OUT") or DEFAULT_OUT)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    d = cfg.to_dict()
    if args.steps is not None:
        d["depth"] = args.steps
    if args.seed is not None:
        d["iet_seed"] = args.seed
    if args.perm is not None:
        d["base"], d["perm"] = "random", args.perm
    if args.preset is not None:
        d["roof"] = args.preset
    if args.precision is not None:
        d["precision_bits"] = args.precision
    return ExperimentConfig.from_dict(d)


def cmd_config(args) -> int:
    cfg = load_experiment_config(Path(args.config)) if args.config else ExperimentConfig()
    cfg = _apply_overrides(cfg, args)
    if cfg.base == "random":
        k = invariant_prefix(Permutation.parse(cfg.perm))
        if k is not None:
            raise ReduciblePermutation(f"permutation {cfg.perm} is reducible: it preserves the prefix {{1..{k}}}")
    inputs = ([args.config] if args.config else []) + ([cfg.roof] if cfg.roof.endswith(".toml") else [])
    for p in inputs:
        if not Path(p).is_file():
            raise ConfigError(f"input file not found: {p}")
    run = Run(args.command, cfg, _out_dir(args), args.format, inputs, args.threads)
    try:
        return _pipeline(args.command, cfg, run)
    finally:
        run.finish()


def cmd_replay(args) -> int:
    manifest = RunManifest.from_json(Path(args.manifest).read_text())
    cfg = manifest.experiment_config()
    fmt = manifest.options.get("format", args.format)
    run = Run(manifest.command, cfg, _out_dir(args), fmt, threads=args.threads)
    run.manifest.input_hashes = dict(manifest.input_hashes)
    try:
        return _pipeline(manifest.command, cfg, run)
    finally:
        run.finish()


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="iet-lab", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads (results do not depend on it)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="sample an IET and print it as JSON")
    s.add_argument("--perm", required=True, help='permutation images, e.g. "4 3 2 1"')
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--precision", type=int, default=256)
    s.set_defaults(func=cmd_sample)

    for name, desc in (
        ("induct", "run Zorich induction and write the path"),
        ("towers", "balanced times and deviation table"),
        ("rigidity", "build and verify rigidity sets"),
        ("flow", "stretch and cancellation tables"),
        ("correlate", "correlations at rigidity times"),
        ("report", "run every stage"),
    ):
        c = sub.add_parser(name, help=desc)
        c.add_argument("config", nargs="?", help="TOML file with an [experiment] table (defaults otherwise)")
        c.add_argument("--steps", type=int, help="number of Zorich steps")
        c.add_argument("--seed", type=int, help="seed of the sampled IET")
        c.add_argument("--perm", help="sample a random IET with this permutation instead of the config base")
        c.add_argument("--preset", choices=("symmetric", "asymmetric", "hamiltonian-quadruples"),
                       help="roof preset")
        c.add_argument("--precision", type=int, help="precision in bits")
        c.add_argument("--out", help="output directory (default $IETLAB_OUT or ./ietlab-out)")
        c.add_argument("--format", choices=("csv", "json"), default="csv")
        c.set_defaults(func=cmd_config)

    r = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out", help="output directory (default $IETLAB_OUT or ./ietlab-out)")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"iet-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PrecisionExhausted as exc:
        print(f"iet-lab: precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except VerificationFailed as exc:
        print(f"iet-lab: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ConfigError, IetLabError, ValueError) as exc:
        print(f"iet-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
