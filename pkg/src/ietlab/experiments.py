"""Experiment drivers: correlations at rigidity times, deviation decay,
orbit-spacing fits, stretch sweeps and derivative cancellation."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import FloorCountExceeded, RegionOutsideXf, ReturnTimeExceeded, SingularHit
from .fixedpoint import to_fixed, to_float
from .iet_core import Iet, Permutation, golden_rotation, sample_iet
from .logflow import (
    Roof,
    asymmetric_pair,
    column_sums,
    flow_map_array,
    hamiltonian_quadruples,
    rigidity_column,
    sample_rigidity_set,
    stretch_over_rigidity_set,
    symmetric_pair,
    tower_derivative_bound_check,
)
from .renormalization import InductionPath, induct
from .rigidity import RigiditySet, build_rigidity_set, select_big_tower
from .towers import build_towers, deviation_report, find_balanced_times, ordered_singularity_distances

NON_MIXING = "NON_MIXING_SIGNATURE"
NO_SIGNATURE = "NO_SIGNATURE"


@dataclass
class ExperimentConfig:
    base: str = "golden"  # "golden" or "random"
    perm: str = "5 4 3 2 1"
    iet_seed: int = 0
    seed: int = 0
    samples: int = 1000
    corr_samples: int = 100_000
    precision_bits: int = 256
    nu: float = 16.0
    beta: str = "1/2"
    depth: int = 60
    roof: str = "symmetric"  # preset name or path to a roof TOML file
    quadruples: int = 2
    r_max: int = 100_000
    corr_r_max: int = 10_000
    h_max: int = 100_000
    margin: float = 0.1
    rect: tuple[float, float, float, float] = (0.25, 0.75, 0.0, 0.6)
    top_k: int = 3
    generic_factor: float = 1.37
    time_grid: str = "rigidity"  # "rigidity" or "uniform"

    def __post_init__(self):
        if self.base not in ("golden", "random"):
            raise ValueError("base must be 'golden' or 'random'")
        for name in ("samples", "corr_samples", "precision_bits", "depth", "r_max", "corr_r_max", "h_max", "top_k"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.nu < 1:
            raise ValueError("nu must be >= 1")
        b = Fraction(self.beta)
        if not 0 < b <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.time_grid not in ("rigidity", "uniform"):
            raise ValueError("time_grid must be 'rigidity' or 'uniform'")
        self.rect = tuple(float(v) for v in self.rect)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["rect"] = list(self.rect)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        d = dict(d)
        for f in dataclasses.fields(cls):
            if f.name not in d:
                continue
            v, want = d[f.name], _FIELD_TYPES.get(f.name, str)
            if want is float and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            if want is tuple:
                if not isinstance(v, (list, tuple)) or len(v) != 4:
                    raise ValueError(f"field {f.name!r}: expected four numbers")
                v = tuple(v)
            elif not isinstance(v, want) or isinstance(v, bool):
                raise ValueError(f"field {f.name!r}: expected {want.__name__}, got {type(v).__name__} {v!r}")
            d[f.name] = v
        return cls(**d)


_FIELD_TYPES = {
    "iet_seed": int, "seed": int, "samples": int, "corr_samples": int, "precision_bits": int,
    "depth": int, "quadruples": int, "r_max": int, "corr_r_max": int, "h_max": int, "top_k": int,
    "nu": float, "margin": float, "generic_factor": float, "rect": tuple,
}


def build_base(config: ExperimentConfig) -> Iet:
    if config.base == "golden":
        return golden_rotation(config.precision_bits)
    return sample_iet(Permutation.parse(config.perm), config.iet_seed, config.precision_bits)


def build_roof(config: ExperimentConfig, T: Iet | None = None) -> Roof:
    p = config.precision_bits
    name = config.roof
    if name == "symmetric":
        return symmetric_pair(precision_bits=p)
    if name == "asymmetric":
        return asymmetric_pair(precision_bits=p)
    if name == "hamiltonian-quadruples":
        return hamiltonian_quadruples(config.quadruples, T=T, precision_bits=p)
    from .config import load_roof_toml

    return load_roof_toml(Path(name), precision_bits=p)


def build_path(config: ExperimentConfig, T: Iet | None = None) -> InductionPath:
    T = T or build_base(config)
    return induct(T, config.depth, on_tie="stop")


# -- rigidity sequence ------------------------------------------------------------

def rigidity_sequence(path: InductionPath, nu, beta, r_max: int) -> list[RigiditySet]:
    """Rigidity sets at the balanced times with return time at most ``r_max``.

    Consecutive balanced times often produce the same set; repeats are dropped.
    """
    out: list[RigiditySet] = []
    seen = set()
    for n in find_balanced_times(path, nu):
        ts = build_towers(path, n)
        if min(ts.heights) > r_max:
            break
        try:
            rs = build_rigidity_set(path, n, beta, max_return=r_max)
        except ReturnTimeExceeded:
            continue
        if rs.r_k > r_max:
            continue
        key = (rs.Jk, rs.r_k)
        if key in seen:
            continue
        seen.add(key)
        out.append(rs)
    return out


def stretch_sweep(config: ExperimentConfig, roofs: dict[str, Roof] | None = None):
    """StretchReports along the rigidity sequence, one list per roof."""
    T = build_base(config)
    path = build_path(config, T)
    roofs = roofs or {"roof": build_roof(config, T)}
    seq = rigidity_sequence(path, config.nu, Fraction(config.beta), config.r_max)
    out = {name: [] for name in roofs}
    for k, rs in enumerate(seq):
        cols = {}
        for name, roof in roofs.items():
            key = (tuple(z for z, _ in roof.spec.right_sings),
                   tuple(z for z, _ in roof.spec.left_sings))
            if key not in cols:
                cols[key] = rigidity_column(T, roof, rs)
            out[name].append(stretch_over_rigidity_set(T, roof, rs, config.samples, config.seed, k=k,
                                                       column=cols[key]))
    return out


# -- correlations -------------------------------------------------------------------

@dataclass(frozen=True)
class Rectangle:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def measure(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return (x >= self.x0) & (x < self.x1) & (y >= self.y0) & (y < self.y1)


def _roof_min_on(roof: Roof, a: float, b: float) -> float:
    from .logflow import roof_values

    xs = np.linspace(a, b, 2001)
    zr = np.array([float(z) for z, _ in roof.spec.right_sings])
    zl = np.array([float(z) for z, _ in roof.spec.left_sings])
    dr = np.mod(xs[None, :] - zr[:, None], 1.0)
    dl = np.mod(zl[:, None] - xs[None, :], 1.0)
    with np.errstate(divide="ignore"):
        return float(np.min(roof_values(roof, dr, dl, xs)))


def check_rectangle(roof: Roof, R: Rectangle):
    if not (0 <= R.x0 < R.x1 <= 1 and 0 <= R.y0 < R.y1):
        raise RegionOutsideXf(f"degenerate or out-of-range rectangle {R}")
    if R.y1 > _roof_min_on(roof, R.x0, R.x1):
        raise RegionOutsideXf(f"rectangle {R} pokes above the roof")


def estimate_correlation(T: Iet, roof: Roof, A: Rectangle, B: Rectangle, t: float,
                         samples: int, seed: int, threads: int = 1) -> tuple[float, float]:
    """Monte-Carlo estimate of ``mu(phi_t A cap B)`` and its standard error.

    Points are drawn up front and split into fixed chunks, so the result does
    not depend on ``threads``.
    """
    check_rectangle(roof, A)
    check_rectangle(roof, B)
    if t < 0:
        raise ValueError("only forward times are supported")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    x = A.x0 + (A.x1 - A.x0) * rng.random(samples)
    y = A.y0 + (A.y1 - A.y0) * rng.random(samples)
    if t == 0:
        xs, ys = x, y
    else:
        chunks = np.array_split(np.arange(samples), max(1, min(threads, samples)))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ix: flow_map_array(T, roof, x[ix], y[ix], t), chunks))
        xs = np.concatenate([p[0] for p in parts])
        ys = np.concatenate([p[1] for p in parts])
    ok = np.isfinite(ys)
    frac = float(np.mean(B.contains(xs[ok], ys[ok]))) if ok.any() else 0.0
    n = int(ok.sum())
    mu = A.measure
    stderr = mu * math.sqrt(frac * (1 - frac) / max(n, 1))
    return mu * frac, stderr


@dataclass
class CorrelationSeries:
    times: list[float]
    estimates: list[float]
    stderr: list[float]
    kinds: list[str]
    r_k: list[int]
    muA: float
    muB: float
    verdict: str = NO_SIGNATURE
    threshold: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "estimate", "stderr", "muA", "muB", "kind"])
        for t, e, s, k in zip(self.times, self.estimates, self.stderr, self.kinds):
            w.writerow([repr(t), repr(e), repr(s), repr(self.muA), repr(self.muB), k])
        return buf.getvalue()


def nonmixing_experiment(config: ExperimentConfig, threads: int = 1) -> CorrelationSeries:
    """Correlations ``mu(phi_{t_k} A cap A)`` at flow rigidity times.

    ``t_k`` is the mean of ``S^{r_k} f`` over sampled points of ``E_k``.  The
    verdict is NON_MIXING_SIGNATURE when the estimate at each of the
    ``top_k`` largest feasible ``k`` is at least ``mu(A)^2 + margin mu(A)``.
    """
    T = build_base(config)
    roof = build_roof(config, T)
    path = build_path(config, T)
    A = Rectangle(*config.rect)
    check_rectangle(roof, A)
    seq = rigidity_sequence(path, config.nu, Fraction(config.beta), config.corr_r_max)
    chosen = seq[-config.top_k:]
    times, est, err, kinds, rks = [], [], [], [], []
    threshold = A.measure ** 2 + config.margin * A.measure
    rigid_vals = []
    for i, rs in enumerate(chosen):
        col = rigidity_column(T, roof, rs)
        levels, offsets = sample_rigidity_set(rs, config.samples, config.seed)
        sums, _ = column_sums(roof, col, levels, offsets)
        t_k = float(np.nanmean(sums))
        grid = [("rigidity", t_k)]
        if config.generic_factor and i == len(chosen) - 1:
            grid.append(("generic", t_k * config.generic_factor))
        for kind, t in grid:
            e, s = estimate_correlation(T, roof, A, A, t, config.corr_samples,
                                        config.seed + 1 + i, threads)
            times.append(t)
            est.append(e)
            err.append(s)
            kinds.append(kind)
            rks.append(rs.r_k)
            if kind == "rigidity":
                rigid_vals.append(e)
    verdict = NON_MIXING if len(rigid_vals) == config.top_k and all(v >= threshold for v in rigid_vals) else NO_SIGNATURE
    return CorrelationSeries(times, est, err, kinds, rks, A.measure, A.measure, verdict, threshold)


# -- deviation decay --------------------------------------------------------------------

@dataclass
class DeviationDecay:
    table: list[tuple[int, float]]
    slope: float
    intercept: float
    r2: float
    balanced: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gap", "max_eps"])
        for g, e in self.table:
            w.writerow([g, repr(e)])
        return buf.getvalue()


def linear_fit(xs, ys) -> tuple[float, float, float]:
    """Least squares ``y = a x + b``; returns (a, b, R^2)."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    A = np.vstack([xs, np.ones_like(xs)]).T
    (a, b), *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = ys - (a * xs + b)
    ss = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return float(a), float(b), r2


def deviation_decay(path: InductionPath, nu, max_times: int | None = None) -> DeviationDecay:
    """Worst ``max |eps^(m,n)|`` over balanced pairs at each gap ``n - m``,
    with a log-linear fit against the gap."""
    bal = find_balanced_times(path, nu)
    if max_times is not None:
        bal = bal[:max_times]
    if len(bal) < 8:
        raise ValueError(f"need at least 8 balanced times, found {len(bal)}")
    worst: dict[int, float] = {}
    for i, m in enumerate(bal):
        for n in bal[i + 1:]:
            e = deviation_report(path, m, n).max_abs_epsilon()
            worst[n - m] = max(worst.get(n - m, 0.0), e)
    table = sorted((g, e) for g, e in worst.items() if e > 0)
    a, b, r2 = linear_fit([g for g, _ in table], [math.log(e) for _, e in table])
    return DeviationDecay(table, a, b, r2, len(bal))


def deviation_decay_experiment(config: ExperimentConfig) -> DeviationDecay:
    return deviation_decay(build_path(config), config.nu)


# -- orbit spacing --------------------------------------------------------------------------

@dataclass
class ProgressionFit:
    level: int
    side: str
    index: int
    slope: float
    predicted: float
    relative_error: float
    residual_low: float
    residual_high: float


def progression_experiment(config: ExperimentConfig, sing_index: int = 0, level: int | None = None,
                           side: str = "right") -> ProgressionFit:
    """Fit the ``j``-th closest orbit distance ``x_i(j)`` against ``j``.

    The orbit is the tower of largest mass at a balanced level, started at the
    centre of its base; the predicted spacing is ``lambda_j0 / delta_j0``.
    """
    T = build_base(config)
    roof = build_roof(config, T)
    path = build_path(config, T)
    if level is None:
        bal = [n for n in find_balanced_times(path, config.nu) if max(build_towers(path, n).heights) <= config.h_max]
        level = bal[-1]
    ts = build_towers(path, level)
    j0 = select_big_tower(ts)
    lam = ts.fixed_lengths[j0 - 1]
    z0 = ts.base_left[j0 - 1] + lam // 2
    h = ts.heights[j0 - 1]
    dist = ordered_singularity_distances(T, roof.spec, Fraction(z0, 1 << T.precision_bits), h)
    xs = dist.x[sing_index] if side == "right" else dist.y[sing_index]
    js = np.arange(len(xs), dtype=float)
    vals = np.array([float(v) for v in xs])
    slope, intercept, _ = linear_fit(js, vals)
    predicted = 1.0 / h  # lambda_j0 / (h_j0 lambda_j0)
    rel = np.abs(vals - (js * predicted + vals[0])) / np.maximum(js * predicted, predicted)
    cut = max(int(math.isqrt(len(xs))), 1)
    return ProgressionFit(level, side, sing_index, slope, predicted, abs(slope - predicted) / predicted,
                          float(np.median(rel[1:cut + 1])) if cut > 1 else float(rel[0]),
                          float(np.median(rel[cut:])))


# -- cancellations -----------------------------------------------------------------------------

@dataclass
class CancellationRow:
    n: int
    h: int
    sum: float
    normalized: float
    singular_part: float


@dataclass
class CancellationSeries:
    roof: str
    symmetric: bool
    rows: list[CancellationRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "h", "sum", "normalized"])
        for r in self.rows:
            w.writerow([r.n, r.h, repr(r.sum), repr(r.normalized)])
        return buf.getvalue()


def cancellation_series(path: InductionPath, roof: Roof, nu, h_max: int, name: str = "") -> CancellationSeries:
    """Largest normalized ``|S_{f'}|`` over towers, at each balanced time.

    Sums start at the centre of each tower base and run for its height.  The
    normalization is ``h`` for a symmetric roof and ``h ln h`` otherwise.
    """
    rows = []
    for n in find_balanced_times(path, nu):
        ts = build_towers(path, n)
        if max(ts.heights) > h_max:
            break
        best = None
        for j in range(1, ts.d + 1):
            c = tower_derivative_bound_check(path, roof, n, j, 0.0)
            h = c.r
            if roof.symmetric:
                norm = c.lhs / h
            else:
                norm = c.lhs / (h * math.log(h)) if h > 1 else float("nan")
            if best is None or (not math.isnan(norm) and (math.isnan(best.normalized) or norm > best.normalized)):
                best = CancellationRow(n, h, c.lhs, norm, c.singular_part)
        rows.append(best)
    return CancellationSeries(name, roof.symmetric, rows)


@dataclass
class FrozenBound:
    M: float
    fitted_at: int
    checked: list[tuple[int, int, bool]]  # (n, j, ok)

    @property
    def ok(self) -> bool:
        return all(ok for _, _, ok in self.checked)


def frozen_bound_check(path: InductionPath, roof: Roof, times: list[int], fit_index: int = 3) -> FrozenBound:
    """Fit the smallest ``M`` at ``times[fit_index]`` (all towers), then test
    the tower bound at every later time."""
    n_fit = times[fit_index]
    ts = build_towers(path, n_fit)
    M = 0.0
    for j in range(1, ts.d + 1):
        c = tower_derivative_bound_check(path, roof, n_fit, j, 0.0)
        M = max(M, (c.lhs - c.singular_part) / c.r)
    checked = []
    for n in times[fit_index + 1:]:
        for j in range(1, path.d + 1):
            c = tower_derivative_bound_check(path, roof, n, j, M)
            checked.append((n, j, c.ok))
    return FrozenBound(M, n_fit, checked)


def cancellation_experiment(config: ExperimentConfig, contrast: str = "asymmetric") -> dict:
    T = build_base(config)
    path = build_path(config, T)
    main = build_roof(config, T)
    other = build_roof(dataclasses.replace(config, roof=contrast), T)
    return {
        config.roof: cancellation_series(path, main, config.nu, config.h_max, config.roof),
        contrast: cancellation_series(path, other, config.nu, config.h_max, contrast),
    }


def verdict_json(config: ExperimentConfig, series: CorrelationSeries) -> str:
    return json.dumps(
        {
            "verdict": series.verdict,
            "threshold": series.threshold,
            "muA": series.muA,
            "estimates": series.estimates,
            "times": series.times,
            "kinds": series.kinds,
            "r_k": series.r_k,
            "config": config.to_dict(),
        },
        indent=2,
        sort_keys=True,
    )
