"""Rohlin towers over the induced IETs of an induction path.

At level ``n`` the inducing interval is ``I^(n) = [0, |lambda^(n)|)`` and the
base of tower ``j`` is the subinterval ``I_j^(n)``.  Its floors
``T^l I_j^(n)``, ``0 <= l < h_j^(n)``, are translates of the base and together
the floors of all towers tile [0, 1).
"""
from __future__ import annotations

import csv
import io
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath

from .errors import (
    FloorCountExceeded,
    IndexOutOfRange,
    PrecisionExhausted,
    SingularHit,
)
from .fixedpoint import to_fixed, to_float, to_mpf
from .iet_core import Iet
from .renormalization import (
    CocycleMatrix,
    InductionPath,
    cocycle_product,
    heights_at,
    lengths_at_fixed,
)

DEFAULT_FLOOR_CAP = 10**6


@dataclass(frozen=True)
class TowerSystem:
    n: int
    heights: tuple[int, ...]
    fixed_lengths: tuple[int, ...]
    base_left: tuple[int, ...]
    precision_bits: int

    @property
    def d(self) -> int:
        return len(self.heights)

    @property
    def sub_lengths(self) -> list[mpmath.mpf]:
        return [to_mpf(x, self.precision_bits) for x in self.fixed_lengths]

    @property
    def base_left_endpoints(self) -> list[mpmath.mpf]:
        return [to_mpf(x, self.precision_bits) for x in self.base_left]

    @property
    def total_length(self) -> int:
        return sum(self.fixed_lengths)

    def density_fractions(self) -> list[Fraction]:
        scale = 1 << self.precision_bits
        return [Fraction(h * l, scale) for h, l in zip(self.heights, self.fixed_lengths)]

    @property
    def densities(self) -> list[mpmath.mpf]:
        return [to_mpf(h * l, self.precision_bits) for h, l in zip(self.heights, self.fixed_lengths)]

    def floor_count(self) -> int:
        return sum(self.heights)


def build_towers(path: InductionPath, n: int) -> TowerSystem:
    lam = lengths_at_fixed(path, n)
    h = heights_at(path, n)
    starts, acc = [], 0
    for x in lam:
        starts.append(acc)
        acc += x
    return TowerSystem(n, tuple(h), tuple(lam), tuple(starts), path.precision_bits)


@dataclass(frozen=True)
class Floor:
    tower_type: int
    level: int
    left: int
    right: int
    precision_bits: int

    @property
    def interval(self) -> tuple[mpmath.mpf, mpmath.mpf]:
        return to_mpf(self.left, self.precision_bits), to_mpf(self.right, self.precision_bits)


@dataclass
class FloorPartition:
    """Floors of every tower at one level.

    ``lefts[j][l]`` is the left endpoint of floor ``l`` of tower ``j``;
    ``sorted_lefts[j]`` the same endpoints in increasing order.
    """

    towers: TowerSystem
    lefts: list[list[int]]
    sorted_lefts: list[list[int]] = field(init=False)

    def __post_init__(self):
        self.sorted_lefts = [sorted(col) for col in self.lefts]

    @property
    def precision_bits(self) -> int:
        return self.towers.precision_bits

    @property
    def width(self) -> tuple[int, ...]:
        return self.towers.fixed_lengths

    def __len__(self):
        return sum(len(c) for c in self.lefts)

    @property
    def floors(self) -> list[Floor]:
        out = []
        for j, col in enumerate(self.lefts):
            w = self.width[j]
            for l, x in enumerate(col):
                out.append(Floor(j, l, x, x + w, self.precision_bits))
        return out

    def mesh(self) -> mpmath.mpf:
        return to_mpf(max(self.width), self.precision_bits)

    def count_contained(self, j: int, a: int, b: int) -> int:
        """Number of floors of zero-based type ``j`` inside the fixed-point interval [a, b)."""
        hi = b - self.width[j]
        if hi < a:
            return 0
        col = self.sorted_lefts[j]
        return bisect_right(col, hi) - bisect_left(col, a)

    def locate(self, x: int) -> tuple[int, int]:
        """(type, level) of the floor containing fixed point ``x``."""
        for j, col in enumerate(self.sorted_lefts):
            k = bisect_right(col, x) - 1
            if k >= 0 and x < col[k] + self.width[j]:
                return j, self.lefts[j].index(col[k])
        raise PrecisionExhausted(f"point {x} is in no floor")


def floor_partition(path: InductionPath, n: int, cap: int = DEFAULT_FLOOR_CAP) -> FloorPartition:
    ts = build_towers(path, n)
    if ts.floor_count() > cap:
        raise FloorCountExceeded(f"{ts.floor_count()} floors exceed the cap {cap}")
    T = path.initial
    lefts = [T.orbit_fixed(s, h) for s, h in zip(ts.base_left, ts.heights)]
    return FloorPartition(ts, lefts)


# -- visit counts -------------------------------------------------------------

def visit_counts(path: InductionPath, m: int, n: int, mode: str = "cocycle",
                 cap: int = DEFAULT_FLOOR_CAP) -> CocycleMatrix:
    """``N_ij`` = number of floors of tower ``j`` at level ``n`` inside ``I_i^(m)``.

    ``mode="cocycle"`` reads it off ``Z^(m,n)``; ``mode="brute"`` counts floors.
    """
    if m > n:
        raise IndexOutOfRange(f"m = {m} > n = {n}")
    if mode == "cocycle":
        return cocycle_product(path, m, n)
    if mode != "brute":
        raise ValueError(f"unknown mode {mode!r}")
    return brute_visit_counts(floor_partition(path, n, cap), build_towers(path, m))


def brute_visit_counts(part: FloorPartition, coarse: TowerSystem) -> CocycleMatrix:
    d = coarse.d
    rows = []
    for i in range(d):
        a = coarse.base_left[i]
        b = a + coarse.fixed_lengths[i]
        rows.append([part.count_contained(j, a, b) for j in range(d)])
    return CocycleMatrix.of(rows)


# -- balanced times -----------------------------------------------------------

def _ratio_ok(values: Sequence[int], nu) -> bool:
    return max(values) <= nu * min(values)


def find_balanced_times(path: InductionPath, nu) -> list[int]:
    """Times where lengths and heights are each within a factor ``nu``."""
    nu = Fraction(nu)
    if nu < 1:
        raise ValueError("nu must be >= 1")
    out = []
    for n in range(len(path) + 1):
        lam = path.iet_at(n).fixed
        if _ratio_ok(lam, nu) and _ratio_ok(heights_at(path, n), nu):
            out.append(n)
    return out


def balanced_comparisons_hold(ts: TowerSystem, nu) -> bool:
    """``lam/(d nu) <= lam_j`` and ``1/(nu lam) <= h_j <= nu/lam``."""
    nu = Fraction(nu)
    scale = 1 << ts.precision_bits
    lam = Fraction(ts.total_length, scale)
    d = ts.d
    for h, l in zip(ts.heights, ts.fixed_lengths):
        lj = Fraction(l, scale)
        if lj * d * nu < lam or h * nu * lam < 1 or h * lam > nu:
            return False
    return True


@dataclass(frozen=True)
class AccelerationBlocks:
    """Balanced times ``b_0 < b_1 < ...`` with ``B_k = Z^(b_k, b_{k+1}) > 0``."""

    times: tuple[int, ...]
    blocks: tuple[CocycleMatrix, ...]


def acceleration_blocks(path: InductionPath, nu, allowed: Sequence[int] | None = None) -> AccelerationBlocks:
    bal = find_balanced_times(path, nu)
    if allowed is not None:
        keep = set(allowed)
        bal = [t for t in bal if t in keep]
    if not bal:
        return AccelerationBlocks((), ())
    times = [bal[0]]
    blocks = []
    cur = cocycle_product(path, bal[0], bal[0])
    last = bal[0]
    for t in bal[1:]:
        cur = cur @ cocycle_product(path, last, t)
        last = t
        if cur.is_positive():
            times.append(t)
            blocks.append(cur)
            cur = CocycleMatrix.identity(path.d)
    return AccelerationBlocks(tuple(times), tuple(blocks))


def theta(blocks, k: int, k_prime: int, gamma) -> float:
    """``sum_{n=0}^{k-k'} ||B_{k'+n-1}|| / d^(gamma n)`` with ``B_{-1} = B_0``."""
    if isinstance(blocks, AccelerationBlocks):
        blocks = blocks.blocks
    if k_prime > k or k_prime < 0:
        raise IndexOutOfRange(f"need 0 <= k' <= k, got k'={k_prime}, k={k}")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if not blocks:
        raise IndexOutOfRange("no blocks")
    d = blocks[0].d
    total = 0.0
    for n in range(k - k_prime + 1):
        idx = max(k_prime + n - 1, 0)
        if idx >= len(blocks):
            raise IndexOutOfRange(f"block {idx} not available ({len(blocks)} blocks)")
        total += blocks[idx].norm() / d ** (gamma * n)
    return total


# -- intervals ----------------------------------------------------------------

def _fixed_interval(I, p: int) -> list[tuple[int, int]]:
    """Reduce an interval mod 1 to at most two fixed-point pieces."""
    a, b = to_fixed(I[0], p), to_fixed(I[1], p)
    one = 1 << p
    if b <= a:
        return []
    if b - a >= one:
        return [(0, one)]
    a0 = a % one
    b0 = a0 + (b - a)
    if b0 <= one:
        return [(a0, b0)]
    return [(a0, one), (0, b0 - one)]


def count_in_interval(partition: FloorPartition, j: int, I) -> int:
    """Floors of tower ``j`` (one-based) contained in ``I``, read modulo 1."""
    if not 1 <= j <= len(partition.lefts):
        raise IndexOutOfRange(f"tower {j} not in 1..{len(partition.lefts)}")
    pieces = _fixed_interval(I, partition.precision_bits)
    if pieces == [(0, 1 << partition.precision_bits)]:
        return len(partition.lefts[j - 1])
    return sum(partition.count_contained(j - 1, a, b) for a, b in pieces)


def k_of_interval(path: InductionPath, I, blocks: AccelerationBlocks,
                  cap: int = DEFAULT_FLOOR_CAP) -> int:
    """Least ``k`` such that a floor of the level-``b_k`` partition lies inside ``I``."""
    p = path.precision_bits
    pieces = _fixed_interval(I, p)
    if not pieces or max(b - a for a, b in pieces) <= 1 << (p - p // 2):
        raise PrecisionExhausted("interval shorter than the tolerance")
    for k, t in enumerate(blocks.times):
        try:
            part = floor_partition(path, t, cap)
        except FloorCountExceeded:
            break
        for j in range(path.d):
            if any(part.count_contained(j, a, b) for a, b in pieces):
                return k
    raise PrecisionExhausted("no level of the path resolves the interval")


# -- deviations ---------------------------------------------------------------

@dataclass(frozen=True)
class DeviationReport:
    m: int
    n: int
    counts: CocycleMatrix
    predicted: tuple[tuple[float, ...], ...]
    epsilon: tuple[tuple[float, ...], ...]
    theta: float | None
    gamma_fit: float | None

    def max_abs_epsilon(self) -> float:
        return max(abs(e) for row in self.epsilon for e in row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "n", "i", "j", "N", "predicted", "epsilon"])
        for i, row in enumerate(self.epsilon):
            for j, e in enumerate(row):
                w.writerow([self.m, self.n, i + 1, j + 1, self.counts[i, j],
                            repr(self.predicted[i][j]), repr(e)])
        return buf.getvalue()


def deviation_report(path: InductionPath, m: int, n: int,
                     blocks: AccelerationBlocks | None = None, gamma: float = 0.5) -> DeviationReport:
    """``N_ij = delta_j^(n) (lam_i^(m) / lam_j^(n)) (1 + eps_ij)``, solved for eps.

    Lengths are absolute (not renormalized), so the prediction is
    ``h_j^(n) lam_i^(m)``.
    """
    if not m < n:
        raise IndexOutOfRange(f"need m < n, got m={m}, n={n}")
    N = cocycle_product(path, m, n)
    lam_m = lengths_at_fixed(path, m)
    lam_n = lengths_at_fixed(path, n)
    h = heights_at(path, n)
    scale = 1 << path.precision_bits
    pred, eps = [], []
    gfit = 0.0
    for i in range(path.d):
        prow, erow = [], []
        for j in range(path.d):
            p_ij = Fraction(h[j] * lam_m[i], scale)
            e = Fraction(N[i, j]) / p_ij - 1
            prow.append(float(p_ij))
            erow.append(float(e))
            R = lam_m[i] / lam_n[j]
            if e != 0 and R > 1:
                gfit = max(gfit, 1 + math.log(abs(float(e))) / math.log(R))
        pred.append(tuple(prow))
        eps.append(tuple(erow))
    gfit = min(max(gfit, 1e-9), 1 - 1e-9)
    th = None
    if blocks is not None and m in blocks.times and n in blocks.times:
        km, kn = blocks.times.index(m), blocks.times.index(n)
        try:
            th = theta(blocks, kn, km, gamma)
        except IndexOutOfRange:
            th = None
    return DeviationReport(m, n, N, tuple(pred), tuple(eps), th, gfit)


def balanced_times_csv(path: InductionPath, times: Sequence[int]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "length_ratio", "height_ratio", "lambda_norm"])
    for n in times:
        lam = path.iet_at(n).fixed
        h = heights_at(path, n)
        w.writerow([n, repr(max(lam) / min(lam)), repr(max(h) / min(h)),
                    repr(to_float(sum(lam), path.precision_bits))])
    return buf.getvalue()


# -- ordered distances to singularities ---------------------------------------

@dataclass(frozen=True)
class OrderedDistances:
    x: tuple[tuple[mpmath.mpf, ...], ...]
    y: tuple[tuple[mpmath.mpf, ...], ...]


def ordered_singularity_distances(T: Iet, roof_spec, z0, r: int) -> OrderedDistances:
    """Sorted distances ``(T^j z0 - z_i^+) mod 1`` and ``(z_i^- - T^j z0) mod 1``
    over ``0 <= j < r``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    p = T.precision_bits
    one = 1 << p
    tau = T.tau
    orbit = T.orbit_fixed(to_fixed(z0, p), r)

    def side(positions, sign):
        out = []
        for idx, z in enumerate(positions):
            zf = to_fixed(z, p)
            ds = sorted(((o - zf) * sign) % one for o in orbit)
            if ds[0] <= tau or ds[-1] >= one - tau:
                raise SingularHit(f"orbit point within tolerance of singularity {z}", index=idx)
            out.append(tuple(to_mpf(v, p) for v in ds))
        return tuple(out)

    return OrderedDistances(
        side([z for z, _ in roof_spec.right_sings], 1),
        side([z for z, _ in roof_spec.left_sings], -1),
    )
