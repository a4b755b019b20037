"""Rigidity sets built from the tallest-mass tower of a balanced level.

At a level ``n`` pick the tower ``j0`` carrying the most mass, induce ``T``
on its base, keep the longest piece of the induced IET, and shrink it to a
centred subinterval ``J``.  With ``r`` the return time of that piece, the
floors above ``J`` form a set ``E`` that ``T^r`` moves only slightly: each
slice ``T^i J`` is sent back into the floor ``T^i I_j0``.
"""
from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .errors import ReturnTimeExceeded, VerificationFailed
from .fixedpoint import hex_string, to_fixed, to_fraction, to_mpf
from .iet_core import Iet
from .renormalization import InductionPath
from .towers import FloorPartition, TowerSystem, build_towers

DEFAULT_MAX_RETURN = 10**7


def select_big_tower(ts: TowerSystem) -> int:
    """One-based label of the tower with largest ``h_j lambda_j`` (first on ties)."""
    dens = [h * l for h, l in zip(ts.heights, ts.fixed_lengths)]
    return dens.index(max(dens)) + 1


@dataclass(frozen=True)
class InducedIet:
    """First-return map of ``T`` to ``parent``, as consecutive pieces.

    Piece ``l`` is ``[lefts[l], lefts[l] + sub_lengths[l])``; it returns after
    ``return_times[l]`` steps, translated by ``shifts[l]``.
    """

    lefts: tuple[int, ...]
    sub_lengths_fixed: tuple[int, ...]
    return_times: tuple[int, ...]
    shifts: tuple[int, ...]
    parent_interval: tuple[int, int]
    precision_bits: int

    @property
    def sub_lengths(self) -> list[mpmath.mpf]:
        return [to_mpf(x, self.precision_bits) for x in self.sub_lengths_fixed]

    def __len__(self):
        return len(self.lefts)


def _split_points(T: Iet, x: int, w: int) -> list[int]:
    """Interior discontinuities of ``T`` inside ``(x, x + w)``."""
    s = T.starts
    return list(s[bisect_right(s, x): bisect_left(s, x + w)])


def induce_fixed(T: Iet, a: int, b: int, max_return: int = DEFAULT_MAX_RETURN) -> InducedIet:
    if not 0 <= a < b <= T.total:
        raise ValueError("need a nondegenerate interval inside [0, 1)")
    starts, shifts = T.starts, T.shifts
    # active: (origin_left, width, current_left)
    active = [(a, b - a, a)]
    done = []  # (origin_left, width, time, shift)
    t = 0
    while active:
        t += 1
        if t > max_return:
            raise ReturnTimeExceeded(f"some point of [{a}, {b}) needs more than {max_return} steps")
        nxt = []
        for o, w, x in active:
            cuts = [x] + _split_points(T, x, w) + [x + w]
            for c0, c1 in zip(cuts, cuts[1:]):
                so = o + (c0 - x)
                y = c0 + shifts[bisect_right(starts, c0) - 1]
                ww = c1 - c0
                # split the image at the ends of [a, b)
                pts = [y] + [p for p in (a, b) if y < p < y + ww] + [y + ww]
                for q0, q1 in zip(pts, pts[1:]):
                    oo = so + (q0 - y)
                    if a <= q0 < b:
                        done.append((oo, q1 - q0, t, q0 - oo))
                    else:
                        nxt.append((oo, q1 - q0, q0))
        active = nxt
    done.sort()
    merged = []
    for o, w, tt, sh in done:
        if merged and merged[-1][2] == tt and merged[-1][3] == sh and merged[-1][0] + merged[-1][1] == o:
            m = merged[-1]
            merged[-1] = (m[0], m[1] + w, tt, sh)
        else:
            merged.append((o, w, tt, sh))
    return InducedIet(
        tuple(m[0] for m in merged),
        tuple(m[1] for m in merged),
        tuple(m[2] for m in merged),
        tuple(m[3] for m in merged),
        (a, b),
        T.precision_bits,
    )


def induce_on_interval(T: Iet, J, max_return: int = DEFAULT_MAX_RETURN) -> InducedIet:
    p = T.precision_bits
    return induce_fixed(T, to_fixed(J[0], p), to_fixed(J[1], p), max_return)


def select_big_subinterval(ind: InducedIet) -> int:
    """Zero-based index of the longest piece (first on ties)."""
    lens = list(ind.sub_lengths_fixed)
    return lens.index(max(lens))


@dataclass(frozen=True)
class RigiditySet:
    n_k: int
    j0: int  # one-based tower label
    l0: int  # zero-based piece index
    Jk: tuple[int, int]
    r_k: int
    height: int
    beta: Fraction
    d: int
    precision_bits: int
    base: tuple[int, int]

    @property
    def width(self) -> int:
        return self.Jk[1] - self.Jk[0]

    @property
    def measure(self) -> mpmath.mpf:
        return to_mpf(self.height * self.width, self.precision_bits)

    @property
    def measure_fraction(self) -> Fraction:
        return Fraction(self.height * self.width, 1 << self.precision_bits)

    @property
    def alpha(self) -> Fraction:
        """Guaranteed lower bound ``beta / (d (d + 2))`` on the measure."""
        return self.beta / (self.d * (self.d + 2))


def build_rigidity_set(path: InductionPath, n_k: int, beta=Fraction(1, 2),
                       max_return: int = DEFAULT_MAX_RETURN) -> RigiditySet:
    beta = to_fraction(beta)
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    ts = build_towers(path, n_k)
    j0 = select_big_tower(ts)
    a = ts.base_left[j0 - 1]
    b = a + ts.fixed_lengths[j0 - 1]
    ind = induce_fixed(path.initial, a, b, max_return)
    l0 = select_big_subinterval(ind)
    c, lam = ind.lefts[l0], ind.sub_lengths_fixed[l0]
    w = round(beta * lam)
    left = c + (lam - w) // 2
    return RigiditySet(
        n_k, j0, l0, (left, left + w), ind.return_times[l0], ts.heights[j0 - 1],
        beta, path.d, path.precision_bits, (a, b),
    )


@dataclass
class RigidityReport:
    n_k: int
    j0: int
    l0: int
    Jk: tuple[int, int]
    r_k: int
    measure: Fraction
    alpha: Fraction
    precision_bits: int
    checks: dict = field(default_factory=dict)
    detail: str = ""

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> str:
        p = self.precision_bits
        return json.dumps(
            {
                "n_k": self.n_k,
                "j0": self.j0,
                "l0": self.l0,
                "Jk": [hex_string(self.Jk[0], p), hex_string(self.Jk[1], p)],
                "r_k": self.r_k,
                "measure": float(self.measure),
                "checks": {k: bool(v) for k, v in self.checks.items()},
            }
        )


def _translate_interval(T: Iet, x: int, w: int) -> int | None:
    """Image of [x, x + w) if ``T`` is a translation on it, else None."""
    if x < 0 or x + w > T.total or _split_points(T, x, w):
        return None
    return T.map_fixed(x)


def verify_rigidity(T: Iet, rs: RigiditySet, partition: FloorPartition | None = None,
                    raise_on_failure: bool = True) -> RigidityReport:
    """Check the measure bound, the return of each slice into its floor, and
    disjointness of ``T^i J`` for ``0 <= i < r``."""
    x0, w = rs.Jk[0], rs.width
    a, b = rs.base
    lam = b - a
    details = []

    check_i = rs.measure_fraction >= rs.alpha
    if not check_i:
        details.append(f"measure {float(rs.measure_fraction)} below {float(rs.alpha)}")

    # orbit of J for r steps; every step must be a translation
    lefts = [x0]
    x = x0
    continuous = True
    for _ in range(rs.r_k):
        y = _translate_interval(T, x, w)
        if y is None:
            continuous = False
            break
        x = y
        lefts.append(x)
    image = x if continuous else None
    if not continuous:
        details.append(f"T^i J is cut by a discontinuity at i = {len(lefts) - 1}")

    # floors of the big tower
    if partition is not None and partition.towers.n == rs.n_k:
        floors = partition.lefts[rs.j0 - 1]
    else:
        floors = T.orbit_fixed(a, rs.height)
    check_ii = continuous
    if continuous:
        y = image
        for i, f in enumerate(floors):
            if not (f <= y and y + w <= f + lam):
                check_ii = False
                details.append(f"T^r T^{i} J leaves its floor")
                break
            if i + 1 < len(floors):
                nxt = _translate_interval(T, y, w)
                if nxt is None:
                    check_ii = False
                    details.append(f"T^r T^{i} J is cut by a discontinuity")
                    break
                y = nxt

    check_disjoint = continuous
    if continuous:
        srt = sorted(lefts[: rs.r_k])
        for u, v in zip(srt, srt[1:]):
            if v < u + w:
                check_disjoint = False
                details.append("two slices T^i J overlap")
                break

    report = RigidityReport(
        rs.n_k, rs.j0, rs.l0, rs.Jk, rs.r_k, rs.measure_fraction, rs.alpha, rs.precision_bits,
        {"i": check_i, "ii": check_ii, "disjoint": check_disjoint}, "; ".join(details),
    )
    if raise_on_failure and not report.ok:
        raise VerificationFailed(report.detail, report=report)
    return report
