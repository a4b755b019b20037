"""Interval exchange transformations on [0, 1) in dyadic fixed point.

An IET ``T = (lengths, perm)`` cuts [0, 1) into ``d`` half-open intervals
``I_1, ..., I_d`` (left to right) and places interval ``j`` at position
``perm(j)`` of the image.  Lengths are stored as integer numerators over
``2**precision_bits`` that sum exactly to ``2**precision_bits``, so every
orbit point is computed without rounding.
"""
from __future__ import annotations

import json
import re
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import accumulate
from typing import Sequence

import mpmath
import numpy as np

from .errors import (
    BadPermutation,
    OutOfDomain,
    ReduciblePermutation,
    ZeroLength,
)
from .fixedpoint import (
    fixed_from_hex,
    hex_string,
    to_fixed,
    to_fraction,
    to_mpf,
    tolerance_bits,
)

DEFAULT_PRECISION = 256
MAX_ITERATE = 10**7


@dataclass(frozen=True)
class Permutation:
    """``images[j-1] = pi(j)``, one-based."""

    images: tuple[int, ...]

    def __post_init__(self):
        imgs = tuple(int(i) for i in self.images)
        object.__setattr__(self, "images", imgs)
        d = len(imgs)
        if d < 2 or sorted(imgs) != list(range(1, d + 1)):
            raise BadPermutation(f"{imgs} is not a permutation of 1..d with d >= 2")

    @classmethod
    def parse(cls, spec) -> "Permutation":
        if isinstance(spec, Permutation):
            return spec
        if isinstance(spec, str):
            tokens = re.findall(r"-?\d+", spec)
            if not tokens:
                raise BadPermutation(f"cannot parse permutation {spec!r}")
            return cls(tuple(int(t) for t in tokens))
        return cls(tuple(spec))

    @classmethod
    def identity(cls, d: int) -> "Permutation":
        return cls(tuple(range(1, d + 1)))

    @classmethod
    def symmetric(cls, d: int) -> "Permutation":
        """The reversal (d d-1 ... 1)."""
        return cls(tuple(range(d, 0, -1)))

    @property
    def d(self) -> int:
        return len(self.images)

    def __call__(self, j: int) -> int:
        return self.images[j - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * self.d
        for j, k in enumerate(self.images, start=1):
            inv[k - 1] = j
        return Permutation(tuple(inv))

    def __str__(self):
        return "(" + " ".join(map(str, self.images)) + ")"


def is_irreducible(perm: Permutation) -> bool:
    """True iff no proper prefix {1..k}, k < d, is mapped onto itself."""
    perm = Permutation.parse(perm)
    running_max = 0
    for k, img in enumerate(perm.images[:-1], start=1):
        running_max = max(running_max, img)
        if running_max == k:
            return False
    return True


def invariant_prefix(perm: Permutation) -> int | None:
    perm = Permutation.parse(perm)
    running_max = 0
    for k, img in enumerate(perm.images[:-1], start=1):
        running_max = max(running_max, img)
        if running_max == k:
            return k
    return None


@dataclass(frozen=True)
class DiscontinuitySet:
    """Sorted fixed-point points 0 = s_0 < s_1 < ... < s_d = 1."""

    points: tuple[int, ...]
    precision_bits: int

    def as_mpf(self):
        return [to_mpf(n, self.precision_bits) for n in self.points]

    @property
    def interior(self) -> tuple[int, ...]:
        return self.points[1:-1]


@dataclass(frozen=True)
class Iet:
    perm: Permutation
    fixed: tuple[int, ...]
    precision_bits: int = DEFAULT_PRECISION
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _shifts: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _img_starts: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _img_order: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fixed", tuple(int(x) for x in self.fixed))
        if len(self.fixed) != self.perm.d:
            raise BadPermutation("length vector and permutation disagree on d")
        starts = tuple([0] + list(accumulate(self.fixed))[:-1])
        inv = self.perm.inverse().images
        # image position k (0-based) is occupied by interval inv[k]
        img_pos_start = [0] * self.d
        acc = 0
        for k in range(self.d):
            img_pos_start[k] = acc
            acc += self.fixed[inv[k] - 1]
        img_starts = tuple(img_pos_start[self.perm.images[j] - 1] for j in range(self.d))
        shifts = tuple(img_starts[j] - starts[j] for j in range(self.d))
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_shifts", shifts)
        object.__setattr__(self, "_img_starts", tuple(img_pos_start))
        object.__setattr__(self, "_img_order", tuple(i - 1 for i in inv))

    # -- basic data -------------------------------------------------------
    @property
    def d(self) -> int:
        return self.perm.d

    @property
    def total(self) -> int:
        return self._starts[-1] + self.fixed[-1]

    @property
    def lengths(self) -> tuple[mpmath.mpf, ...]:
        return tuple(to_mpf(n, self.precision_bits) for n in self.fixed)

    @property
    def starts(self) -> tuple[int, ...]:
        return self._starts

    @property
    def shifts(self) -> tuple[int, ...]:
        return self._shifts

    @property
    def tau(self) -> int:
        """Comparison tolerance 2**-(p/2) in fixed-point units."""
        return 1 << (self.precision_bits - tolerance_bits(self.precision_bits))

    def discontinuities(self) -> DiscontinuitySet:
        return DiscontinuitySet(self._starts + (self.total,), self.precision_bits)

    def interval_index(self, n: int) -> int:
        """0-based index of the subinterval containing the fixed point ``n``."""
        return bisect_right(self._starts, n) - 1

    # -- exact maps on fixed-point integers -------------------------------
    def map_fixed(self, n: int) -> int:
        if not 0 <= n < self.total:
            raise OutOfDomain(f"point {n} outside [0, {self.total})")
        return n + self._shifts[bisect_right(self._starts, n) - 1]

    def inverse_fixed(self, n: int) -> int:
        if not 0 <= n < self.total:
            raise OutOfDomain(f"point {n} outside [0, {self.total})")
        k = bisect_right(self._img_starts, n) - 1
        return n - self._shifts[self._img_order[k]]

    def orbit_fixed(self, n: int, count: int) -> list[int]:
        """``[n, T n, ..., T^(count-1) n]``."""
        starts, shifts = self._starts, self._shifts
        if not 0 <= n < self.total:
            raise OutOfDomain(f"point {n} outside [0, {self.total})")
        out = [0] * count
        for i in range(count):
            out[i] = n
            n += shifts[bisect_right(starts, n) - 1]
        return out

    # -- float64 bulk evaluation (Monte-Carlo only) -----------------------
    def float_tables(self):
        scale = float(1 << self.precision_bits)
        starts = np.array([s / scale for s in self._starts])
        shifts = np.array([s / scale for s in self._shifts])
        return starts, shifts

    def evaluate_array(self, xs: np.ndarray) -> np.ndarray:
        starts, shifts = self.float_tables()
        idx = np.searchsorted(starts, xs, side="right") - 1
        return xs + shifts[idx]


def new_iet(lengths: Sequence, perm, precision_bits: int = DEFAULT_PRECISION) -> Iet:
    """Build an IET from positive lengths (renormalized to sum 1)."""
    perm = Permutation.parse(perm)
    if len(lengths) != perm.d:
        raise BadPermutation(f"{len(lengths)} lengths for a permutation of {perm.d} symbols")
    fracs = [to_fraction(x) for x in lengths]
    total = sum(fracs)
    if total <= 0:
        raise ZeroLength("lengths must have positive sum")
    scale = 1 << precision_bits
    fixed = [round(f / total * scale) for f in fracs]
    # push the rounding residue onto the largest entry so the sum is exact
    big = max(range(len(fixed)), key=lambda i: fixed[i])
    fixed[big] += scale - sum(fixed)
    tau = 1 << (precision_bits - tolerance_bits(precision_bits))
    for i, (f, n) in enumerate(zip(fracs, fixed)):
        if f <= 0 or n <= tau:
            raise ZeroLength(f"length {i + 1} is below tolerance 2^-{tolerance_bits(precision_bits)}")
    return Iet(perm, tuple(fixed), precision_bits)


def _point(T: Iet, x) -> int:
    n = to_fixed(x, T.precision_bits)
    if not 0 <= n < T.total:
        raise OutOfDomain(f"{x} is not in [0, 1)")
    return n


def evaluate(T: Iet, x) -> mpmath.mpf:
    return to_mpf(T.map_fixed(_point(T, x)), T.precision_bits)


def evaluate_inverse(T: Iet, y) -> mpmath.mpf:
    return to_mpf(T.inverse_fixed(_point(T, y)), T.precision_bits)


def iterate_fixed(T: Iet, n: int, steps: int) -> int:
    if abs(steps) > MAX_ITERATE:
        raise ValueError(f"|steps| = {abs(steps)} exceeds MAX_ITERATE = {MAX_ITERATE}")
    if steps >= 0:
        starts, shifts = T.starts, T.shifts
        if not 0 <= n < T.total:
            raise OutOfDomain(f"point {n} outside [0, {T.total})")
        for _ in range(steps):
            n += shifts[bisect_right(starts, n) - 1]
        return n
    for _ in range(-steps):
        n = T.inverse_fixed(n)
    return n


def iterate(T: Iet, x, n: int) -> mpmath.mpf:
    """``T^n(x)``; negative ``n`` iterates the inverse."""
    return to_mpf(iterate_fixed(T, _point(T, x), n), T.precision_bits)


@dataclass(frozen=True)
class KeaneReport:
    ok: bool
    depth: int
    iterate: int | None = None
    # ((discontinuity index, iterate), (discontinuity index, iterate)), 1-based indices
    pair: tuple | None = None


def check_keane(T: Iet, depth: int) -> KeaneReport:
    """Search for ``T^m(b_i)`` within tolerance of some ``b_j``, ``1 <= m <= depth``,
    over interior discontinuities ``b``.

    That is the Keane condition up to ``depth``: a near-meeting of two
    discontinuity orbits propagates back to one of these.  The collision with
    the smallest ``m`` is reported as ``((i, m), (j, 0))``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    betas = T.starts[1:]
    tau = T.tau
    best = None
    for i, b in enumerate(betas, start=1):
        for m, x in enumerate(T.orbit_fixed(b, depth + 1)[1:], start=1):
            if best is not None and m >= best[0]:
                break
            k = bisect_right(betas, x + tau) - 1
            if k >= 0 and x - betas[k] <= tau:
                best = (m, ((i, m), (k + 1, 0)))
                break
    if best is not None:
        return KeaneReport(False, depth, best[0], best[1])
    return KeaneReport(True, depth)


def _uniform_words(seed: int, coord: int, words: int) -> int:
    # raw 64-bit outputs of an independent substream; drawing more words only
    # appends bits, so lower precisions see a prefix of higher ones
    ss = np.random.SeedSequence(seed, spawn_key=(coord,))
    raw = np.random.PCG64(ss).random_raw(words)
    u = 0
    for w in raw:
        u = (u << 64) | int(w)
    return u


def sample_iet(perm, seed: int, precision_bits: int = DEFAULT_PRECISION) -> Iet:
    """Length vector uniform on the simplex, via normalized exponentials."""
    perm = Permutation.parse(perm)
    if not is_irreducible(perm):
        k = invariant_prefix(perm)
        raise ReduciblePermutation(f"{perm} is reducible: {{1..{k}}} is invariant")
    bits = precision_bits + 64
    words = -(-bits // 64)
    with mpmath.workprec(bits + 32):
        es = []
        for i in range(perm.d):
            u = _uniform_words(seed, i, words)
            # (u + 1/2) / 2^(64 w) lies strictly inside (0, 1)
            x = mpmath.mpf(2 * u + 1) / mpmath.mpf(2) ** (64 * words + 1)
            es.append(-mpmath.log(x))
        s = mpmath.fsum(es)
        lam = [to_fraction(e / s) for e in es]
    return new_iet(lam, perm, precision_bits)


def golden_rotation(precision_bits: int = DEFAULT_PRECISION) -> Iet:
    """Rotation by g = (sqrt5 - 1)/2 written as the 2-IET with lengths (1 - g, g)."""
    with mpmath.workprec(precision_bits + 64):
        g = (mpmath.sqrt(5) - 1) / 2
        return new_iet([1 - g, g], Permutation((2, 1)), precision_bits)


def rotation(alpha, precision_bits: int = DEFAULT_PRECISION) -> Iet:
    """``x -> x + alpha mod 1`` as the 2-IET with lengths (1 - alpha, alpha)."""
    a = to_fraction(alpha)
    return new_iet([1 - a, a], Permutation((2, 1)), precision_bits)


def to_json(T: Iet) -> str:
    return json.dumps(
        {
            "d": T.d,
            "perm": list(T.perm.images),
            "lengths": [hex_string(n, T.precision_bits) for n in T.fixed],
            "precision_bits": T.precision_bits,
        }
    )


def from_json(text) -> Iet:
    obj = json.loads(text) if isinstance(text, str) else text
    p = int(obj["precision_bits"])
    fixed = tuple(fixed_from_hex(s, p) for s in obj["lengths"])
    perm = Permutation(tuple(obj["perm"]))
    if len(fixed) != int(obj["d"]):
        raise BadPermutation("d does not match the number of lengths")
    if sum(fixed) != 1 << p:
        raise ZeroLength("serialized lengths do not sum to 1")
    return Iet(perm, fixed, p)
