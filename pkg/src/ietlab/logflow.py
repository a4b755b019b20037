"""Roof functions with logarithmic singularities and the special flow under them.

A roof is

    f(x) = c * ( sum_i C+_i |ln {x - z+_i}| + sum_i C-_i |ln {z-_i - x}| + g(x) )

with ``{.}`` the fractional part, ``g`` a nonnegative trigonometric polynomial
and ``c`` chosen so that the integral of ``f`` over [0, 1) is 1.  Each log
term integrates to 1, so ``c = 1 / (sum C + g_0)``.

Distances to singularities are formed exactly in fixed point before any
floating-point work, so a point is rejected (SingularHit) only when it is
genuinely within the tolerance of a singularity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .errors import RegionOutsideXf, SingularHit
from .fixedpoint import to_fixed, to_fraction, to_mpf, tolerance_bits
from .iet_core import Iet
from .renormalization import InductionPath
from .towers import build_towers

TWO_PI = 2 * math.pi
MAX_FLOW_STEPS = 10**7


@dataclass(frozen=True)
class SmoothPart:
    """``g(x) = const + sum_k cos[k-1] cos(2 pi k x) + sin[k-1] sin(2 pi k x)``."""

    const: Fraction = Fraction(0)
    cos: tuple[Fraction, ...] = ()
    sin: tuple[Fraction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "const", to_fraction(self.const))
        object.__setattr__(self, "cos", tuple(to_fraction(c) for c in self.cos))
        object.__setattr__(self, "sin", tuple(to_fraction(c) for c in self.sin))
        if self.const < sum(abs(c) for c in self.cos + self.sin):
            raise ValueError("smooth part must be nonnegative: need const >= sum |coefficients|")

    @property
    def is_zero(self) -> bool:
        return self.const == 0 and not any(self.cos) and not any(self.sin)

    def sup(self) -> float:
        return float(self.const + sum(abs(c) for c in self.cos + self.sin))

    def value_mp(self, x):
        out = mpmath.mpf(self.const.numerator) / self.const.denominator
        for k, (a, b) in enumerate(self._pairs(), start=1):
            th = 2 * mpmath.pi * k * x
            out += a * mpmath.cos(th) + b * mpmath.sin(th)
        return out

    def derivative_mp(self, x):
        out = mpmath.mpf(0)
        for k, (a, b) in enumerate(self._pairs(), start=1):
            th = 2 * mpmath.pi * k * x
            out += 2 * mpmath.pi * k * (b * mpmath.cos(th) - a * mpmath.sin(th))
        return out

    def value_np(self, x: np.ndarray) -> np.ndarray:
        out = np.full_like(x, float(self.const))
        for k, (a, b) in enumerate(self._pairs(), start=1):
            th = TWO_PI * k * x
            out += float(a) * np.cos(th) + float(b) * np.sin(th)
        return out

    def derivative_np(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        for k, (a, b) in enumerate(self._pairs(), start=1):
            th = TWO_PI * k * x
            out += TWO_PI * k * (float(b) * np.cos(th) - float(a) * np.sin(th))
        return out

    def _pairs(self):
        n = max(len(self.cos), len(self.sin))
        cos = self.cos + (Fraction(0),) * (n - len(self.cos))
        sin = self.sin + (Fraction(0),) * (n - len(self.sin))
        return [(mpmath.mpf(a.numerator) / a.denominator, mpmath.mpf(b.numerator) / b.denominator)
                for a, b in zip(cos, sin)]


@dataclass(frozen=True)
class RoofSpec:
    """Right singularities blow up from the right of ``z``, left ones from the left."""

    right_sings: tuple[tuple[Fraction, Fraction], ...]
    left_sings: tuple[tuple[Fraction, Fraction], ...]
    smooth_part: SmoothPart = field(default_factory=SmoothPart)

    def __post_init__(self):
        right = tuple((to_fraction(z), to_fraction(c)) for z, c in self.right_sings)
        left = tuple((to_fraction(z), to_fraction(c)) for z, c in self.left_sings)
        object.__setattr__(self, "right_sings", right)
        object.__setattr__(self, "left_sings", left)
        for name, sings, lo, hi in (("right", right, 0, 1), ("left", left, 0, 1)):
            zs = [z for z, _ in sings]
            if len(set(zs)) != len(zs):
                raise ValueError(f"{name} singularity positions must be distinct")
            for z, c in sings:
                if c <= 0:
                    raise ValueError("singularity constants must be positive")
                if name == "right" and not 0 <= z < 1:
                    raise ValueError("right singularities must lie in [0, 1)")
                if name == "left" and not 0 < z <= 1:
                    raise ValueError("left singularities must lie in (0, 1]")

    @property
    def total_right(self) -> Fraction:
        return sum((c for _, c in self.right_sings), Fraction(0))

    @property
    def total_left(self) -> Fraction:
        return sum((c for _, c in self.left_sings), Fraction(0))

    @property
    def symmetric(self) -> bool:
        return self.total_right == self.total_left


@dataclass(frozen=True)
class Roof:
    spec: RoofSpec
    precision_bits: int = 256

    @property
    def normalization(self) -> Fraction:
        return 1 / (self.spec.total_right + self.spec.total_left + self.spec.smooth_part.const)

    @property
    def symmetric(self) -> bool:
        return self.spec.symmetric

    @property
    def tau(self) -> int:
        p = self.precision_bits
        return 1 << (p - tolerance_bits(p))

    def right_fixed(self) -> list[int]:
        return [to_fixed(z, self.precision_bits) for z, _ in self.spec.right_sings]

    def left_fixed(self) -> list[int]:
        return [to_fixed(z, self.precision_bits) for z, _ in self.spec.left_sings]

    def right_constants(self) -> np.ndarray:
        return np.array([float(c) for _, c in self.spec.right_sings])

    def left_constants(self) -> np.ndarray:
        return np.array([float(c) for _, c in self.spec.left_sings])

    def distances_fixed(self, xf: int, index: int | None = None) -> tuple[list[int], list[int]]:
        """Exact ``{x - z+}`` and ``{z- - x}`` in fixed point."""
        one = 1 << self.precision_bits
        tau = self.tau
        dr = [(xf - z) % one for z in self.right_fixed()]
        dl = [(z - xf) % one for z in self.left_fixed()]
        if any(v <= tau for v in dr + dl):
            raise SingularHit(f"point within tolerance of a singularity (iterate {index})", index=index)
        return dr, dl


def symmetric_pair(C=1, precision_bits: int = 256) -> Roof:
    """``C (|ln x| + |ln(1 - x)|)``, normalized."""
    return Roof(RoofSpec(((0, C),), ((1, C),)), precision_bits)


def asymmetric_pair(c_right=2, c_left=1, precision_bits: int = 256) -> Roof:
    return Roof(RoofSpec(((0, c_right),), ((1, c_left),)), precision_bits)


def hamiltonian_quadruples(s: int, constants: Sequence | None = None, T: Iet | None = None,
                           precision_bits: int | None = None) -> Roof:
    """``s`` right and ``s`` left singularities whose constants come in
    quadruples: pair ``m`` sets right ``2m, 2m+1`` and left ``2m, 2m+1`` equal.

    With ``T`` the singularities sit at discontinuities: right ones at the
    first ``s`` points of ``0, b_1, ...``, left ones at the last ``s`` points of
    ``..., b_{d-1}, 1``.  Without ``T`` they are spread evenly.
    """
    if s < 2 or s % 2:
        raise ValueError("s must be an even integer >= 2")
    q = s // 2
    constants = [Fraction(1)] * q if constants is None else [to_fraction(c) for c in constants]
    if len(constants) != q:
        raise ValueError(f"need {q} constants, one per quadruple")
    if T is not None:
        if s > T.d:
            raise ValueError(f"s = {s} exceeds the number of intervals {T.d}")
        p = T.precision_bits
        pts = [Fraction(x, 1 << p) for x in T.starts] + [Fraction(1)]
        rpos, lpos = pts[:s], pts[-s:]
        precision_bits = p if precision_bits is None else precision_bits
    else:
        rpos = [Fraction(i, s) for i in range(s)]
        lpos = [Fraction(i + 1, s) for i in range(s)]
    cs = [constants[i // 2] for i in range(s)]
    spec = RoofSpec(tuple(zip(rpos, cs)), tuple(zip(lpos, cs)))
    return Roof(spec, precision_bits or 256)


# -- pointwise evaluation ----------------------------------------------------

def _value_from_distances(roof: Roof, xf: int, dr, dl, derivative: bool):
    p = roof.precision_bits
    with mpmath.workprec(p):
        x = to_mpf(xf, p)
        total = mpmath.mpf(0)
        for (_, c), v in zip(roof.spec.right_sings, dr):
            cm = mpmath.mpf(c.numerator) / c.denominator
            t = to_mpf(v, p)
            total += -cm / t if derivative else -cm * mpmath.log(t)
        for (_, c), v in zip(roof.spec.left_sings, dl):
            cm = mpmath.mpf(c.numerator) / c.denominator
            t = to_mpf(v, p)
            total += cm / t if derivative else -cm * mpmath.log(t)
        g = roof.spec.smooth_part
        if not g.is_zero:
            total += g.derivative_mp(x) if derivative else g.value_mp(x)
        return total


def _norm_mp(roof: Roof):
    c = roof.normalization
    return mpmath.mpf(c.numerator) / c.denominator


def eval_roof(roof: Roof, x, normalized: bool = True) -> mpmath.mpf:
    xf = to_fixed(x, roof.precision_bits) % (1 << roof.precision_bits)
    dr, dl = roof.distances_fixed(xf)
    v = _value_from_distances(roof, xf, dr, dl, False)
    with mpmath.workprec(roof.precision_bits):
        return v * _norm_mp(roof) if normalized else v


def eval_roof_derivative(roof: Roof, x, normalized: bool = True) -> mpmath.mpf:
    xf = to_fixed(x, roof.precision_bits) % (1 << roof.precision_bits)
    dr, dl = roof.distances_fixed(xf)
    v = _value_from_distances(roof, xf, dr, dl, True)
    with mpmath.workprec(roof.precision_bits):
        return v * _norm_mp(roof) if normalized else v


def _fixed_value(roof: Roof, xf: int, derivative: bool = False, index=None):
    dr, dl = roof.distances_fixed(xf, index)
    with mpmath.workprec(roof.precision_bits):
        return _value_from_distances(roof, xf, dr, dl, derivative) * _norm_mp(roof)


# -- bulk evaluation in float64 ----------------------------------------------

def _dist_arrays(roof: Roof, orbit: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    p = roof.precision_bits
    one = 1 << p
    tau = roof.tau
    shift = max(p - 62, 0)
    scale = 2.0 ** -(p - shift)

    def conv(pos, sign):
        out = np.empty((len(pos), len(orbit)))
        for r, z in enumerate(pos):
            vals = [((o - z) * sign) % one for o in orbit]
            bad = next((k for k, v in enumerate(vals) if v <= tau), None)
            if bad is not None:
                raise SingularHit(f"iterate {bad} within tolerance of a singularity", index=bad)
            out[r] = np.array([v >> shift for v in vals], dtype=np.float64) * scale
        return out

    return conv(roof.right_fixed(), 1), conv(roof.left_fixed(), -1)


def roof_values(roof: Roof, dr: np.ndarray, dl: np.ndarray, x: np.ndarray | None = None,
                derivative: bool = False) -> np.ndarray:
    """Normalized ``f`` (or ``f'``) from distance arrays of shape (s, N)."""
    cr, cl = roof.right_constants(), roof.left_constants()
    if derivative:
        out = -(cr[:, None] / dr).sum(axis=0) + (cl[:, None] / dl).sum(axis=0)
    else:
        out = -(cr[:, None] * np.log(dr)).sum(axis=0) - (cl[:, None] * np.log(dl)).sum(axis=0)
    g = roof.spec.smooth_part
    if not g.is_zero:
        out = out + (g.derivative_np(x) if derivative else g.value_np(x))
    return out * float(roof.normalization)


def orbit_values(T: Iet, roof: Roof, x0: int, r: int, derivative: bool = False) -> np.ndarray:
    orbit = T.orbit_fixed(x0, r)
    dr, dl = _dist_arrays(roof, orbit)
    xs = np.array([o / (1 << T.precision_bits) for o in orbit]) if not roof.spec.smooth_part.is_zero else None
    return roof_values(roof, dr, dl, xs, derivative)


# -- Birkhoff sums ------------------------------------------------------------

def birkhoff_sum(T: Iet, roof: Roof, x, r: int, derivative: bool = False,
                 method: str = "float"):
    """``sum_{i<r} f(T^i x)`` (or of ``f'``).

    ``method="mp"`` evaluates every term at the working precision and
    returns an mpf; ``"float"`` uses exact distances and float64 terms.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    return _birkhoff_fixed(T, roof, to_fixed(x, T.precision_bits), r, derivative, method)


def _birkhoff_fixed(T: Iet, roof: Roof, xf: int, r: int, derivative: bool, method: str):
    if r == 0:
        return mpmath.mpf(0) if method == "mp" else 0.0
    if method == "mp":
        orbit = T.orbit_fixed(xf, r)
        with mpmath.workprec(roof.precision_bits):
            return mpmath.fsum(_fixed_value(roof, o, derivative, i) for i, o in enumerate(orbit))
    vals = orbit_values(T, roof, xf, r, derivative)
    return math.fsum(vals.tolist())


def birkhoff_sum_fixed(T: Iet, roof: Roof, xf: int, r: int, derivative: bool = False,
                       method: str = "float"):
    """As ``birkhoff_sum`` for a fixed-point starting point."""
    return _birkhoff_fixed(T, roof, xf, r, derivative, method)


def return_count(T: Iet, roof: Roof, x, t) -> int:
    """``max { r : S^r f(x) < t }``."""
    if t <= 0:
        raise ValueError("t must be positive")
    p = T.precision_bits
    xf = to_fixed(x, p)
    with mpmath.workprec(p):
        t = mpmath.mpf(t)
        s = mpmath.mpf(0)
        r = 0
        while True:
            s += _fixed_value(roof, xf, False, r)
            if s >= t:
                return r
            r += 1
            if r > MAX_FLOW_STEPS:
                raise ValueError("return count exceeds MAX_FLOW_STEPS")
            xf = T.map_fixed(xf)


# -- the special flow ----------------------------------------------------------

def flow_map(T: Iet, roof: Roof, point, t):
    """Move ``(x, y)``, ``0 <= y < f(x)``, for time ``t`` under the special flow."""
    p = T.precision_bits
    x, y = point
    xf = to_fixed(x, p)
    with mpmath.workprec(p):
        y = mpmath.mpf(y.numerator) / y.denominator if isinstance(y, Fraction) else mpmath.mpf(y)
        fx = _fixed_value(roof, xf)
        if not 0 <= y < fx:
            raise RegionOutsideXf(f"height {y} not in [0, f(x))")
        s = y + mpmath.mpf(t)
        steps = 0
        if s >= 0:
            while s >= fx:
                s -= fx
                xf = T.map_fixed(xf)
                fx = _fixed_value(roof, xf, False, steps)
                steps += 1
                if steps > MAX_FLOW_STEPS:
                    raise ValueError("flow time too long")
        else:
            while s < 0:
                xf = T.inverse_fixed(xf)
                fx = _fixed_value(roof, xf, False, -steps)
                s += fx
                steps += 1
                if steps > MAX_FLOW_STEPS:
                    raise ValueError("flow time too long")
        return to_mpf(xf, p), s


def flow_map_array(T: Iet, roof: Roof, x: np.ndarray, y: np.ndarray, t: float,
                   max_steps: int = MAX_FLOW_STEPS) -> tuple[np.ndarray, np.ndarray]:
    """float64 flow of many points forward by ``t >= 0`` (Monte-Carlo use).

    Points that come within 1e-300 of a singularity get NaN heights.
    """
    starts, shifts = T.float_tables()
    zr = np.array([float(z) for z, _ in roof.spec.right_sings])
    zl = np.array([float(z) for z, _ in roof.spec.left_sings])

    def f(xx):
        dr = np.mod(xx[None, :] - zr[:, None], 1.0)
        dl = np.mod(zl[:, None] - xx[None, :], 1.0)
        with np.errstate(divide="ignore"):
            return roof_values(roof, dr, dl, xx)

    x = x.copy()
    s = y + t
    fx = f(x)
    active = np.nonzero(s >= fx)[0]
    steps = 0
    while active.size:
        s[active] -= fx[active]
        xa = x[active]
        xa = xa + shifts[np.searchsorted(starts, xa, side="right") - 1]
        x[active] = xa
        fx[active] = f(xa)
        active = active[s[active] >= fx[active]]
        steps += 1
        if steps > max_steps:
            raise ValueError("flow time too long")
    bad = ~np.isfinite(fx)
    s[bad] = np.nan
    return x, s


# -- minimal distances and bound checks ---------------------------------------

@dataclass(frozen=True)
class MinDistances:
    x_min: tuple[mpmath.mpf, ...]
    y_min: tuple[mpmath.mpf, ...]


def _min_dist_fixed(T: Iet, roof: Roof, z0: int, r: int) -> tuple[list[int], list[int]]:
    orbit = T.orbit_fixed(z0, r)
    one = 1 << T.precision_bits
    tau = roof.tau
    xs, ys = [], []
    for z in roof.right_fixed():
        best = None
        for i, o in enumerate(orbit):
            v = o - (z % one)
            if v >= 0:
                if v <= tau:
                    raise SingularHit("orbit point on a right singularity", index=i)
                best = v if best is None else min(best, v)
        xs.append(best)
    for z in roof.left_fixed():
        best = None
        for i, o in enumerate(orbit):
            v = z - o
            if v >= 0:
                if v <= tau:
                    raise SingularHit("orbit point on a left singularity", index=i)
                best = v if best is None else min(best, v)
        ys.append(best)
    return xs, ys


def min_distances(T: Iet, roof: Roof, z0, r: int) -> MinDistances:
    """Smallest positive-part distances from the orbit segment to each
    singularity (``None`` where no orbit point lies on the relevant side)."""
    if r < 1:
        raise ValueError("r must be >= 1")
    p = T.precision_bits
    xs, ys = _min_dist_fixed(T, roof, to_fixed(z0, p), r)
    conv = lambda v: None if v is None else to_mpf(v, p)  # noqa: E731
    return MinDistances(tuple(conv(v) for v in xs), tuple(conv(v) for v in ys))


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    r: int
    singular_part: float

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs


def _bound(T: Iet, roof: Roof, z0: int, r: int, M: float) -> BoundCheck:
    if r == 0:
        return BoundCheck(0.0, 0.0, 0, 0.0)
    lhs = abs(_birkhoff_fixed(T, roof, z0, r, True, "float"))
    xs, ys = _min_dist_fixed(T, roof, z0, r)
    p = T.precision_bits
    c = float(roof.normalization)
    sing = 0.0
    for (_, C), v in zip(roof.spec.right_sings, xs):
        if v is not None:
            sing += c * float(C) / (v / (1 << p))
    for (_, C), v in zip(roof.spec.left_sings, ys):
        if v is not None:
            sing += c * float(C) / (v / (1 << p))
    return BoundCheck(lhs, M * r + sing, r, sing)


def centered_base_point(path: InductionPath, n: int, j: int) -> int:
    """Midpoint of ``I_j^(n)`` (``j`` one-based), fixed point."""
    ts = build_towers(path, n)
    return ts.base_left[j - 1] + ts.fixed_lengths[j - 1] // 2


def tower_derivative_bound_check(path: InductionPath, roof: Roof, n: int, j: int, M: float) -> BoundCheck:
    """``|S_{f'}^{h_j}(z0)| <= M h_j + sum C+/x_min + sum C-/y_min`` at the centred
    base point of tower ``j`` (one-based); constants include the normalization."""
    ts = build_towers(path, n)
    return _bound(path.initial, roof, centered_base_point(path, n, j), ts.heights[j - 1], M)


def general_sum_bound_check(path: InductionPath, roof: Roof, n: int, j: int, z0, r: int,
                            M_prime: float) -> BoundCheck:
    ts = build_towers(path, n)
    p = path.precision_bits
    zf = to_fixed(z0, p)
    a = ts.base_left[j - 1]
    if not a <= zf < a + ts.fixed_lengths[j - 1]:
        raise ValueError("z0 must lie in the base of tower j")
    if not 0 <= r <= ts.heights[j - 1]:
        raise ValueError("need 0 <= r <= h_j")
    return _bound(path.initial, roof, zf, r, M_prime)


def fit_M(checks_lhs: Sequence[float], rs: Sequence[int], sing: Sequence[float]) -> float:
    """Smallest ``M`` making every supplied bound hold."""
    return max(max((l - s) / r, 0.0) for l, r, s in zip(checks_lhs, rs, sing))


# -- decomposition along towers -------------------------------------------------

@dataclass(frozen=True)
class Segment:
    base_point: int
    tower_type: int | None  # one-based; None for a partial segment
    length: int


def decompose_along_towers(path: InductionPath, n: int, z0, r: int) -> list[Segment]:
    """Cut the orbit segment ``z0, ..., T^(r-1) z0`` at its visits to ``I^(n)``.

    Full segments run along one tower (length ``h_j``); a leading piece before
    the first visit and a trailing remainder are marked partial.
    """
    T = path.initial
    p = path.precision_bits
    x = to_fixed(z0, p)
    ts = build_towers(path, n)
    top = ts.total_length
    induced = path.iet_at(n)
    segs: list[Segment] = []
    used = 0
    if x >= top:
        lead = 0
        start = x
        while x >= top and used < r:
            x = T.map_fixed(x)
            lead += 1
            used += 1
        segs.append(Segment(start, None, lead))
    while used < r:
        j = induced.interval_index(x)
        h = ts.heights[j]
        if used + h <= r:
            segs.append(Segment(x, j + 1, h))
            used += h
            x = induced.map_fixed(x)
        else:
            segs.append(Segment(x, None, r - used))
            used = r
    return segs


# -- stretch over a rigidity set ------------------------------------------------

@dataclass(frozen=True)
class StretchReport:
    k: int
    r_k: int
    samples: int
    max_sum: float
    min_sum: float
    spread: float
    mean_sum: float
    singular_hits: int


@dataclass
class RigidityColumn:
    """Float64 data for sums along the slices ``T^i J``.

    For ``i < h + r`` every point of ``T^i J`` is ``T^i a + u`` with ``u`` the
    offset in ``J``, so the distances to singularities are affine in ``u``.
    """

    dr: np.ndarray  # (s1, h + r)
    dl: np.ndarray  # (s2, h + r)
    x: np.ndarray  # positions, for the smooth part
    width: float
    height: int
    r: int


def rigidity_column(T: Iet, roof: Roof, rs) -> RigidityColumn:
    orbit = T.orbit_fixed(rs.Jk[0], rs.height + rs.r_k)
    p = T.precision_bits
    one = 1 << p
    shift = max(p - 62, 0)
    scale = 2.0 ** -(p - shift)
    dr = np.array([[(((o - z) % one) >> shift) for o in orbit] for z in roof.right_fixed()],
                  dtype=np.float64).reshape(len(roof.right_fixed()), -1) * scale
    dl = np.array([[(((z - o) % one) >> shift) for o in orbit] for z in roof.left_fixed()],
                  dtype=np.float64).reshape(len(roof.left_fixed()), -1) * scale
    x = np.array([(o >> shift) for o in orbit], dtype=np.float64) * scale
    return RigidityColumn(dr, dl, x, rs.width / one, rs.height, rs.r_k)


def sample_rigidity_set(rs, samples: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform points of ``E_k``: floor level and horizontal offset in ``J``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rs.n_k,)))
    levels = rng.integers(0, rs.height, size=samples)
    offsets = rng.random(samples) * (rs.width / (1 << rs.precision_bits))
    return levels, offsets


def column_sums(roof: Roof, col: RigidityColumn, levels: np.ndarray, offsets: np.ndarray,
                derivative: bool = False) -> tuple[np.ndarray, int]:
    """``S^r f`` at the sample points; NaN where a singularity is hit."""
    out = np.empty(len(levels))
    hits = 0
    r = col.r
    for k, (l, u) in enumerate(zip(levels, offsets)):
        dr = col.dr[:, l:l + r] + u
        dl = col.dl[:, l:l + r] - u
        dr = np.where(dr >= 1.0, dr - 1.0, dr)
        dl = np.where(dl < 0.0, dl + 1.0, dl)
        if (dr <= 0).any() or (dl <= 0).any():
            out[k] = np.nan
            hits += 1
            continue
        x = col.x[l:l + r] + u
        out[k] = float(np.sum(roof_values(roof, dr, dl, x, derivative)))
    return out, hits


def stretch_over_rigidity_set(T: Iet, roof: Roof, rs, samples: int, seed: int = 0,
                              k: int = 0, column: RigidityColumn | None = None) -> StretchReport:
    """Spread ``max - min`` of ``S^{r_k} f`` over points sampled uniformly in ``E_k``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    col = column or rigidity_column(T, roof, rs)
    levels, offsets = sample_rigidity_set(rs, samples, seed)
    sums, hits = column_sums(roof, col, levels, offsets)
    good = sums[np.isfinite(sums)]
    if good.size == 0:
        raise SingularHit("every sample hit a singularity")
    return StretchReport(k, rs.r_k, samples, float(good.max()), float(good.min()),
                         float(good.max() - good.min()), float(good.mean()), hits)
