import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ietlab.errors import RegionOutsideXf, SingularHit
from ietlab.fixedpoint import to_fixed, to_fraction, to_mpf
from ietlab.iet_core import Permutation, evaluate, golden_rotation, iterate, sample_iet
from ietlab.logflow import (
    Roof,
    RoofSpec,
    SmoothPart,
    asymmetric_pair,
    birkhoff_sum,
    decompose_along_towers,
    eval_roof,
    eval_roof_derivative,
    fit_M,
    flow_map,
    flow_map_array,
    general_sum_bound_check,
    hamiltonian_quadruples,
    min_distances,
    return_count,
    stretch_over_rigidity_set,
    symmetric_pair,
    tower_derivative_bound_check,
)
from ietlab.renormalization import induct
from ietlab.rigidity import build_rigidity_set
from ietlab.towers import build_towers, find_balanced_times

SYM = symmetric_pair()
ASYM = asymmetric_pair()
SMOOTH = Roof(RoofSpec(((0, 1),), ((1, 1),), SmoothPart(Fraction(1), (Fraction(1, 2),), (Fraction(1, 4),))))


# -- roof specs ------------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(ValueError):
        RoofSpec(((0, 1), (0, 2)), ())
    with pytest.raises(ValueError):
        RoofSpec(((0, -1),), ())
    with pytest.raises(ValueError):
        SmoothPart(Fraction(1, 2), (Fraction(1),))  # could go negative


def test_symmetric_flag():
    assert SYM.symmetric and not ASYM.symmetric


def test_hamiltonian_quadruples():
    T = sample_iet("5 4 3 2 1", 1)
    roof = hamiltonian_quadruples(4, [1, 3], T=T)
    assert roof.symmetric
    assert [c for _, c in roof.spec.right_sings] == [1, 1, 3, 3]
    with pytest.raises(ValueError):
        hamiltonian_quadruples(3)


# -- pointwise values --------------------------------------------------------------------

@mpmath.workprec(256)
def test_roof_values():
    assert abs(eval_roof(SYM, Fraction(1, 2), normalized=False) - 2 * mpmath.log(2)) < mpmath.mpf(2) ** -200
    assert eval_roof(SYM, Fraction(1, 10**6)) > eval_roof(SYM, Fraction(1, 10**3))
    assert eval_roof_derivative(SYM, Fraction(1, 2)) == 0
    assert eval_roof_derivative(SYM, Fraction(1, 10**4)) < 0


@mpmath.workprec(256)
@given(st.fractions(Fraction(1, 100), Fraction(99, 100)))
@settings(max_examples=40)
def test_derivative_matches_central_difference(x):
    for roof in (SYM, ASYM, SMOOTH):
        h = Fraction(1, 10**6)
        fd = (eval_roof(roof, x + h) - eval_roof(roof, x - h)) / (2 * to_mpf(to_fixed(h, 256), 256))
        d = eval_roof_derivative(roof, x)
        # third derivative of C ln x is 2C/x^3, at most ~2e6 here
        assert abs(fd - d) / (1 + abs(d)) <= 10 * 1e-12 * 2e6


def test_roof_integrates_to_one():
    for roof in (SYM, ASYM, SMOOTH):
        with mpmath.workprec(80):
            f = lambda x: eval_roof(roof, to_fraction(x))  # noqa: E731
            I = mpmath.quad(f, [mpmath.mpf(2) ** -60, 0.5, 1 - mpmath.mpf(2) ** -60])
        assert abs(I - 1) < 1e-6


def test_roof_positive_off_singularities():
    xs = np.linspace(1e-9, 1 - 1e-9, 1001)
    for roof in (SYM, ASYM, SMOOTH):
        assert all(eval_roof(roof, Fraction(float(x))) > 0 for x in xs[::50])


def test_singular_hit(golden):
    with pytest.raises(SingularHit):
        birkhoff_sum(golden, SYM, 0, 3)


# -- Birkhoff sums ---------------------------------------------------------------------------

def test_birkhoff_small_r(golden):
    x = Fraction(1, 7)
    assert birkhoff_sum(golden, SYM, x, 0) == 0
    with mpmath.workprec(256):
        assert abs(birkhoff_sum(golden, SYM, x, 1, method="mp") - eval_roof(SYM, x)) < mpmath.mpf(2) ** -200


@given(st.fractions(Fraction(1, 1000), Fraction(999, 1000)), st.integers(1, 200), st.integers(1, 200))
@settings(max_examples=30)
def test_birkhoff_additivity(x, m, r):
    T = golden_rotation()
    with mpmath.workprec(256):
        lhs = birkhoff_sum(T, SMOOTH, x, m + r, method="mp")
        y = iterate(T, x, r)
        rhs = birkhoff_sum(T, SMOOTH, x, r, method="mp") + birkhoff_sum(T, SMOOTH, y, m, method="mp")
        assert abs(lhs - rhs) < mpmath.mpf(2) ** -150
    assert birkhoff_sum(T, SMOOTH, x, m + r) == pytest.approx(float(lhs), rel=1e-12)


@given(st.integers(0, 10**6), st.integers(2, 60), st.integers(1, 40))
@settings(max_examples=20)
def test_variation_split_identity(seed, r, k):
    # S^r(T^k z) - S^r(z) = S^k(T^r z) - S^k(z): the telescoping behind the stretch bound
    T = sample_iet("4 3 2 1", seed)
    z = Fraction(seed % 997 + 1, 1000)
    with mpmath.workprec(256):
        lhs = birkhoff_sum(T, SYM, iterate(T, z, k), r, method="mp") - birkhoff_sum(T, SYM, z, r, method="mp")
        rhs = birkhoff_sum(T, SYM, iterate(T, z, r), k, method="mp") - birkhoff_sum(T, SYM, z, k, method="mp")
        assert abs(lhs - rhs) < mpmath.mpf(2) ** -150


def test_return_count(golden):
    x = Fraction(1, 3)
    fx = eval_roof(SYM, x)
    assert return_count(golden, SYM, x, fx / 2) == 0
    with mpmath.workprec(256):
        s5 = birkhoff_sum(golden, SYM, x, 5, method="mp")
        assert return_count(golden, SYM, x, s5 + mpmath.mpf(2) ** -100) == 5
    ts = [0.5, 1, 3, 7, 20]
    counts = [return_count(golden, SYM, x, t) for t in ts]
    assert counts == sorted(counts)


# -- flow ----------------------------------------------------------------------------------------

def test_flow_identity_and_one_step(golden):
    x = Fraction(2, 9)
    with mpmath.workprec(256):
        assert flow_map(golden, SYM, (x, Fraction(1, 10)), 0) == (to_mpf(to_fixed(x, 256), 256), mpmath.mpf(1) / 10)
        fx = eval_roof(SYM, x)
        x1, y1 = flow_map(golden, SYM, (x, 0), fx)
        assert x1 == evaluate(golden, x) and abs(y1) < mpmath.mpf(2) ** -200


def test_flow_rejects_points_above_roof(golden):
    with pytest.raises(RegionOutsideXf):
        flow_map(golden, SYM, (Fraction(1, 2), 5), 1)


@given(st.fractions(Fraction(1, 100), Fraction(99, 100)), st.floats(0, 0.9),
       st.floats(-20, 20), st.floats(-20, 20))
@settings(max_examples=40)
def test_flow_group_law(x, yfrac, s, t):
    T = golden_rotation()
    with mpmath.workprec(256):
        y = eval_roof(SYM, x) * yfrac
        a = flow_map(T, SYM, flow_map(T, SYM, (x, y), t), s)
        b = flow_map(T, SYM, (x, y), mpmath.mpf(s) + mpmath.mpf(t))
        assert a[0] == b[0]
        assert abs(a[1] - b[1]) < mpmath.mpf(2) ** -48


def test_float_flow_agrees_with_mp(golden):
    rng = np.random.default_rng(5)
    xs = rng.uniform(0.05, 0.95, 20)
    ys = np.full(20, 0.1)
    X, Y = flow_map_array(golden, SYM, xs, ys, 37.5)
    for i in range(20):
        x1, y1 = flow_map(golden, SYM, (Fraction(float(xs[i])), Fraction(0.1)), 37.5)
        assert X[i] == pytest.approx(float(x1), abs=1e-9)
        assert Y[i] == pytest.approx(float(y1), abs=1e-9)


# -- distances and bound checks --------------------------------------------------------------

def test_min_distances(golden):
    z = Fraction(3, 10)
    md = min_distances(golden, SYM, z, 1)
    with mpmath.workprec(256):
        assert abs(md.x_min[0] - mpmath.mpf(3) / 10) < mpmath.mpf(2) ** -250
    prev = None
    for r in (1, 5, 20, 100):
        cur = min_distances(golden, SYM, z, r).x_min[0]
        assert prev is None or cur <= prev
        prev = cur


def test_min_distance_at_balanced_times(golden_path):
    for n in range(3, 20):
        ts = build_towers(golden_path, n)
        for j in (1, 2):
            z = Fraction(ts.base_left[j - 1] + ts.fixed_lengths[j - 1] // 2, 2**256)
            md = min_distances(golden_path.initial, SYM, z, ts.heights[j - 1])
            lam = Fraction(ts.total_length, 2**256)
            assert to_fraction(md.x_min[0]) >= lam / 8
            assert to_fraction(md.y_min[0]) >= lam / 8


def test_tower_bound_one_M_for_all_later_times(golden_path):
    times = find_balanced_times(golden_path, 2)
    fit = [tower_derivative_bound_check(golden_path, SYM, times[5], j, 0.0) for j in (1, 2)]
    M = fit_M([c.lhs for c in fit], [c.r for c in fit], [c.singular_part for c in fit])
    for n in times[6:26]:
        for j in (1, 2):
            assert tower_derivative_bound_check(golden_path, SYM, n, j, M).ok


def test_tower_bound_single_floor(golden_path):
    c = tower_derivative_bound_check(golden_path, SYM, 0, 1, 0.0)
    assert c.r == 1
    z = Fraction(golden_path.initial.fixed[0] // 2, 2**256)
    assert c.lhs == pytest.approx(abs(float(eval_roof_derivative(SYM, z))))


def test_asymmetric_tower_sums_grow(golden_path):
    # growth is reported, not bounded: lhs / h at the big tower increases overall
    vals = []
    for n in (6, 12, 18, 24):
        ts = build_towers(golden_path, n)
        j = 1 + max(range(2), key=lambda i: ts.heights[i])
        c = tower_derivative_bound_check(golden_path, ASYM, n, j, 0.0)
        vals.append(c.lhs / c.r)
    assert vals[-1] > vals[0]


def test_general_sum_bound(golden_path):
    n, j = 10, 1
    ts = build_towers(golden_path, n)
    z0 = Fraction(ts.base_left[0] + ts.fixed_lengths[0] // 3, 2**256)
    h = ts.heights[0]
    full = general_sum_bound_check(golden_path, SYM, n, j, z0, h, 1.0)
    assert full.r == h
    assert general_sum_bound_check(golden_path, SYM, n, j, z0, 0, 1.0).lhs == 0
    T = golden_path.initial
    for r1 in (1, h // 3, h // 2):
        a = general_sum_bound_check(golden_path, SYM, n, j, z0, r1, 1.0).lhs
        b = abs(birkhoff_sum(T, SYM, iterate(T, z0, r1), h - r1, derivative=True))
        assert full.lhs <= a + b + 1e-9
    with pytest.raises(ValueError):
        general_sum_bound_check(golden_path, SYM, n, j, z0, h + 1, 1.0)


def test_decompose_single_tower(golden_path):
    ts = build_towers(golden_path, 9)
    z0 = Fraction(ts.base_left[1] + 5, 2**256)
    segs = decompose_along_towers(golden_path, 9, z0, ts.heights[1])
    assert len(segs) == 1 and segs[0].tower_type == 2 and segs[0].length == ts.heights[1]


@given(st.integers(0, 10**6))
@settings(max_examples=10)
def test_decomposition_reassembles_and_is_short(seed):
    nu = 32
    path = induct(sample_iet(Permutation.symmetric(5), seed), 25, on_tie="stop")
    bal = [n for n in find_balanced_times(path, nu) if n > 0][:4]
    T = path.initial
    d = path.d
    for n in bal:
        rs = build_rigidity_set(path, n)
        z0 = Fraction(rs.Jk[0] + rs.width // 2, 2**256)
        segs = decompose_along_towers(path, n, z0, rs.r_k)
        assert all(s.tower_type is not None for s in segs)
        assert len(segs) <= 2 * d * (d + 2) * nu**2
        total = sum(birkhoff_sum(T, SYM, Fraction(s.base_point, 2**256), s.length, derivative=True) for s in segs)
        direct = birkhoff_sum(T, SYM, z0, rs.r_k, derivative=True)
        assert total == pytest.approx(direct, rel=1e-9, abs=1e-6)


# -- stretch ------------------------------------------------------------------------------------

def test_single_sample_has_no_spread(golden_path):
    rs = build_rigidity_set(golden_path, 8)
    assert stretch_over_rigidity_set(golden_path.initial, SYM, rs, 1).spread == 0


def test_stretch_matches_direct_sums(golden_path):
    from ietlab.logflow import column_sums, rigidity_column, sample_rigidity_set

    T = golden_path.initial
    rs = build_rigidity_set(golden_path, 10)
    levels, offsets = sample_rigidity_set(rs, 5, 3)
    sums, _ = column_sums(SYM, rigidity_column(T, SYM, rs), levels, offsets)
    for l, u, s in zip(levels, offsets, sums):
        y = iterate(T, Fraction(rs.Jk[0], 2**256), int(l)) + mpmath.mpf(u)
        assert s == pytest.approx(birkhoff_sum(T, SYM, y, rs.r_k), rel=1e-9)


def test_symmetric_stretch_stays_bounded(golden_path):
    T = golden_path.initial
    sp = {k: stretch_over_rigidity_set(T, SYM, build_rigidity_set(golden_path, k), 500, seed=1).spread
          for k in (4, 8)}
    assert sp[8] <= 2 * sp[4]


def test_asymmetric_stretch_grows_like_log(golden_path):
    T = golden_path.initial
    for k in (6, 10, 14, 18):
        rs = build_rigidity_set(golden_path, k)
        rep = stretch_over_rigidity_set(T, ASYM, rs, 500, seed=1)
        assert rep.spread / math.log(rs.r_k) >= 0.1
