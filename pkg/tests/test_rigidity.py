import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ietlab.errors import ReturnTimeExceeded, VerificationFailed
from ietlab.iet_core import Permutation, golden_rotation, iterate_fixed, sample_iet
from ietlab.renormalization import induct
from ietlab.rigidity import (
    InducedIet,
    RigiditySet,
    build_rigidity_set,
    induce_fixed,
    induce_on_interval,
    select_big_subinterval,
    select_big_tower,
    verify_rigidity,
)
from ietlab.towers import TowerSystem, build_towers, find_balanced_times, floor_partition

P = 64


def towers_with(masses):
    one = 1 << P
    lens = [int(Fraction(m) * one) for m in masses]
    lens[-1] += one - sum(lens)
    return TowerSystem(0, (1,) * len(lens), tuple(lens), (0,) * len(lens), P)


def test_select_big_tower():
    assert select_big_tower(towers_with([Fraction(7, 10), Fraction(3, 10)])) == 1
    assert select_big_tower(towers_with([Fraction(1, 4)] * 4)) == 1
    assert select_big_tower(towers_with([Fraction(1, 5), Fraction(4, 5)])) == 2


@given(st.integers(0, 10**6), st.integers(0, 12))
@settings(max_examples=20)
def test_big_tower_has_mass_at_least_one_over_d(seed, n):
    path = induct(sample_iet(Permutation.symmetric(4), seed), 12, on_tie="stop")
    n = min(n, len(path))
    ts = build_towers(path, n)
    j0 = select_big_tower(ts)
    assert ts.density_fractions()[j0 - 1] * ts.d >= 1


def test_induce_on_whole_circle_is_t():
    T = sample_iet("4 3 2 1", 9)
    ind = induce_on_interval(T, (0, 1))
    assert ind.return_times == (1,) * 4
    assert ind.sub_lengths_fixed == T.fixed
    assert ind.shifts == T.shifts


def test_golden_induced_return_times_fibonacci(golden_path):
    T = golden_path.initial
    for n in range(3, 20):
        ts = build_towers(golden_path, n)
        a = ts.base_left[0]
        ind = induce_fixed(T, a, a + ts.fixed_lengths[0])
        lo, hi = sorted(set(ind.return_times))
        assert hi * hi - lo * hi - lo * lo in (1, -1)


@given(st.integers(0, 10**6), st.sampled_from([3, 4, 5]), st.fractions(0, Fraction(9, 10)),
       st.fractions(Fraction(1, 100), Fraction(1, 10)))
@settings(max_examples=30)
def test_kac_and_piece_count(seed, d, a, w):
    T = sample_iet(Permutation.symmetric(d), seed)
    ind = induce_on_interval(T, (a, a + w))
    # pieces tile J and the return-time towers tile the circle
    assert sum(ind.sub_lengths_fixed) == ind.parent_interval[1] - ind.parent_interval[0]
    assert all(l2 == l1 + w1 for l1, w1, l2 in zip(ind.lefts, ind.sub_lengths_fixed, ind.lefts[1:]))
    assert sum(l * t for l, t in zip(ind.sub_lengths_fixed, ind.return_times)) == 1 << T.precision_bits
    assert len(ind) <= d + 2
    assert min(ind.return_times) >= 1


def test_return_time_cap():
    with pytest.raises(ReturnTimeExceeded):
        induce_on_interval(golden_rotation(), (0, Fraction(1, 10**6)), max_return=10)


def fake_induced(lengths):
    lefts, acc = [], 0
    for x in lengths:
        lefts.append(acc)
        acc += x
    k = len(lengths)
    return InducedIet(tuple(lefts), tuple(lengths), (1,) * k, (0,) * k, (0, acc), P)


def test_select_big_subinterval():
    assert select_big_subinterval(fake_induced([5, 5])) == 0
    assert select_big_subinterval(fake_induced([7])) == 0
    assert select_big_subinterval(fake_induced([1, 9, 3])) == 1


@given(st.integers(0, 10**6), st.integers(2, 10))
@settings(max_examples=20)
def test_rigidity_set_bounds(seed, n):
    path = induct(sample_iet(Permutation.symmetric(5), seed), 12, on_tie="stop")
    n = min(n, len(path))
    ts = build_towers(path, n)
    rs = build_rigidity_set(path, n)
    d = path.d
    assert rs.measure_fraction >= Fraction(1, 2 * d * (d + 2)) or ts.density_fractions()[rs.j0 - 1] * d < 1
    assert rs.measure_fraction == Fraction(rs.height * rs.width, 1 << path.precision_bits)
    assert rs.r_k >= ts.heights[rs.j0 - 1]
    assert rs.alpha == Fraction(1, 2 * d * (d + 2))


def test_beta_one_takes_whole_piece(golden_path):
    rs = build_rigidity_set(golden_path, 8, beta=1)
    ts = build_towers(golden_path, 8)
    a = ts.base_left[rs.j0 - 1]
    ind = induce_fixed(golden_path.initial, a, a + ts.fixed_lengths[rs.j0 - 1])
    assert rs.width == ind.sub_lengths_fixed[rs.l0]
    assert verify_rigidity(golden_path.initial, rs).checks["ii"]


def test_golden_rigidity_passes(golden_path):
    T = golden_path.initial
    for n in range(2, 20):
        rs = build_rigidity_set(golden_path, n)
        rep = verify_rigidity(T, rs, floor_partition(golden_path, n))
        assert rep.ok, rep.detail


def test_wrong_return_time_fails(golden_path):
    rs = build_rigidity_set(golden_path, 10)
    bad = RigiditySet(rs.n_k, rs.j0, rs.l0, rs.Jk, rs.r_k + 1, rs.height, rs.beta, rs.d, rs.precision_bits, rs.base)
    with pytest.raises(VerificationFailed):
        verify_rigidity(golden_path.initial, bad)
    rep = verify_rigidity(golden_path.initial, bad, raise_on_failure=False)
    assert not rep.ok


def test_return_is_a_translation_on_each_slice(golden_path):
    T = golden_path.initial
    rs = build_rigidity_set(golden_path, 9)
    a, b = rs.Jk[0], rs.Jk[1] - 1
    for i in range(rs.height):
        xa, xb = iterate_fixed(T, a, i), iterate_fixed(T, b, i)
        assert iterate_fixed(T, xa, rs.r_k) - xa == iterate_fixed(T, xb, rs.r_k) - xb


def test_floor_width_shrinks_along_balanced_times():
    path = induct(sample_iet(Permutation.symmetric(5), 3), 40, on_tie="stop")
    times = find_balanced_times(path, 32)[:6]
    widths = [max(build_towers(path, n).fixed_lengths) for n in times]
    # one Zorich step can leave the widest interval untouched, so only weakly
    assert all(x >= y for x, y in zip(widths, widths[1:]))
    assert widths[-1] < widths[0]


def test_report_json_schema(golden_path):
    rep = verify_rigidity(golden_path.initial, build_rigidity_set(golden_path, 6))
    obj = json.loads(rep.to_json())
    assert set(obj) == {"n_k", "j0", "l0", "Jk", "r_k", "measure", "checks"}
    assert set(obj["checks"]) == {"i", "ii", "disjoint"}
    assert all(s.startswith("0x") for s in obj["Jk"])
