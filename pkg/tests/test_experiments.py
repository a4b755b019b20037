import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ietlab.errors import RegionOutsideXf
from ietlab.experiments import (
    ExperimentConfig,
    Rectangle,
    build_roof,
    cancellation_series,
    deviation_decay,
    estimate_correlation,
    linear_fit,
    progression_experiment,
    rigidity_sequence,
)
from ietlab.fixedpoint import to_fraction
from ietlab.iet_core import iterate
from ietlab.logflow import Roof, RoofSpec, SmoothPart, eval_roof, symmetric_pair
from ietlab.towers import build_towers, find_balanced_times

SYM = symmetric_pair()
A = Rectangle(0.25, 0.75, 0.0, 0.6)


def test_config_round_trip():
    cfg = ExperimentConfig(nu=32.0, roof="asymmetric", rect=(0.2, 0.7, 0.0, 0.5))
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_config_rejects_bad_fields():
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({"nuu": 3})
    with pytest.raises((TypeError, ValueError), match="nu"):
        ExperimentConfig.from_dict({"nu": "x"})
    with pytest.raises(ValueError):
        ExperimentConfig(base="silver")


def test_linear_fit_exact():
    a, b, r2 = linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
    assert (a, b, r2) == pytest.approx((2, 1, 1))


# -- correlations -------------------------------------------------------------------------------

def test_correlation_at_time_zero(golden):
    est, err = estimate_correlation(golden, SYM, A, A, 0.0, 2000, 0)
    assert est == pytest.approx(A.measure) and err == 0
    B = Rectangle(0.8, 0.9, 0.0, 0.5)
    assert estimate_correlation(golden, SYM, A, B, 0.0, 2000, 0)[0] == 0


def test_correlation_bounded_by_measure(golden):
    est, err = estimate_correlation(golden, SYM, A, A, 55.3, 20000, 1)
    assert 0 <= est <= A.measure + 3 * err


def test_region_outside_roof(golden):
    with pytest.raises(RegionOutsideXf):
        estimate_correlation(golden, SYM, Rectangle(0.25, 0.75, 0.0, 5.0), A, 1.0, 10, 0)


def test_threads_do_not_change_estimates(golden):
    one = estimate_correlation(golden, SYM, A, A, 21.0, 5000, 7, threads=1)
    three = estimate_correlation(golden, SYM, A, A, 21.0, 5000, 7, threads=3)
    assert one == three


def test_stderr_shrinks_with_samples(golden):
    _, e1 = estimate_correlation(golden, SYM, A, A, 30.0, 10000, 2)
    _, e2 = estimate_correlation(golden, SYM, A, A, 30.0, 20000, 2)
    assert e1 / e2 == pytest.approx(math.sqrt(2), rel=0.2)


def test_flowed_points_stay_under_roof(golden):
    from ietlab.logflow import flow_map_array, roof_values

    rng = np.random.default_rng(3)
    x = rng.uniform(0.25, 0.75, 5000)
    y = rng.uniform(0.0, 0.6, 5000)
    X, Y = flow_map_array(golden, SYM, x, y, 13.0)
    dr, dl = np.mod(X, 1.0)[None, :], np.mod(1.0 - X, 1.0)[None, :]
    assert np.all((Y >= 0) & (Y < roof_values(SYM, dr, dl, X)))


# -- deviations and spacing ---------------------------------------------------------------------

def test_deviation_decay_golden(golden_path):
    dd = deviation_decay(golden_path, 16, max_times=12)
    assert dd.slope < -0.3
    early = deviation_decay(golden_path, 16, max_times=8)
    assert early.slope < -0.3


def test_deviation_needs_enough_times(golden_path):
    with pytest.raises(ValueError):
        deviation_decay(golden_path, 16, max_times=5)


def test_progression_spacing():
    fit = progression_experiment(ExperimentConfig(depth=30, h_max=2000))
    assert fit.relative_error < 0.1
    assert fit.residual_high <= fit.residual_low


def test_rigidity_sequence_is_increasing(golden_path):
    seq = rigidity_sequence(golden_path, 16, Fraction(1, 2), 10**5)
    rs = [s.r_k for s in seq]
    assert rs == sorted(rs) and len(set(rs)) == len(rs) and rs[-1] <= 10**5


# -- cancellations ---------------------------------------------------------------------------

def test_cancellation_rows(golden_path):
    series = cancellation_series(golden_path, SYM, 16, 10**4, "symmetric")
    assert series.rows and all(r.h <= 10**4 for r in series.rows)
    assert series.to_csv().splitlines()[0] == "n,h,sum,normalized"


def test_smooth_part_ergodic_average(golden_path):
    # g = 1 + cos(2 pi x)/2 + sin(2 pi x)/4 has integral 1 and |g| <= 7/4
    smooth = Roof(RoofSpec(((0, 1),), ((1, 1),), SmoothPart(Fraction(1), (Fraction(1, 2),), (Fraction(1, 4),))))
    T = golden_path.initial
    ts = build_towers(golden_path, 20)
    z = Fraction(ts.base_left[0] + ts.fixed_lengths[0] // 2, 2**256)
    h = ts.heights[0]
    total, x = 0.0, z
    for _ in range(h):
        total += float(eval_roof(smooth, x, normalized=False) - eval_roof(SYM, x, normalized=False))
        x = iterate(T, x, 1)
    assert abs(total) <= 1.75 * h
    assert total / h == pytest.approx(1.0, abs=0.01)


@given(st.sampled_from(["symmetric", "asymmetric", "hamiltonian-quadruples"]))
@settings(max_examples=3)
def test_presets_build(name):
    cfg = ExperimentConfig(roof=name, depth=10)
    roof = build_roof(cfg)
    assert roof.symmetric == (name != "asymmetric")
