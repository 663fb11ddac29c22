from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windrouter import (
    InterferenceMatrix,
    InvariantError,
    Position,
    WakeParams,
    WindBin,
    WindRose,
    build_interference_matrix,
    expected_turbine_output_mw,
    pairwise_interference,
    power_output,
    wake_deficit,
)

from helpers import PLAIN_TURBINE, toy_instance

P = lambda x, y: Position(id=0, x_m=x, y_m=y, build_cost_keur=1.0)


def test_power_curve_anchors():
    assert power_output(PLAIN_TURBINE.cut_in_ms, PLAIN_TURBINE) == 0.0
    assert power_output(PLAIN_TURBINE.rated_speed_ms, PLAIN_TURBINE) == 15.0
    assert power_output(0.0, PLAIN_TURBINE) == 0.0
    assert power_output(25.0, PLAIN_TURBINE) == 0.0
    assert power_output(24.999, PLAIN_TURBINE) == 15.0
    assert power_output(10.0, PLAIN_TURBINE) == pytest.approx(12.57, abs=0.01)


def test_power_curve_continuous_inside_operating_band():
    eps = 1e-7
    for v in (PLAIN_TURBINE.cut_in_ms, PLAIN_TURBINE.rated_speed_ms):
        lo = power_output(v - eps, PLAIN_TURBINE) if v - eps >= 0 else 0.0
        hi = power_output(v + eps, PLAIN_TURBINE)
        if v == PLAIN_TURBINE.cut_in_ms:
            assert hi == pytest.approx(0.0, abs=1e-4)
        else:
            assert lo == pytest.approx(hi, abs=1e-4)


def test_deficit_anchor_value():
    # directly downwind of a north wind, 1200 m away
    up, down = P(0.0, 1200.0), P(0.0, 0.0)
    delta = wake_deficit(up, down, 0.0, WakeParams(decay_k=0.05), PLAIN_TURBINE)
    assert delta == pytest.approx(0.5528 * (2.0 / 3.0) ** 2, abs=1e-4)


def test_deficit_zero_upwind_and_outside_cone():
    up, down = P(0.0, 0.0), P(0.0, 1200.0)
    assert wake_deficit(up, down, 0.0, WakeParams(), PLAIN_TURBINE) == 0.0  # upwind
    side = P(5000.0, -1200.0)
    assert wake_deficit(up, side, 0.0, WakeParams(), PLAIN_TURBINE) == 0.0  # far crosswind
    abreast = P(100.0, 0.0)
    assert wake_deficit(up, abreast, 0.0, WakeParams(), PLAIN_TURBINE) == 0.0  # x == 0


@settings(max_examples=200, deadline=None)
@given(
    x1=st.floats(min_value=1.0, max_value=20_000.0),
    x2=st.floats(min_value=1.0, max_value=20_000.0),
)
def test_deficit_monotone_along_cone_axis(x1, x2):
    up = P(0.0, 0.0)
    a = wake_deficit(up, P(0.0, -x1), 0.0, WakeParams(), PLAIN_TURBINE)
    b = wake_deficit(up, P(0.0, -x2), 0.0, WakeParams(), PLAIN_TURBINE)
    if x1 <= x2:
        assert a >= b - 1e-15
    else:
        assert b >= a - 1e-15


def test_pairwise_single_bin_matches_power_difference():
    rose = WindRose((WindBin(0.0, 8.0, 1.0),))  # wind from the north
    up, down = P(0.0, 1200.0), P(0.0, 0.0)
    delta = wake_deficit(up, down, 0.0, WakeParams(), PLAIN_TURBINE)
    loss = pairwise_interference(up, down, rose, WakeParams(), PLAIN_TURBINE)
    expected = power_output(8.0, PLAIN_TURBINE) - power_output(8.0 * (1 - delta), PLAIN_TURBINE)
    assert loss == pytest.approx(expected, abs=1e-12)
    assert loss > 0.0


def test_pairwise_zero_when_never_in_wake():
    rose = WindRose((WindBin(90.0, 8.0, 1.0),))  # wind from the east
    up, down = P(0.0, 1200.0), P(0.0, 0.0)  # offset is north-south
    assert pairwise_interference(up, down, rose, WakeParams(), PLAIN_TURBINE) == 0.0


def test_pairwise_asymmetric_under_one_bin_rose():
    rose = WindRose((WindBin(0.0, 8.0, 1.0),))
    a, b = P(0.0, 1200.0), P(0.0, 0.0)
    ab = pairwise_interference(a, b, rose, WakeParams(), PLAIN_TURBINE)
    ba = pairwise_interference(b, a, rose, WakeParams(), PLAIN_TURBINE)
    assert ab > 0.0 and ba == 0.0


def test_pairwise_bounded_by_free_production():
    rose = WindRose((WindBin(0.0, 8.0, 0.5), WindBin(180.0, 9.0, 0.5)))
    free = expected_turbine_output_mw(rose, PLAIN_TURBINE)
    a, b = P(0.0, 600.0), P(0.0, 0.0)
    assert pairwise_interference(a, b, rose, WakeParams(), PLAIN_TURBINE) <= free


def test_matrix_symmetric_rose_symmetric_entries():
    rose = WindRose((WindBin(0.0, 8.0, 0.5), WindBin(180.0, 8.0, 0.5)))
    instance = replace(toy_instance(coords=[(0.0, 0.0), (0.0, 1500.0)]), interference=None, wind_rose=rose)
    matrix = build_interference_matrix(instance, WakeParams())
    assert matrix.values[0, 1] == pytest.approx(matrix.values[1, 0], abs=1e-12)
    assert matrix.values[0, 1] > 0.0


def test_matrix_single_position_and_far_apart():
    single = toy_instance(coords=[(0.0, 0.0)]).with_interference(None)
    m1 = build_interference_matrix(single)
    assert m1.values.shape == (1, 1) and m1.values[0, 0] == 0.0
    far = toy_instance(coords=[(0.0, 0.0), (500_000.0, 0.0)]).with_interference(None)
    m2 = build_interference_matrix(far)
    assert np.all(m2.values == 0.0)


def test_matrix_matches_scalar_entries():
    instance = toy_instance(
        coords=[(0.0, 0.0), (400.0, 1500.0), (-800.0, 2500.0)]
    ).with_interference(None)
    matrix = build_interference_matrix(instance, WakeParams())
    for i, a in enumerate(instance.positions):
        for j, b in enumerate(instance.positions):
            if i == j:
                continue
            scalar = pairwise_interference(a, b, instance.wind_rose, WakeParams(), instance.turbine)
            assert matrix.values[i, j] == pytest.approx(scalar, abs=1e-12)


def test_matrix_frame_invariance():
    rose = WindRose(
        (
            WindBin(10.0, 8.0, 0.3),
            WindBin(130.0, 9.0, 0.45),
            WindBin(290.0, 7.5, 0.25),
        )
    )
    coords = [(0.0, 0.0), (900.0, 400.0), (-300.0, 1700.0), (2200.0, -500.0)]
    base = replace(toy_instance(coords=coords), interference=None, wind_rose=rose)
    m0 = build_interference_matrix(base, WakeParams())

    phi = math.radians(73.0)
    rotated = [
        (x * math.cos(phi) - y * math.sin(phi), x * math.sin(phi) + y * math.cos(phi))
        for x, y in coords
    ]
    rose_rot = WindRose(
        tuple(
            WindBin((b.direction_deg - math.degrees(phi)) % 360.0, b.speed_ms, b.probability)
            for b in rose.bins
        )
    )
    inst_rot = replace(toy_instance(coords=rotated), interference=None, wind_rose=rose_rot)
    m1 = build_interference_matrix(inst_rot, WakeParams())
    assert np.allclose(m0.values, m1.values, atol=1e-9)


def test_matrix_validation():
    with pytest.raises(InvariantError):
        InterferenceMatrix(np.array([[0.0, -0.1], [0.0, 0.0]]))
    with pytest.raises(InvariantError):
        InterferenceMatrix(np.array([[0.5, 0.0], [0.0, 0.0]]))
    with pytest.raises(InvariantError):
        InterferenceMatrix(np.array([[0.0, np.inf], [0.0, 0.0]]))
    with pytest.raises(InvariantError):
        WakeParams(decay_k=1.5)
