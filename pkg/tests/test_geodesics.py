import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import random_spd
from geodesic_observer import ConstantMetric, MetricField, box, geodesic_bvp_distance, geodesic_ivp
from geodesic_observer.errors import LeftRegion
from oracles import grid_distance


def chart_metric(a=1.0):
    return MetricField(lambda x: np.array([[1.0, 0.0], [0.0, 1.0 + a * x[0] * x[0]]], dtype=object), 2)


def chart_metric_batch(X, a=1.0):
    out = np.zeros((len(X), 2, 2))
    out[:, 0, 0] = 1.0
    out[:, 1, 1] = 1.0 + a * X[:, 0] ** 2
    return out


coord = st.floats(-1.0, 1.0, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(st.tuples(coord, coord), st.tuples(coord, coord))
def test_speed_is_conserved(x0, v0):
    v0 = np.array(v0)
    geo = geodesic_ivp(chart_metric(), np.array(x0), v0, 1.0)
    assert geo.speed_drift <= 1e-6
    assert_allclose(geo.length, np.sqrt(geo.speed_sq[0]), rtol=1e-6)


def test_constant_metric_gives_straight_lines(rng):
    M = random_spd(rng, 3)
    P = ConstantMetric(M)
    x1, x2 = rng.standard_normal(3), rng.standard_normal(3)
    d, geo = geodesic_bvp_distance(P, x1, x2)
    assert_allclose(d, np.sqrt((x2 - x1) @ M @ (x2 - x1)), rtol=1e-12)
    chords = geo.points - x1
    assert_allclose(np.cross(chords, x2 - x1), 0.0, atol=1e-12)


@pytest.mark.parametrize("start,end", [((-1.0, -1.0), (1.0, 1.0)), ((0.5, -1.0), (-1.0, 1.0)),
                                       ((-1.0, 0.0), (1.0, 0.5))])
def test_distance_matches_grid_oracle(start, end):
    d, _ = geodesic_bvp_distance(chart_metric(), np.array(start), np.array(end))
    g = grid_distance(chart_metric_batch, (-2, -2), (2, 2), (161, 161), start, end, reach=8)
    assert abs(g - d) <= 1e-3 * d
    # the graph distance is an upper bound up to quadrature error
    assert g >= d * (1 - 1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_shooting_recovers_initial_velocity(seed):
    rng = np.random.default_rng(seed)
    P = chart_metric(0.5)
    x0 = rng.uniform(-0.5, 0.5, 2)
    v0 = rng.uniform(-0.5, 0.5, 2)
    end = geodesic_ivp(P, x0, v0, 1.0).points[-1]
    d, geo = geodesic_bvp_distance(P, x0, end)
    assert_allclose(geo.velocities[0], v0, rtol=1e-6, atol=1e-7)
    assert_allclose(d, np.sqrt(v0 @ P(x0) @ v0), rtol=1e-6)


def test_reversal_and_degenerate_cases():
    P = chart_metric()
    geo = geodesic_ivp(P, [0.1, 0.2], [0.3, -0.1], 1.0)
    back = geo.reversed()
    assert_allclose(back.points[0], geo.points[-1])
    assert_allclose(back.length, geo.length)
    assert geodesic_ivp(P, [0.1, 0.2], [1.0, 0.0], 0.0).length == 0.0
    assert geodesic_bvp_distance(P, [0.3, 0.3], [0.3, 0.3])[0] == 0.0
    with pytest.raises(ValueError):
        geodesic_ivp(P, [0.0, 0.0], [1.0, 0.0], 1.0, step=-0.1)


def test_leaving_region_is_reported():
    with pytest.raises(LeftRegion) as info:
        geodesic_ivp(chart_metric(), [0.0, 0.0], [3.0, 0.0], 1.0, region=box([-1, -1], [1, 1]))
    assert 0.0 < info.value.s < 1.0
