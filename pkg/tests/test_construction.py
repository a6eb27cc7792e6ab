import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import random_spd
from geodesic_observer import (ConstantMetric, OrthComplementMap, SmoothMap, build_product_metric,
                               lie_derivative_metric, p_mod, schur_py, tune_product_parameters)
from geodesic_observer.conditions import distributions
from geodesic_observer.construction import (a2_sufficiency_lhs, a2_sufficiency_matrices, product_feasible,
                                            product_margins, lagrangian_metric, rank_conditions)
from geodesic_observer.errors import NoFeasiblePoint, RankViolation, SingularBlock
from geodesic_observer.fields import PullbackMetric
from oracles import principal_angles


def fd_deriv(P, x, h=1e-6):
    return np.stack([(P(x + h * e) - P(x - h * e)) / (2 * h) for e in np.eye(x.size)])


def test_pmod_derivative_matches_differences(oscillator):
    P = p_mod(oscillator.metrics["observability"], ConstantMetric([[2.0]]), oscillator.model.h)
    for x in oscillator.region.sample(3, 4):
        Pm, dP = P.with_deriv(x)
        assert_allclose(Pm, P(x), rtol=1e-13)
        assert_allclose(dP, fd_deriv(P, x), rtol=1e-6, atol=1e-6)


def test_pmod_with_curved_output_metric(rng):
    theta = SmoothMap(lambda x: np.array([x[0] + x[1] ** 2, x[1], x[2] + 0.2 * x[0] * x[1]], dtype=object), 3, 3)
    P = PullbackMetric(theta, ConstantMetric(random_spd(rng, 3)))
    h = SmoothMap(lambda x: np.array([x[0] * (1 + 0.1 * x[2]), x[1] - x[2]], dtype=object), 3, 2)
    Q = PullbackMetric(SmoothMap(lambda y: np.array([y[0] + 0.3 * y[1] ** 2, y[1]], dtype=object), 2, 2),
                       ConstantMetric(random_spd(rng, 2)))
    Pm = p_mod(P, Q, h)
    x = np.array([0.3, -0.2, 0.4])
    assert_allclose(Pm.deriv(x), fd_deriv(Pm, x), rtol=1e-6, atol=1e-6)
    dh = h.jacobian(x)
    induced = np.linalg.inv(dh @ np.linalg.solve(Pm(x), dh.T))
    assert_allclose(induced, Q(h(x)), rtol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_pmod_is_idempotent_and_keeps_orthogonal_directions(oscillator, seed):
    rng = np.random.default_rng(seed)
    h, Q = oscillator.model.h, ConstantMetric([[0.5 + rng.random()]])
    P = oscillator.metrics["observability"]
    once = p_mod(P, Q, h)
    twice = p_mod(once, Q, h)
    x = oscillator.region.sample(seed, 1)[0]
    assert np.linalg.norm(twice(x) - once(x)) <= 1e-10 * np.linalg.norm(once(x))
    angles = principal_angles(distributions(P, h, x).orth_basis, distributions(once, h, x).orth_basis)
    assert np.max(angles) <= 1e-8


def test_schur_complement_block():
    P = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]])
    S = schur_py(P, 1)
    assert_allclose(S, [[4.0 - np.array([1.0, 0.0]) @ np.linalg.solve(P[1:, 1:], [1.0, 0.0])]])
    assert_allclose(schur_py(P, 3), P)
    with pytest.raises(SingularBlock):
        schur_py(np.array([[1.0, 1.0], [1.0, 0.0]]), 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 5.0), st.floats(0.5, 3.0), st.floats(-1.0, 1.0))
def test_lifted_metric_schur_identity(seed, a, b, c):
    rng = np.random.default_rng(seed)
    if c * c >= a * b:
        c = 0.5 * np.sqrt(a * b)
    g = random_spd(rng, 2)
    structure = rng.standard_normal((2, 2, 2))
    z = rng.standard_normal(2)
    P = lagrangian_metric(a, b, c, g, structure, z)
    assert_allclose(schur_py(P, 2), (a - c * c / b) * g, rtol=1e-10, atol=1e-10)


def test_product_metric_matches_closed_form(oscillator):
    from geodesic_observer.benchmarks import product_closed_form

    a, b, c = (oscillator.params[k] for k in "abc")
    P = oscillator.metrics["tuned-product"]
    for x in oscillator.region.sample(5, 20):
        assert_allclose(P(x), product_closed_form(x, a, b, c), rtol=1e-12, atol=1e-12)


def test_kernel_form_equals_lie_derivative(oscillator):
    P = oscillator.metrics["tuned-product"]
    ortho = oscillator.ortho["tuned-product"]
    model = oscillator.model
    for x in oscillator.region.sample(9, 5):
        V = distributions(P, model.h, x).tangent_basis
        Lf = lie_derivative_metric(P, model.f, x)
        S, T = a2_sufficiency_matrices(model, ortho, x, V)
        assert_allclose(S, V.T @ Lf @ V, rtol=1e-9, atol=1e-9)
        assert_allclose(T, V.T @ P(x) @ V, rtol=1e-12)
        v = V @ np.array([0.3, -0.7])
        lhs, rhs = a2_sufficiency_lhs(model, ortho, x, v, q=0.1)
        assert_allclose(lhs, v @ Lf @ v, rtol=1e-9, atol=1e-9)
        assert_allclose(rhs, -0.1 * v @ P(x) @ v, rtol=1e-12)


def test_kernel_form_rejects_transverse_direction(oscillator):
    with pytest.raises(ValueError):
        a2_sufficiency_lhs(oscillator.model, oscillator.ortho["tuned-product"], oscillator.region.sample(0, 1)[0],
                           np.array([1.0, 0.0, 0.0]))


def test_rank_conditions():
    h = SmoothMap(lambda x: np.array([x[0]], dtype=object), 2, 1)
    dup = OrthComplementMap(SmoothMap(lambda x: np.array([2 * x[0]], dtype=object), 2, 1),
                            ConstantMetric([[1.0]]), 1)
    with pytest.raises(RankViolation):
        rank_conditions(dup, h, np.zeros(2))
    with pytest.raises(RankViolation):
        build_product_metric(ConstantMetric([[1.0]]), OrthComplementMap(dup.h_perp, dup.R, 2), h)
    good = OrthComplementMap(SmoothMap(lambda x: np.array([x[1] + x[0] ** 2], dtype=object), 2, 1),
                             ConstantMetric([[1.0]]), 1)
    P = build_product_metric(ConstantMetric([[1.0]]), good, h, check_points=np.ones((3, 2)))
    assert P.provenance["h_perp"] == ""


def test_tuner_output():
    a, b, c, q = tune_product_parameters(0.5)
    assert b == 36.0 and c == 1.0
    assert a > 0 and q > 0
    assert product_feasible(a, b, q, 0.5)
    m1, m2, m3 = product_margins(a, b, q, 0.5)
    assert m1 >= 0 and m2 > 0 and m3 > 0


@pytest.mark.parametrize("eps,c", [(0.0, 1.0), (1.0, 1.0), (0.5, -1.0)])
def test_tuner_rejects_bad_input(eps, c):
    with pytest.raises(NoFeasiblePoint):
        tune_product_parameters(eps, c)
