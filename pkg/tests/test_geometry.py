import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_spd
from geodesic_observer import (ConstantMetric, MetricField, PullbackMetric, SmoothMap, christoffel,
                               curvature_component, geodesic_ivp, lie_derivative_metric, riemannian_gradient,
                               riemannian_hessian, second_fundamental_form)
from geodesic_observer.errors import RankDeficientOutput, SingularJacobian
from geodesic_observer.geometry import output_rank_check, transform_sff
from oracles import christoffel_fd, flow_lie_derivative


def warped_metric(W):
    theta = SmoothMap(lambda x: np.array([x[0] + 0.3 * np.sin(x[1]), x[1] * (1.0 + 0.2 * x[2]),
                                          x[2] + 0.1 * x[0] * x[0]], dtype=object), 3, 3)
    return PullbackMetric(theta, ConstantMetric(W))


def test_christoffel_matches_differences(rng):
    P = warped_metric(random_spd(rng, 3))
    for x in rng.uniform(-0.5, 0.5, (5, 3)):
        gam = christoffel(P, x)
        assert_allclose(gam.values, christoffel_fd(P, x), rtol=1e-6, atol=1e-8)
        assert_allclose(gam.values, gam.values.transpose(0, 2, 1), atol=1e-13)


def test_constant_metric_is_flat():
    P = ConstantMetric(np.diag([1.0, 2.0, 3.0]))
    assert christoffel(P, np.ones(3)).norm() == 0.0


def test_lie_derivative_matches_flow(oscillator):
    P = oscillator.metrics["observability"]
    f = oscillator.model.f
    for x in oscillator.region.sample(7, 3):
        assert_allclose(lie_derivative_metric(P, f, x), flow_lie_derivative(P, f, x), rtol=1e-6, atol=1e-7)


def test_gradient_is_metric_dual(rng):
    P = warped_metric(random_spd(rng, 3))
    h = SmoothMap(lambda x: np.array([x[0] * x[1], np.sin(x[2])], dtype=object), 3, 2)
    x = np.array([0.2, -0.4, 0.3])
    G = riemannian_gradient(P, h, x)
    assert_allclose(P(x) @ G, h.jacobian(x).T, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_hessian_equals_second_derivative_along_geodesic(seed):
    rng = np.random.default_rng(seed)
    P = warped_metric(random_spd(rng, 3))
    h = SmoothMap(lambda x: np.array([x[0] * x[1] + np.exp(0.5 * x[2])], dtype=object), 3, 1)
    x0 = rng.uniform(-0.3, 0.3, 3)
    v0 = rng.standard_normal(3)
    s = 1e-3
    values = [h(geodesic_ivp(P, x0, sgn * v0, s, step=s / 8).points[-1])[0] for sgn in (-1, 1)]
    second = (values[0] - 2 * h(x0)[0] + values[1]) / s**2
    hess = riemannian_hessian(P, h, x0)[0]
    assert abs(second - v0 @ hess @ v0) <= 1e-4 * (1 + abs(second))


def test_sff_vanishes_for_linear_output_and_constant_metrics(rng):
    P = ConstantMetric(random_spd(rng, 3))
    Q = ConstantMetric(random_spd(rng, 1))
    h = SmoothMap(lambda x: np.array([x[0] - 2 * x[2]], dtype=object), 3, 1)
    assert np.abs(second_fundamental_form(P, Q, h, rng.standard_normal(3))).max() == 0.0


def _chart(M):
    return SmoothMap(lambda z: z + 0.1 * np.tanh(M @ z), M.shape[0], M.shape[0], name="chart")


@pytest.mark.parametrize("seed", range(20))
def test_sff_transforms_as_tensor(oscillator, seed):
    rng = np.random.default_rng(100 + seed)
    P = oscillator.metrics["observability"]
    Q = oscillator.Q
    h = oscillator.model.h
    chi = _chart(rng.standard_normal((3, 3)))
    omega = SmoothMap(lambda u: np.array([np.sinh(u[0])], dtype=object), 1, 1, name="sinh")
    omega_inv = SmoothMap(lambda y: np.array([np.arcsinh(y[0])], dtype=object), 1, 1)
    xbar = oscillator.region.sample(seed, 1)[0]
    x = chi(xbar)
    y = h(x)
    ybar = omega_inv(y)
    Pbar = PullbackMetric(chi, P)
    Qbar = PullbackMetric(omega, Q)
    hbar = SmoothMap(lambda z: omega_inv.expr(h.expr(chi.expr(z))), 3, 1)
    II = second_fundamental_form(P, Q, h, x)
    IIbar = second_fundamental_form(Pbar, Qbar, hbar, xbar)
    phi = SmoothMap(lambda v: v, 3, 3, jacobian=lambda v: np.linalg.inv(chi.jacobian(xbar)))
    psi = SmoothMap(lambda v: v, 1, 1, jacobian=lambda v: np.linalg.inv(omega.jacobian(ybar)))
    moved = transform_sff(phi, psi, II, (x, y))
    assert np.abs(II).max() > 1e-3
    assert_allclose(IIbar, moved, atol=1e-6 * (1 + np.abs(II).max()))


def test_transform_rejects_singular_chart():
    phi = SmoothMap(lambda v: v, 2, 2, jacobian=lambda v: np.array([[1.0, 2.0], [2.0, 4.0]]))
    psi = SmoothMap(lambda v: v, 1, 1)
    with pytest.raises(SingularJacobian):
        transform_sff(phi, psi, np.zeros((1, 2, 2)), (np.zeros(2), np.zeros(1)))


def test_rank_deficient_output():
    with pytest.raises(RankDeficientOutput):
        output_rank_check(np.array([[1.0, 2.0], [2.0, 4.0]]))


@pytest.mark.parametrize("a,xi", [(0.3, 0.0), (0.3, 0.8), (2.0, -0.5)])
def test_curvature_of_warped_plane(a, xi):
    # metric diag(1, G(xi)) with G = 1 + a xi^2: R^1_{122} = -G''/2 + G'^2 / (4 G)
    P = MetricField(lambda x: np.array([[1.0, 0.0], [0.0, 1.0 + a * x[0] * x[0]]], dtype=object), 2)
    G = 1 + a * xi**2
    expected = -a + (2 * a * xi) ** 2 / (4 * G)
    assert_allclose(curvature_component(P, [xi, 0.3], (0, 0, 1, 1)), expected, rtol=1e-6, atol=1e-8)
    assert_allclose(expected, -a / G, rtol=1e-12)
