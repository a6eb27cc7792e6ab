import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import random_spd
from geodesic_observer import (ConditionReport, ConstantMetric, check_a2, check_a3_nullity,
                               check_geodesic_monotonicity_direct, check_submersion, distributions, p_mod,
                               second_fundamental_form, sff_blocks)
from geodesic_observer.benchmarks import linear_quadratic
from geodesic_observer.conditions import a2_kernel_eigen, monotonicity_profile, rho_certificate
from geodesic_observer.geodesics import geodesic_ivp


def test_a2_on_linear_family_equals_lyapunov_rate(linear):
    rep = check_a2(linear.model, linear.metrics["P"], samples=16)
    assert rep.passed
    assert_allclose(rep.margin, 1.0, rtol=1e-10)
    assert_allclose(linear.params["q_kernel"], 1.0, rtol=1e-10)


def test_rho_certificate_of_lyapunov_metric(linear):
    # A^T P + P A - H^T H = -q P, so the smallest admissible rho is exactly 1
    rho = rho_certificate(linear.model, linear.metrics["P"], np.zeros(2), q=1.0)
    assert_allclose(rho, 1.0, rtol=1e-8)


def test_a2_failure_carries_kernel_witness():
    bench = linear_quadratic([[0.0, 1.0], [0.0, 0.5]], [[1.0, 0.0]], np.eye(2), np.eye(1))
    rep = check_a2(bench.model, bench.metrics["P"], samples=8)
    assert rep.verdict == "fail"
    assert bench.expected[("P", "a2")] == "fail"
    assert_allclose(bench.model.h.jacobian(rep.witness_point) @ rep.witness_direction, 0.0, atol=1e-12)
    assert_allclose(rep.margin, -1.0, rtol=1e-12)


def test_full_output_has_empty_kernel():
    bench = linear_quadratic(-np.eye(2), np.eye(2), np.eye(2), np.eye(2))
    rep = check_a2(bench.model, bench.metrics["P"], samples=4)
    assert rep.passed and math.isinf(rep.margin)


@pytest.mark.parametrize("seed", range(5))
def test_pmod_keeps_a2_margin(linear, seed):
    rng = np.random.default_rng(seed)
    P = ConstantMetric(random_spd(rng, 2))
    Pm = p_mod(P, linear.Q, linear.model.h)
    x = linear.region.sample(seed, 1)[0]
    lam, _ = a2_kernel_eigen(linear.model, P, x)
    lam_mod, _ = a2_kernel_eigen(linear.model, Pm, x)
    assert abs(lam - lam_mod) <= 1e-6 * (1 + abs(lam))


def test_sff_blocks_reconstruct_form(oscillator):
    P, Q, h = oscillator.metrics["observability"], oscillator.Q, oscillator.model.h
    for x in oscillator.region.sample(1, 5):
        II = second_fundamental_form(P, Q, h, x)
        basis = distributions(P, h, x)
        blocks = sff_blocks(P, Q, h, x)
        B = np.hstack([basis.tangent_basis, basis.orth_basis])
        k = basis.tangent_basis.shape[1]
        full = np.empty_like(II)
        for i in range(II.shape[0]):
            M = np.zeros_like(II[i])
            M[:k, :k] = blocks.tt[i]
            M[k:, k:] = blocks.oo[i]
            M[k:, :k] = blocks.mixed[i]
            M[:k, k:] = blocks.mixed[i].T
            Binv = np.linalg.inv(B)
            full[i] = Binv.T @ M @ Binv
        assert_allclose(full, II, atol=1e-10 * (1 + np.abs(II).max()))


def test_distributions_are_complementary(oscillator):
    P, h = oscillator.metrics["observability"], oscillator.model.h
    x = oscillator.region.sample(2, 1)[0]
    basis = distributions(P, h, x)
    assert_allclose(h.jacobian(x) @ basis.tangent_basis, 0.0, atol=1e-12)
    assert_allclose(basis.tangent_basis.T @ P(x) @ basis.orth_basis, 0.0, atol=1e-12)


def test_nullity_check_flags_tangent_block(oscillator):
    rep = check_a3_nullity(oscillator.model, oscillator.metrics["observability"], oscillator.Q, samples=64)
    assert rep.verdict == "fail"
    assert rep.details["block"] == "tangent-tangent"
    assert_allclose(oscillator.model.h.jacobian(rep.witness_point) @ rep.witness_direction, 0.0, atol=1e-12)


def test_nullity_check_passes_for_product_metric(oscillator):
    rep = check_a3_nullity(oscillator.model, oscillator.metrics["tuned-product"], oscillator.Q, samples=64)
    assert rep.passed and rep.margin <= 1e-12


def test_submersion_residual(oscillator):
    P, Q, h = oscillator.metrics["observability"], oscillator.Q, oscillator.model.h
    assert check_submersion(P, Q, h, oscillator.region, samples=32).verdict == "fail"
    rep = check_submersion(p_mod(P, Q, h), Q, h, oscillator.region, samples=32)
    assert rep.passed and rep.margin <= 1e-8


def test_monotone_profile_along_straight_line():
    P = ConstantMetric(np.eye(2))
    h = linear_quadratic(-np.eye(2), [[1.0, 0.0]], np.eye(2), np.eye(1)).model.h
    from geodesic_observer import gap_sq_distance

    geo = geodesic_ivp(P, [-1.0, 0.0], [2.0, 1.0], 1.0)
    worst, _ = monotonicity_profile(geo, h, gap_sq_distance(ConstantMetric([[1.0]])))
    assert worst > 0


def test_direct_check_passes_on_linear_family(linear):
    rep = check_geodesic_monotonicity_direct(linear.metrics["P"], linear.Q, linear.model.h, linear.region,
                                             trials=6, gap=linear.gap)
    assert rep.passed and rep.details["completed"] == 6


def test_failing_report_needs_witness():
    with pytest.raises(ValueError):
        ConditionReport("a2", "fail", -1.0, None, None, 1, 0, 1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(-10, 10), st.sampled_from([math.inf, -math.inf, math.nan, 0.5]))
def test_report_serializes_to_json(margin, special):
    rep = ConditionReport("a2", "fail", margin, np.array([1.0, special]), np.array([0.0, 1.0]), 3, 0, 1e-6,
                          {"q_est": special})
    text = json.dumps(rep.to_dict())
    back = json.loads(text)
    assert back["witness"]["point"][0] == 1.0
    assert back["verdict"] == "fail"
