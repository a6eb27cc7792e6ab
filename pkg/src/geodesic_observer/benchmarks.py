"""Worked systems with their metrics and expected check verdicts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from . import defaults
from .construction import (OrthComplementMap, build_product_metric, tune_product_parameters)
from .errors import DimensionMismatch, NonpositiveWeight, RankViolation
from .fields import ConstantMetric, MetricField, PullbackMetric, SmoothMap, SystemModel
from .observer import GapFunction, gap_sq_distance
from .regions import Region, box


@dataclass
class BenchmarkSpec:
    """A system, its region, candidate metrics and the verdicts they should produce."""

    name: str
    model: SystemModel
    region: Region
    metrics: dict
    Q: MetricField
    gap: GapFunction
    expected: dict
    options: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    note: str = ""
    observer: Optional[Callable] = None
    ortho: dict = field(default_factory=dict)

    def check_options(self, metric, condition):
        return dict(self.options.get((metric, condition), {}))


# linear systems with quadratic metrics

def linear_quadratic(A, H, P_const, Q_const, half_width=1.0, q_min=defaults.A2_Q_MIN):
    """Linear drift, linear output and constant metrics on a box."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    P_const = np.atleast_2d(np.asarray(P_const, dtype=float))
    Q_const = np.atleast_2d(np.asarray(Q_const, dtype=float))
    n, p = A.shape[0], H.shape[0]
    if A.shape != (n, n) or H.shape[1] != n or P_const.shape != (n, n) or Q_const.shape != (p, p):
        raise DimensionMismatch("inconsistent shapes for (A, H, P, Q)")
    for M in (P_const, Q_const):
        if not np.allclose(M, M.T) or np.linalg.eigvalsh(M)[0] <= 0:
            raise DimensionMismatch("P and Q must be symmetric positive definite")
    f = SmoothMap(lambda x: A @ x, n, n, jacobian=lambda x: A, hessian=lambda x: np.zeros((n, n, n)), name="Ax")
    h = SmoothMap(lambda x: H @ x, n, p, jacobian=lambda x: H, hessian=lambda x: np.zeros((p, n, n)), name="Hx")
    region = box(-half_width * np.ones(n), half_width * np.ones(n), name="box")
    model = SystemModel(f, h, region, "linear", {"A": A, "H": H})
    P = ConstantMetric(P_const, "P")
    Q = ConstantMetric(Q_const, "Q")

    V = sla.null_space(H)
    if V.shape[1] == 0:
        q_kernel = np.inf
    else:
        L = A.T @ P_const + P_const @ A
        q_kernel = -sla.eigh(V.T @ L @ V, V.T @ P_const @ V, eigvals_only=True)[-1]
    induced = np.linalg.inv(H @ np.linalg.solve(P_const, H.T))
    submersion = np.linalg.norm(induced - Q_const) <= defaults.SUBMERSION_TOL * np.linalg.norm(Q_const)
    expected = {
        ("P", "a2"): "pass" if q_kernel >= q_min else "fail",
        ("P", "a3-nullity"): "pass",
        ("P", "a3-direct"): "pass",
        ("P", "submersion"): "pass" if submersion else "fail",
    }

    def luenberger(xhat, y, gain):
        return A @ xhat - gain * np.linalg.solve(P_const, H.T) @ (2.0 * Q_const @ (H @ xhat - y))

    return BenchmarkSpec("linear", model, region, {"P": P}, Q, gap_sq_distance(Q), expected,
                         options={("P", "a2"): {"q_min": q_min}},
                         params={"q_kernel": float(q_kernel)}, observer=luenberger,
                         note="linear-quadratic family")


def default_linear(q=1.0):
    """Lightly damped oscillator with ``A^T P + P A - H^T H = -q P``.

    ``P`` is positive definite because ``A + q/2`` is anti-stable and the
    pair is observable.
    """
    A = np.array([[0.0, 1.0], [-1.01, -0.2]])
    H = np.array([[1.0, 0.0]])
    P = sla.solve_continuous_lyapunov((A + 0.5 * q * np.eye(2)).T, H.T @ H)
    Q = np.linalg.inv(H @ np.linalg.solve(P, H.T))
    return linear_quadratic(A, H, P, Q, half_width=4.0)


# harmonic oscillator with unknown frequency

def oscillator_region(epsilon):
    e = epsilon

    def inside(x):
        y, za, zb = x
        energy = zb * y * y + za * za
        return e < energy < 1.0 / e and e < zb < 1.0 / e

    lower = np.array([-1.0 / e, -1.0 / np.sqrt(e), e])
    upper = np.array([1.0 / e, 1.0 / np.sqrt(e), 1.0 / e])
    return Region(lower, upper, inside, f"oscillator(eps={epsilon})")


def _oscillator_f():
    def fn(x):
        y, za, zb = x[0], x[1], x[2]
        return np.array([za, -(y * zb), 0.0 * y], dtype=object)

    def jac(x):
        y, za, zb = x
        return np.array([[0.0, 1.0, 0.0], [-zb, 0.0, -y], [0.0, 0.0, 0.0]])

    def hess(x):
        H = np.zeros((3, 3, 3))
        H[1, 0, 2] = H[1, 2, 0] = -1.0
        return H

    return SmoothMap(fn, 3, 3, jacobian=jac, hessian=hess, name="oscillator")


def _first_coordinate(n):
    e1 = np.zeros((1, n))
    e1[0, 0] = 1.0
    return SmoothMap(lambda x: np.array([x[0]], dtype=object), n, 1,
                     jacobian=lambda x: e1, hessian=lambda x: np.zeros((1, n, n)), name="y")


def observability_map():
    """``(y, z_a, z_b) -> (y, y', y'', y''')`` along the oscillator flow."""

    def fn(x):
        y, za, zb = x[0], x[1], x[2]
        return np.array([y, za, -(y * zb), -(za * zb)], dtype=object)

    def jac(x):
        y, za, zb = x
        return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-zb, 0.0, -y], [0.0, -zb, -za]])

    def hess(x):
        H = np.zeros((4, 3, 3))
        H[2, 0, 2] = H[2, 2, 0] = -1.0
        H[3, 1, 2] = H[3, 2, 1] = -1.0
        return H

    return SmoothMap(fn, 3, 4, jacobian=jac, hessian=hess, name="observability")


def chain_weight(level=8.0):
    """High-gain Lyapunov weight for a chain of four integrators.

    ``W = D W0 D`` with ``D = diag(1, 1/l, 1/l^2, 1/l^3)`` and ``W0`` solving
    the Lyapunov equation of the chain closed with poles at -1.
    """
    chain = np.diag(np.ones(3), 1)
    gain = np.array([[4.0], [6.0], [4.0], [1.0]])
    closed = chain - gain @ np.array([[1.0, 0.0, 0.0, 0.0]])
    W0 = sla.solve_continuous_lyapunov(closed.T, -np.eye(4))
    D = np.diag([1.0, 1.0 / level, 1.0 / level**2, 1.0 / level**3])
    W = D @ W0 @ D
    return 0.5 * (W + W.T)


def observability_metric(weight):
    return PullbackMetric(observability_map(), ConstantMetric(weight, "weight"), name="observability")


def oscillator_complement(a, b):
    """Complementary coordinates and their metric for the oscillator product metric."""
    ab = a * b

    def fn(x):
        y, za, zb = x[0], x[1], x[2]
        return np.array([za - y, zb + 0.5 * (y * y) + ab * (y * za)], dtype=object)

    def jac(x):
        y, za, zb = x
        return np.array([[-1.0, 1.0, 0.0], [y + ab * za, ab * y, 1.0]])

    def hess(x):
        H = np.zeros((2, 3, 3))
        H[1, 0, 0] = 1.0
        H[1, 0, 1] = H[1, 1, 0] = ab
        return H

    h_perp = SmoothMap(fn, 3, 2, jacobian=jac, hessian=hess, name="oscillator_complement")

    def rfn(xi):
        return np.array([[1.0, 0.0], [0.0, 1.0 + a * xi[0] * xi[0]]], dtype=object)

    def rderiv(xi):
        d = np.zeros((2, 2, 2))
        d[0, 1, 1] = 2.0 * a * xi[0]
        return d

    R = MetricField(rfn, 2, deriv=rderiv, name="complement_R")
    return OrthComplementMap(h_perp, R, 2)


def product_closed_form(x, a, b, c):
    """Hand-written closed form of the oscillator product metric."""
    y, za, zb = x
    N = np.array([[-1.0, 1.0, 0.0], [y + a * b * za, a * b * y, 1.0]])
    e1 = np.array([1.0, 0.0, 0.0])
    return c * np.outer(e1, e1) + N.T @ np.diag([1.0, 1.0 + a * (za - y) ** 2]) @ N


def oscillator_chart_metric(a, c):
    """The product metric written in the (y, xi_a, xi_b) chart."""

    def fn(x):
        return np.array([[c, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0 + a * x[1] * x[1]]], dtype=object)

    return MetricField(fn, 3, name="oscillator_chart")


def oscillator_display_observer(a, b, c):
    """Observer vector field written out by hand for the oscillator product metric.

    Its gain ``k`` multiplies ``(1, 1, -yh - ab (zh_a + yh)) (yh - y) / c``.
    """

    def field_fn(xhat, y, gain):
        yh, za, zb = xhat
        direction = np.array([1.0, 1.0, -yh - a * b * (za + yh)]) / c
        return np.array([za, -yh * zb, 0.0]) - gain * direction * (yh - float(np.ravel(y)[0]))

    return field_fn


def harmonic_oscillator(epsilon=0.5, weight=None, c=1.0, level=8.0):
    """Oscillator with unknown frequency on the invariant set of the given energy band.

    ``weight`` is the constant 4x4 matrix of the observability metric; the
    default is :func:`chain_weight` with ``level``.  ``"identity"`` selects I.
    """
    region = oscillator_region(epsilon)
    model = SystemModel(_oscillator_f(), _first_coordinate(3), region, "oscillator", {"epsilon": epsilon})
    if weight is None:
        weight = chain_weight(level)
    elif isinstance(weight, str) and weight == "identity":
        weight = np.eye(4)
    weight = np.asarray(weight, dtype=float)
    a, b, c, q = tune_product_parameters(epsilon, c)
    Q = ConstantMetric([[c]], "Q")
    ortho = oscillator_complement(a, b)
    tuned = build_product_metric(Q, ortho, model.h, check_points=region.sample(0, 32))
    metrics = {"observability": observability_metric(weight), "tuned-product": tuned}
    expected = {
        ("observability", "a2"): "pass",
        ("observability", "a3-nullity"): "fail",
        ("observability", "a3-direct"): "fail",
        ("observability", "submersion"): "fail",
        ("tuned-product", "a2"): "pass",
        ("tuned-product", "a3-nullity"): "pass",
        ("tuned-product", "a3-direct"): "pass",
        ("tuned-product", "submersion"): "pass",
    }
    # the tuned q is tiny, so the A2 check of the product metric is held to it
    options = {("tuned-product", "a2"): {"q_min": q}}
    params = {"epsilon": epsilon, "a": a, "b": b, "c": c, "q": q, "weight": weight}
    return BenchmarkSpec("oscillator", model, region, metrics, Q, gap_sq_distance(Q), expected, options,
                         params, note="oscillator with unknown frequency",
                         observer=oscillator_display_observer(a, b, c), ortho={"tuned-product": ortho})


# two-dimensional systems

def planar_complement(a_fn, b_fn, nodes=24):
    """``h_perp(y, z) = int_0^y b + int_0^z a(y, s) ds`` by Gauss-Legendre quadrature."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w

    def fn(x):
        y, z = x[0], x[1]
        total_b = 0.0
        total_a = 0.0
        for tk, wk in zip(t, w):
            total_b = total_b + wk * b_fn(y * tk)
            total_a = total_a + wk * a_fn(y, z * tk)
        return np.array([y * total_b + z * total_a], dtype=object)

    return SmoothMap(fn, 2, 1, name="planar_complement")


def planar_bracket(f_y, f_z, a_fn, b_fn, x, nodes=24):
    """The scalar ``[b + int_0^z a_y] f_y + a f_z`` evaluated with plain floats."""
    y, z = x
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    step = 1e-6 * (1.0 + abs(y))
    a_y = sum(wk * (a_fn(y + step, z * tk) - a_fn(y - step, z * tk)) / (2 * step) for tk, wk in zip(t, w)) * z
    return (b_fn(y) + a_y) * f_y(y, z) + a_fn(y, z) * f_z(y, z)


def planar_family(f_y, f_z, a_fn, b_fn, lower=(-2.0, -2.0), upper=(2.0, 2.0), q_min=defaults.A2_Q_MIN,
                  samples=256):
    """Two-state systems with scalar output ``y`` and the rank-one-plus-output metric."""
    region = box(lower, upper, "planar box")
    for x in region.sample(0, samples):
        if not a_fn(x[0], x[1]) > 0:
            raise NonpositiveWeight("a(y, z) must be positive", x)

    def fn(x):
        return np.array([f_y(x[0], x[1]), f_z(x[0], x[1])], dtype=object)

    model = SystemModel(SmoothMap(fn, 2, 2, name="planar"), _first_coordinate(2), region, "planar")
    Q = ConstantMetric([[1.0]], "Q")
    ortho = OrthComplementMap(planar_complement(a_fn, b_fn), ConstantMetric([[1.0]], "R"), 1)
    P = build_product_metric(Q, ortho, model.h, check_points=region.sample(0, 16))

    # expected A2 verdict from the scalar bracket, differentiated by central differences
    worst = -np.inf
    for x in region.sample(0, samples):
        dz = 1e-5 * (1.0 + abs(x[1]))
        d_bracket = (planar_bracket(f_y, f_z, a_fn, b_fn, (x[0], x[1] + dz))
                     - planar_bracket(f_y, f_z, a_fn, b_fn, (x[0], x[1] - dz))) / (2 * dz)
        worst = max(worst, 2.0 * d_bracket / a_fn(x[0], x[1]))
    q_scalar = -worst
    expected = {
        ("P", "a2"): "pass" if q_scalar >= q_min else "fail",
        ("P", "a3-nullity"): "pass",
        ("P", "submersion"): "pass",
    }

    def observer(xhat, y, gain):
        yh, zh = xhat
        B = P.ortho.h_perp.jacobian(np.asarray(xhat, float))[0, 0]
        A = a_fn(yh, zh)
        err = yh - float(np.ravel(y)[0])
        return np.array([f_y(yh, zh) - gain * err, f_z(yh, zh) + gain * B / A * err])

    return BenchmarkSpec("planar", model, region, {"P": P}, Q, gap_sq_distance(Q), expected,
                         options={("P", "a2"): {"q_min": q_min}}, params={"q_scalar": q_scalar},
                         note="two-dimensional family", observer=observer, ortho={"P": ortho})


def default_planar():
    """Damped oscillator ``y' = z, z' = -y - z`` with ``a = 1`` and ``b = 0``."""
    return planar_family(lambda y, z: z, lambda y, z: -y - z, lambda y, z: 1.0 + 0.0 * y, lambda y: 0.0 * y)


# output with circular level sets

def rank_bracket(k_alpha, k_beta, x):
    """``x1 [k_b d2 k_a - k_a d2 k_b] - x2 [k_b d1 k_a - k_a d1 k_b]`` with exact derivatives."""
    from .jets import derivatives

    ka, dka, _ = derivatives(lambda v: np.array([k_alpha(v)], dtype=object), x, order=1)
    kb, dkb, _ = derivatives(lambda v: np.array([k_beta(v)], dtype=object), x, order=1)
    ka, kb, dka, dkb = ka[0], kb[0], dka[0], dkb[0]
    x1, x2 = x
    return float(x1 * (kb * dka[1] - ka * dkb[1]) - x2 * (kb * dka[0] - ka * dkb[0]))


def annulus(r_min=0.2, r_max=5.0):
    def inside(x):
        r2 = x[0] * x[0] + x[1] * x[1]
        return r_min**2 < r2 < r_max**2

    return Region(-r_max * np.ones(2), r_max * np.ones(2), inside, "annulus")


def circle_output(k_alpha=None, k_beta=None, Q_fn=None, R_fn=None, r_min=0.2, r_max=5.0, samples=256):
    """Output ``x1^2 + x2^2`` with complement ``k / |k|`` landing in the punctured plane.

    ``Q_fn`` and ``R_fn`` are metric fields on the output line and on the
    plane; defaults are the unit metrics.  The drift is a unit rotation.
    """
    k_alpha = k_alpha or (lambda v: v[0])
    k_beta = k_beta or (lambda v: v[1])
    region = annulus(r_min, r_max)
    for x in region.sample(0, samples):
        if abs(rank_bracket(k_alpha, k_beta, x)) <= 1e-12:
            raise RankViolation("rank bracket vanishes", x, 1)

    def h_perp_fn(x):
        ka, kb = k_alpha(x), k_beta(x)
        norm = np.sqrt(ka * ka + kb * kb)
        return np.array([ka / norm, kb / norm], dtype=object)

    def out_fn(x):
        return np.array([x[0] * x[0] + x[1] * x[1]], dtype=object)

    def rot(x):
        return np.array([-x[1], x[0]], dtype=object)

    h = SmoothMap(out_fn, 2, 1, name="radius_squared")
    model = SystemModel(SmoothMap(rot, 2, 2, name="rotation"), h, region, "circle")
    Q = Q_fn or ConstantMetric([[1.0]], "Q")
    R = R_fn or ConstantMetric(np.eye(2), "R")
    ortho = OrthComplementMap(SmoothMap(h_perp_fn, 2, 2, name="normalized_k"), R, 1)
    P = build_product_metric(Q, ortho, h, check_points=region.sample(0, 16))
    expected = {("P", "a3-nullity"): "pass", ("P", "submersion"): "pass"}
    gap = gap_sq_distance(Q) if Q.is_constant else None
    return BenchmarkSpec("circle", model, region, {"P": P}, Q, gap, expected, note="circular level sets",
                         ortho={"P": ortho})


def by_name(name, **kwargs):
    """Benchmarks addressable from the command line."""
    makers = {
        "linear": default_linear,
        "oscillator": harmonic_oscillator,
        "planar": default_planar,
        "circle": circle_output,
    }
    if name not in makers:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(makers)}")
    return makers[name](**kwargs)
