"""Geodesic initial- and boundary-value problems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from . import defaults
from .errors import LeftRegion, NoConvergence, SingularMetric, StepFailure
from .fields import MetricField, cholesky_checked


@dataclass
class Geodesic:
    """Sampled geodesic: parameters, points, velocities and squared speeds."""

    s: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    speed_sq: np.ndarray
    piecewise: bool = False
    residual: float = 0.0

    @property
    def s_start(self):
        return float(self.s[0])

    @property
    def s_end(self):
        return float(self.s[-1])

    @property
    def energy(self):
        return float(trapezoid(self.speed_sq, self.s))

    @property
    def length(self):
        return float(trapezoid(np.sqrt(np.maximum(self.speed_sq, 0.0)), self.s))

    @property
    def speed_drift(self):
        ref = self.speed_sq[0]
        if ref <= 0.0:
            return float(np.max(np.abs(self.speed_sq)))
        return float(np.max(np.abs(self.speed_sq - ref)) / ref)

    def samples(self):
        return list(zip(self.s, self.points, self.velocities))

    def reversed(self):
        s = self.s[-1] + self.s[0] - self.s[::-1]
        return Geodesic(s, self.points[::-1].copy(), -self.velocities[::-1].copy(),
                        self.speed_sq[::-1].copy(), self.piecewise, self.residual)


def geodesic_acceleration(P: MetricField, x, v):
    """Return ``(-Gamma(v, v), v^T P v)`` at ``x``."""
    Pm, dP = P.with_deriv(x)
    L = cholesky_checked(Pm, x)
    dir_deriv = np.einsum("bad,b->ad", dP, v)
    u = 2.0 * dir_deriv @ v - np.einsum("dab,a,b->d", dP, v, v)
    acc = -0.5 * np.linalg.solve(L.T, np.linalg.solve(L, u))
    return acc, float(v @ Pm @ v)


def _integrate(P, x0, v0, s_end, steps, region=None, store=True):
    h = s_end / steps
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    n = x.size
    if store:
        pts = np.empty((steps + 1, n))
        vels = np.empty((steps + 1, n))
        speeds = np.empty(steps + 1)
    for k in range(steps):
        a1, sp = geodesic_acceleration(P, x, v)
        if store:
            pts[k], vels[k], speeds[k] = x, v, sp
        x2, v2 = x + 0.5 * h * v, v + 0.5 * h * a1
        a2, _ = geodesic_acceleration(P, x2, v2)
        x3, v3 = x + 0.5 * h * v2, v + 0.5 * h * a2
        a3, _ = geodesic_acceleration(P, x3, v3)
        x4, v4 = x + h * v3, v + h * a3
        a4, _ = geodesic_acceleration(P, x4, v4)
        x = x + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if region is not None and not region.contains(x):
            raise LeftRegion("geodesic left the region", x, (k + 1) * h)
    if not store:
        return x, v
    Pm = P(x)
    pts[steps], vels[steps], speeds[steps] = x, v, float(v @ Pm @ v)
    s = np.linspace(0.0, s_end, steps + 1)
    return Geodesic(s, pts, vels, speeds)


def geodesic_ivp(P: MetricField, x0, v0, s_end=1.0, step=None, region=None):
    """Integrate the geodesic equation with RK4, halving the step until the
    squared speed drifts by at most 1e-6 relative."""
    if step is not None and step <= 0:
        raise ValueError("step must be positive")
    if s_end == 0:
        x0 = np.asarray(x0, float)
        v0 = np.asarray(v0, float)
        sp = float(v0 @ P(x0) @ v0)
        return Geodesic(np.zeros(1), x0[None, :].copy(), v0[None, :].copy(), np.array([sp]))
    steps = defaults.GEODESIC_INITIAL_STEPS if step is None else max(1, int(np.ceil(abs(s_end) / step)))
    for _ in range(defaults.GEODESIC_MAX_HALVINGS + 1):
        geo = _integrate(P, x0, v0, s_end, steps, region)
        if geo.speed_drift <= defaults.SPEED_DRIFT_TOL:
            return geo
        steps *= 2
    raise StepFailure(f"speed drift {geo.speed_drift:.3e} after {defaults.GEODESIC_MAX_HALVINGS} halvings")


def _endpoint(P, x1, v, steps):
    try:
        return _integrate(P, x1, v, 1.0, steps, store=False)[0]
    except (SingularMetric, FloatingPointError, np.linalg.LinAlgError):
        return None


def _shooting(P, x1, x2, v, steps, tol, max_iter):
    """Damped Newton on the initial velocity; returns (v, residual norm)."""
    end = _endpoint(P, x1, v, steps)
    if end is None:
        raise NoConvergence("initial shot failed", np.inf)
    r = end - x2
    rn = float(np.linalg.norm(r))
    n = x1.size
    for _ in range(max_iter):
        if rn <= tol:
            return v, rn
        jac = np.empty((n, n))
        for c in range(n):
            dv = defaults.BVP_JAC_REL_STEP * (1.0 + abs(v[c]))
            vp = v.copy()
            vp[c] += dv
            e = _endpoint(P, x1, vp, steps)
            if e is None:
                raise NoConvergence("shot failed while forming the Jacobian", rn)
            jac[:, c] = (e - end) / dv
        try:
            delta = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            raise NoConvergence("singular shooting Jacobian", rn) from None
        alpha = 1.0
        while alpha >= 1e-6:
            trial = v + alpha * delta
            e = _endpoint(P, x1, trial, steps)
            if e is not None:
                rt = e - x2
                rtn = float(np.linalg.norm(rt))
                if rtn <= (1.0 - 1e-4 * alpha) * rn:
                    v, end, r, rn = trial, e, rt, rtn
                    break
            alpha *= 0.5
        else:
            raise NoConvergence("line search failed", rn)
    if rn <= tol:
        return v, rn
    raise NoConvergence(f"no convergence after {max_iter} iterations", rn)


def _solve_bvp(P, x1, x2, v_guess, region, max_iter):
    tol = defaults.BVP_REL_TOL * (1.0 + np.linalg.norm(x2))
    v = (x2 - x1) if v_guess is None else np.array(v_guess, dtype=float)
    steps = defaults.GEODESIC_INITIAL_STEPS
    for _ in range(defaults.GEODESIC_MAX_HALVINGS + 1):
        v, rn = _shooting(P, x1, x2, v, steps, tol, max_iter)
        geo = _integrate(P, x1, v, 1.0, steps, region)
        if geo.speed_drift <= defaults.SPEED_DRIFT_TOL:
            geo.residual = rn
            return geo
        steps *= 2
    raise StepFailure("speed drift did not settle while shooting")


def geodesic_bvp_distance(P: MetricField, x1, x2, v_guess=None, region=None,
                          max_iter=defaults.BVP_MAX_ITER, split=True):
    """Distance between two points along the geodesic found by shooting.

    The initial velocity guess is the chord ``x2 - x1`` unless ``v_guess`` is
    given.  When shooting fails the chord is bisected once and the two
    halves are solved separately; the returned curve is then marked
    ``piecewise``.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if np.array_equal(x1, x2):
        sp = np.zeros(2)
        geo = Geodesic(np.array([0.0, 1.0]), np.vstack([x1, x2]), np.zeros((2, x1.size)), sp)
        return 0.0, geo
    try:
        geo = _solve_bvp(P, x1, x2, v_guess, region, max_iter)
        return geo.length, geo
    except (NoConvergence, StepFailure) as err:
        if not split:
            raise
        first_err = err
    mid = 0.5 * (x1 + x2)
    try:
        d1, g1 = geodesic_bvp_distance(P, x1, mid, region=region, max_iter=max_iter, split=False)
        d2, g2 = geodesic_bvp_distance(P, mid, x2, region=region, max_iter=max_iter, split=False)
    except (NoConvergence, StepFailure):
        raise NoConvergence(f"shooting failed on the chord and its halves: {first_err}",
                            getattr(first_err, "residual", None)) from None
    geo = Geodesic(np.concatenate([g1.s, g2.s[1:] + g1.s[-1]]),
                   np.vstack([g1.points, g2.points[1:]]),
                   np.vstack([g1.velocities, g2.velocities[1:]]),
                   np.concatenate([g1.speed_sq, g2.speed_sq[1:]]),
                   piecewise=True, residual=max(g1.residual, g2.residual))
    return d1 + d2, geo
