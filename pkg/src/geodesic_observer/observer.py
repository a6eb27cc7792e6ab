"""Gradient-correction observer: simulation and contraction diagnostics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import defaults
from .errors import (InsufficientSamples, LeftRegion, NoConvergence, SingularMetric,
                     StepFailure, UnsupportedQ)
from .fields import ConstantMetric, MetricField, SmoothMap, SystemModel, cholesky_checked
from .geodesics import geodesic_bvp_distance


@dataclass(frozen=True)
class GapFunction:
    """Output gap ``wp(y1, y2)`` with its gradient in the first argument."""

    eval: Callable
    grad1: Callable
    name: str = ""

    def __call__(self, y1, y2):
        return self.eval(y1, y2)


def gap_sq_distance(Q: MetricField, flat=False, psi: Optional[SmoothMap] = None) -> GapFunction:
    """Squared output distance for a constant or flat output metric.

    With ``flat=False`` the metric must be constant and the gap is
    ``(y1 - y2)^T Q (y1 - y2)``.  With ``flat=True`` a chart ``psi`` with
    ``Q = psi'^T psi'`` must be supplied and the gap is ``|psi(y1) - psi(y2)|^2``.
    """
    if flat:
        if psi is None:
            raise UnsupportedQ("a flat output metric needs its flattening chart psi")

        def ev(y1, y2):
            d = psi(np.atleast_1d(y1)) - psi(np.atleast_1d(y2))
            return float(d @ d)

        def g1(y1, y2):
            y1 = np.atleast_1d(np.asarray(y1, float))
            d = psi(y1) - psi(np.atleast_1d(y2))
            return 2.0 * psi.jacobian(y1).T @ d

        return GapFunction(ev, g1, "flat")
    if not Q.is_constant:
        raise UnsupportedQ("squared distance is only available for constant or flat output metrics")
    Qm = Q(np.zeros(Q.dim))

    def ev(y1, y2):
        d = np.atleast_1d(np.asarray(y1, float) - np.asarray(y2, float))
        return float(d @ Qm @ d)

    def g1(y1, y2):
        d = np.atleast_1d(np.asarray(y1, float) - np.asarray(y2, float))
        return 2.0 * Qm @ d

    return GapFunction(ev, g1, "constant")


@dataclass
class ObserverConfig:
    """Gain, basin radius and integration settings of a simulation."""

    gain: Union[float, Callable] = 1.0
    basin_radius: float = np.inf
    dt: float = 0.01
    horizon: float = 10.0
    rate: float = 0.0
    sample_every: int = 10
    distance: str = "geodesic"

    def __post_init__(self):
        if not callable(self.gain) and not self.gain > 0:
            raise ValueError("gain must be positive")
        if not (self.dt > 0 and self.horizon > 0 and self.sample_every >= 1):
            raise ValueError("dt, horizon and sample_every must be positive")
        if self.distance not in ("geodesic", "constant-metric", "euclidean-bound"):
            raise ValueError(f"unknown distance method {self.distance!r}")

    def gain_at(self, xhat):
        k = float(self.gain(xhat)) if callable(self.gain) else float(self.gain)
        if not k > 0:
            raise ValueError("gain must be positive")
        return k


@dataclass
class ObserverRun:
    """Sampled plant/observer trajectories and the distance between them."""

    times: np.ndarray
    states: np.ndarray
    estimates: np.ndarray
    outputs: np.ndarray
    distances: np.ndarray
    method: str
    valid: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    exit_reason: str = ""
    missing: int = 0
    gain: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def valid_count(self):
        return int(np.sum(self.valid))

    def to_csv(self):
        """CSV text: ``t,x_1..,xhat_1..,y_1..,dist,dist_method,valid``."""
        n = self.states.shape[1]
        p = self.outputs.shape[1]
        header = (["t"] + [f"x_{i + 1}" for i in range(n)] + [f"xhat_{i + 1}" for i in range(n)]
                  + [f"y_{i + 1}" for i in range(p)] + ["dist", "dist_method", "valid"])
        fmt = f"{{:.{defaults.CSV_DIGITS}g}}".format
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for k in range(self.times.size):
            row = [fmt(self.times[k])]
            row += [fmt(v) for v in self.states[k]]
            row += [fmt(v) for v in self.estimates[k]]
            row += [fmt(v) for v in self.outputs[k]]
            row += [fmt(self.distances[k]), self.method, "1" if self.valid[k] else "0"]
            writer.writerow(row)
        return buf.getvalue()


def correction_direction(model: SystemModel, P: MetricField, gap: GapFunction, xhat, y):
    """Vector ``P^-1 dh^T grad1(h(xhat), y)`` at the estimate."""
    xhat = np.asarray(xhat, dtype=float)
    L = cholesky_checked(P(xhat), xhat)
    dh = model.h.jacobian(xhat)
    covector = dh.T @ gap.grad1(model.h(xhat), y)
    return np.linalg.solve(L.T, np.linalg.solve(L, covector))


def observer_field(model: SystemModel, P: MetricField, gap: GapFunction, cfg: ObserverConfig, xhat, y):
    """Observer vector field ``f(xhat) - k_E P^-1 dh^T grad1(h(xhat), y)``."""
    xhat = np.asarray(xhat, dtype=float)
    return model.f(xhat) - cfg.gain_at(xhat) * correction_direction(model, P, gap, xhat, y)


class DistanceMeter:
    """Distance between estimate and state along a run, with warm starts."""

    def __init__(self, P: MetricField, method: str, region=None, bounds=None):
        self.P = P
        self.method = method
        self.region = region
        self.bounds = bounds
        self._v = None
        if method == "constant-metric" and not P.is_constant:
            raise ValueError("constant-metric distance requires a constant metric")
        if method == "euclidean-bound" and bounds is None:
            if region is None:
                raise ValueError("euclidean-bound distance requires eigenvalue bounds or a region")
            self.bounds = metric_eigen_bounds(P, region)

    def __call__(self, xhat, x):
        """Return ``(distance, lower, upper)``; NaN distance when unavailable."""
        delta = np.asarray(xhat, float) - np.asarray(x, float)
        if self.method == "constant-metric":
            M = self.P(np.asarray(x, float))
            d = float(np.sqrt(max(delta @ M @ delta, 0.0)))
            return d, d, d
        if self.method == "euclidean-bound":
            e = float(np.linalg.norm(delta))
            lo, hi = np.sqrt(self.bounds[0]) * e, np.sqrt(self.bounds[1]) * e
            return hi, lo, hi
        if not np.any(delta):
            return 0.0, 0.0, 0.0
        guess = None if self._v is None else self._v
        try:
            d, geo = geodesic_bvp_distance(self.P, xhat, x, v_guess=guess)
        except (NoConvergence, StepFailure, SingularMetric, LeftRegion):
            try:
                d, geo = geodesic_bvp_distance(self.P, xhat, x)
            except (NoConvergence, StepFailure, SingularMetric, LeftRegion):
                self._v = None
                return float("nan"), float("nan"), float("nan")
        self._v = None if geo.piecewise else geo.velocities[0].copy()
        return d, d, d


def metric_eigen_bounds(P: MetricField, region, seed=0, samples=defaults.SAMPLES):
    """Smallest and largest metric eigenvalues over region samples."""
    lo, hi = np.inf, 0.0
    for x in region.sample(seed, samples):
        w = np.linalg.eigvalsh(P(x))
        lo, hi = min(lo, w[0]), max(hi, w[-1])
    return lo, hi


def simulate(model: SystemModel, P: MetricField, gap: GapFunction, cfg: ObserverConfig, x0, xhat0,
             bounds=None):
    """Co-integrate plant and observer with RK4 and sample their distance.

    The run stops at the first step where the plant or the estimate leaves
    the model region; that state is kept as a last row flagged invalid and
    the run carries the exit reason.  Distance-solver failures leave NaN at that sample.
    """
    region = model.region
    x = np.array(x0, dtype=float)
    xh = np.array(xhat0, dtype=float)
    if region is not None:
        for name, pt in (("plant", x), ("observer", xh)):
            if not region.contains(pt):
                raise LeftRegion(f"{name} initial condition is outside the region", pt, 0.0)
    meter = DistanceMeter(P, cfg.distance, region, bounds)
    n = x.size
    dt = cfg.dt
    total = int(round(cfg.horizon / dt))

    def rhs(state):
        xs, xhs = state[:n], state[n:]
        y = model.h(xs)
        return np.concatenate([model.f(xs), observer_field(model, P, gap, cfg, xhs, y)])

    times, xs, xhs, ys, ds, los, his, flags = [], [], [], [], [], [], [], []
    missing = 0
    exit_reason = ""

    def record(t, state, valid=True):
        nonlocal missing
        if valid:
            d, lo, hi = meter(state[n:], state[:n])
            if not np.isfinite(d):
                missing += 1
        else:
            d = lo = hi = np.nan
        flags.append(valid)
        times.append(t)
        xs.append(state[:n].copy())
        xhs.append(state[n:].copy())
        ys.append(model.h(state[:n]))
        ds.append(d)
        los.append(lo)
        his.append(hi)

    state = np.concatenate([x, xh])
    record(0.0, state)
    for k in range(total):
        try:
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * dt * k1)
            k3 = rhs(state + 0.5 * dt * k2)
            k4 = rhs(state + dt * k3)
        except SingularMetric:
            exit_reason = f"metric singular near t={k * dt:.6g}"
            break
        state = state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if region is not None:
            for label, part in (("plant", state[:n]), ("observer", state[n:])):
                if not region.contains(part):
                    exit_reason = f"{label} left the region at t={(k + 1) * dt:.6g}"
                    break
            if exit_reason:
                record((k + 1) * dt, state, valid=False)
                break
        if (k + 1) % cfg.sample_every == 0:
            record((k + 1) * dt, state)
    p = model.p
    return ObserverRun(
        times=np.array(times), states=np.array(xs), estimates=np.array(xhs),
        outputs=np.array(ys).reshape(-1, p), distances=np.array(ds), method=cfg.distance,
        valid=np.array(flags, dtype=bool), lower=np.array(los), upper=np.array(his),
        exit_reason=exit_reason, missing=missing,
        gain=float(cfg.gain) if not callable(cfg.gain) else float("nan"),
    )


@dataclass
class CertificateReport:
    verdict: str
    rate: float
    slack: float
    checked: int
    first_violation: Optional[float]
    worst_ratio: float

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "rate": self.rate,
            "slack": self.slack,
            "checked": self.checked,
            "first_violation": self.first_violation,
            "worst_ratio": self.worst_ratio,
        }


def contraction_certificate(run: ObserverRun, rate: float, slack=defaults.ENVELOPE_SLACK):
    """Check ``d(t_{k+1}) <= d(t_k) exp(-rate dt) (1 + slack)`` over the valid window.

    For the Euclidean bound the test is made conservative by comparing the
    upper bound at ``t_{k+1}`` with the lower bound at ``t_k``.  Consecutive
    pairs with a missing distance are skipped.
    """
    mask = run.valid & np.isfinite(run.distances)
    if np.sum(mask) < defaults.MIN_CERT_SAMPLES:
        raise InsufficientSamples(f"{int(np.sum(mask))} valid distance samples, need {defaults.MIN_CERT_SAMPLES}")
    conservative = run.method == "euclidean-bound"
    first = None
    worst = 0.0
    checked = 0
    t = run.times
    for k in range(t.size - 1):
        if not (mask[k] and mask[k + 1]):
            continue
        prev = run.lower[k] if conservative else run.distances[k]
        nxt = run.upper[k + 1] if conservative else run.distances[k + 1]
        bound = prev * np.exp(-rate * (t[k + 1] - t[k])) * (1.0 + slack)
        checked += 1
        if prev > 0:
            worst = max(worst, nxt / (prev * np.exp(-rate * (t[k + 1] - t[k]))) - 1.0)
        if nxt > bound and first is None:
            first = float(t[k + 1])
    verdict = "pass" if first is None else "fail"
    return CertificateReport(verdict, float(rate), float(slack), checked, first, float(worst))


def fit_decay_rate(run: ObserverRun, start_fraction=0.5, floor=1e-12):
    """Least-squares slope of ``-log d`` over the later part of the run."""
    mask = run.valid & np.isfinite(run.distances) & (run.distances > floor)
    t = run.times[mask]
    d = run.distances[mask]
    if t.size < 2:
        return float("nan")
    keep = t >= t[0] + start_fraction * (t[-1] - t[0])
    if np.sum(keep) < 2:
        keep = np.ones_like(t, dtype=bool)
    slope = np.polyfit(t[keep], np.log(d[keep]), 1)[0]
    return float(-slope)


def _last_finite(values):
    finite = values[np.isfinite(values)]
    return float(finite[-1]) if finite.size else float("nan")


def scan_gain(model, P, gap, cfg: ObserverConfig, x0, xhat0, rate, gains=defaults.GAIN_SCAN, bounds=None):
    """Simulate with each gain in turn until one is certified.

    Returns ``(gain, run, table)``; when no gain passes, ``gain`` is None and
    ``run`` is the last run tried.
    """
    table = []
    chosen = None
    chosen_run = None
    for k in gains:
        trial = ObserverConfig(gain=k, basin_radius=cfg.basin_radius, dt=cfg.dt, horizon=cfg.horizon,
                               rate=rate, sample_every=cfg.sample_every, distance=cfg.distance)
        run = simulate(model, P, gap, trial, x0, xhat0, bounds=bounds)
        try:
            cert = contraction_certificate(run, rate)
            verdict, worst = cert.verdict, cert.worst_ratio
        except InsufficientSamples:
            verdict, worst = "inconclusive", float("nan")
        table.append({"gain": k, "verdict": verdict, "worst_ratio": worst,
                      "final_distance": _last_finite(run.distances),
                      "exit": run.exit_reason})
        chosen_run = run
        if verdict == "pass":
            chosen = k
            break
    return chosen, chosen_run, table


def gain_margin_probe(model: SystemModel, P: MetricField, gap: GapFunction, x, xhat, scale=1.0, gain=1.0):
    """Pairing of the geodesic velocity at the estimate with the scaled correction.

    The geodesic runs from ``x`` to ``xhat``; the returned number is
    ``gammadot(end)^T P(xhat) c`` where ``c = scale * gain * P^-1 dh^T grad1``.
    """
    if scale < 1:
        raise ValueError("scale must be at least 1")
    x = np.asarray(x, float)
    xhat = np.asarray(xhat, float)
    if np.array_equal(x, xhat):
        return 0.0
    _, geo = geodesic_bvp_distance(P, x, xhat)
    vel = geo.velocities[-1]
    covector = model.h.jacobian(xhat).T @ gap.grad1(model.h(xhat), model.h(x))
    # gammadot^T P (P^-1 dh^T g) = gammadot^T dh^T g
    return float(scale * gain * vel @ covector)
