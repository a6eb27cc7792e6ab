"""Sampled checks of detectability, output-geodesic and submersion conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import defaults
from .errors import LeftRegion, NoConvergence, NoFeasiblePoint, SingularMetric, StepFailure
from .fields import MetricField, SmoothMap, SystemModel, cholesky_checked
from .geodesics import geodesic_bvp_distance, geodesic_ivp
from .geometry import lie_derivative_metric, nullity_ratio, output_rank_check, sff_parts
from .observer import GapFunction, gap_sq_distance

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(value, np.integer):
        return int(value)
    return value


@dataclass
class ConditionReport:
    """Outcome of a sampled check."""

    condition: str
    verdict: str
    margin: float
    witness_point: Optional[np.ndarray]
    witness_direction: Optional[np.ndarray]
    samples: int
    seed: Optional[int]
    tolerance: float
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict == FAIL and self.witness_point is None:
            raise ValueError("a failing report needs a witness")

    @property
    def passed(self):
        return self.verdict == PASS

    def to_dict(self):
        witness = None
        if self.witness_point is not None:
            witness = {"point": self.witness_point, "direction": self.witness_direction}
            if "block" in self.details:
                witness["block"] = self.details["block"]
        return _jsonable({
            "condition": self.condition,
            "verdict": self.verdict,
            "margin": self.margin,
            "witness": witness,
            "samples": self.samples,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "details": self.details,
        })


@dataclass(frozen=True)
class DistributionBasis:
    """Bases of the level-set tangent space and its metric-orthogonal complement."""

    tangent_basis: np.ndarray
    orth_basis: np.ndarray


def distributions(P: MetricField, h: SmoothMap, x) -> DistributionBasis:
    x = np.asarray(x, dtype=float)
    dh = h.jacobian(x)
    output_rank_check(dh, x)
    L = cholesky_checked(P(x), x)
    tangent = sla.null_space(dh, rcond=1e-12)
    orth = np.linalg.solve(L.T, np.linalg.solve(L, dh.T))
    return DistributionBasis(tangent, orth)


def _points(region, samples, seed, points):
    if points is not None:
        return np.atleast_2d(np.asarray(points, dtype=float))
    return region.sample(seed, samples)


def a2_kernel_eigen(model: SystemModel, P: MetricField, x):
    """Largest generalized eigenvalue of the Lie derivative on ker dh, with its direction."""
    basis = distributions(P, model.h, x)
    V = basis.tangent_basis
    Lf = lie_derivative_metric(P, model.f, x)
    lhs = V.T @ Lf @ V
    rhs = V.T @ P(x) @ V
    w, vecs = sla.eigh(0.5 * (lhs + lhs.T), 0.5 * (rhs + rhs.T))
    return float(w[-1]), V @ vecs[:, -1]


def check_a2(model: SystemModel, P: MetricField, region=None, samples=defaults.SAMPLES, seed=0,
             q_min=defaults.A2_Q_MIN, points=None) -> ConditionReport:
    """Detectability check restricted to the kernel of the output Jacobian.

    ``q_est = -max_x lambda(x)`` where ``lambda(x)`` is the largest eigenvalue
    of the pencil ``(V^T L_f P V, V^T P V)``; pass iff ``q_est >= q_min``.
    """
    region = model.region if region is None else region
    pts = _points(region, samples, seed, points)
    if model.n == model.p:
        return ConditionReport("a2", PASS, math.inf, None, None, len(pts), seed, q_min,
                               {"q_est": math.inf, "note": "empty tangent space"})
    worst, wpt, wdir = -math.inf, None, None
    for x in pts:
        lam, direction = a2_kernel_eigen(model, P, x)
        if lam > worst:
            worst, wpt, wdir = lam, x, direction
    q_est = -worst
    verdict = PASS if q_est >= q_min else FAIL
    return ConditionReport("a2", verdict, q_est, wpt, wdir, len(pts), seed, q_min,
                           {"q_est": q_est, "q_min": q_min})


def rho_certificate(model: SystemModel, P: MetricField, x, q, rel_tol=1e-10):
    """Smallest rho >= 0 with ``L_f P - rho dh^T dh + q P <= 0`` at ``x`` (bisection)."""
    x = np.asarray(x, dtype=float)
    Lf = lie_derivative_metric(P, model.f, x)
    Pm = P(x)
    dh = model.h.jacobian(x)
    G = dh.T @ dh
    base = Lf + q * Pm
    scale = 1.0 + np.linalg.norm(base)

    def ok(rho):
        return np.linalg.eigvalsh(base - rho * G)[-1] <= 1e-12 * scale

    if ok(0.0):
        return 0.0
    hi = 1.0
    while not ok(hi):
        hi *= 2.0
        if hi > 1e16:
            raise NoFeasiblePoint("no finite rho satisfies the inequality at this point")
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class SFFBlocks:
    """Second fundamental form split along tangent (t) and orthogonal (o) directions."""

    tt: np.ndarray
    oo: np.ndarray
    mixed: np.ndarray

    def norms(self):
        return {
            "tangent-tangent": float(np.linalg.norm(self.tt)),
            "orth-orth": float(np.linalg.norm(self.oo)),
            "mixed": float(np.linalg.norm(self.mixed)),
        }


def blocks_from(II, basis: DistributionBasis) -> SFFBlocks:
    V, W = basis.tangent_basis, basis.orth_basis
    tt = np.einsum("ap,iab,bq->ipq", V, II, V)
    oo = np.einsum("ap,iab,bq->ipq", W, II, W)
    mixed = np.einsum("ap,iab,bq->ipq", W, II, V)
    return SFFBlocks(tt, oo, mixed)


def sff_blocks(P: MetricField, Q: MetricField, h: SmoothMap, x) -> SFFBlocks:
    II = sff_parts(P, Q, h, x)[0]
    return blocks_from(II, distributions(P, h, x))


def _block_witness(blocks: SFFBlocks, basis: DistributionBasis, scale=1.0, tol=defaults.NULLITY_TOL):
    """First block in the order tangent-tangent, mixed, orth-orth exceeding the tolerance.

    The tangent-tangent block comes first because it alone decides whether
    output level sets are totally geodesic.  Block norms are normalized by
    ``scale`` and by the norms of the bases they are built from.
    """
    V, W = basis.tangent_basis, basis.orth_basis
    nv, nw = np.linalg.norm(V, 2), np.linalg.norm(W, 2)
    raw = blocks.norms()
    rel = {"tangent-tangent": raw["tangent-tangent"] / (scale * nv * nv),
           "mixed": raw["mixed"] / (scale * nv * nw),
           "orth-orth": raw["orth-orth"] / (scale * nw * nw)}
    name = next((k for k in ("tangent-tangent", "mixed", "orth-orth") if rel[k] > tol), None)
    if name is None:
        name = max(rel, key=rel.get)
    if name == "tangent-tangent":
        mats, left = blocks.tt, V
    elif name == "orth-orth":
        mats, left = blocks.oo, W
    else:
        mats, left = blocks.mixed, None
    i = int(np.argmax([np.linalg.norm(m) for m in mats]))
    if left is None:
        _, _, vt = np.linalg.svd(mats[i])
        direction = V @ vt[0]
    else:
        w, vecs = np.linalg.eigh(mats[i])
        direction = left @ vecs[:, int(np.argmax(np.abs(w)))]
    return name, i, direction / np.linalg.norm(direction)


def check_a3_nullity(model: SystemModel, P: MetricField, Q: MetricField, region=None,
                     samples=defaults.SAMPLES, seed=0, tol=defaults.NULLITY_TOL, points=None) -> ConditionReport:
    """Sufficient output-geodesic test: the second fundamental form vanishes at every sample."""
    region = model.region if region is None else region
    pts = _points(region, samples, seed, points)
    worst, wpt = -1.0, None
    for x in pts:
        II, d2h, dh, gam = sff_parts(P, Q, model.h, x)
        r = float(np.max(nullity_ratio(II, d2h, dh, gam)))
        if r > worst:
            worst, wpt, wII = r, x, II
    if worst <= tol:
        return ConditionReport("a3-nullity", PASS, worst, None, None, len(pts), seed, tol)
    basis = distributions(P, model.h, wpt)
    blocks = blocks_from(wII, basis)
    _, wd2h, wdh, wgam = sff_parts(P, Q, model.h, wpt)
    scale = 1.0 + float(np.linalg.norm(wd2h)) + float(np.linalg.norm(wgam)) * float(np.linalg.norm(wdh))
    name, comp, direction = _block_witness(blocks, basis, scale, tol)
    details = {"block": name, "component": comp, "block_norms": blocks.norms()}
    return ConditionReport("a3-nullity", FAIL, worst, wpt, direction, len(pts), seed, tol, details)


def submersion_residual(P: MetricField, Q: MetricField, h: SmoothMap, x):
    """Relative gap between ``(dh P^-1 dh^T)^-1`` and ``Q(h(x))`` and the difference matrix."""
    x = np.asarray(x, dtype=float)
    dh = h.jacobian(x)
    output_rank_check(dh, x)
    L = cholesky_checked(P(x), x)
    Z = np.linalg.solve(L, dh.T)
    induced = np.linalg.inv(Z.T @ Z)
    Qm = Q(h(x))
    diff = induced - Qm
    return float(np.linalg.norm(diff) / np.linalg.norm(Qm)), diff


def check_submersion(P: MetricField, Q: MetricField, h: SmoothMap, region, samples=defaults.SAMPLES,
                     seed=0, tol=defaults.SUBMERSION_TOL, points=None) -> ConditionReport:
    pts = _points(region, samples, seed, points)
    worst, wpt, wdiff = -1.0, None, None
    for x in pts:
        r, diff = submersion_residual(P, Q, h, x)
        if r > worst:
            worst, wpt, wdiff = r, x, diff
    if worst <= tol:
        return ConditionReport("submersion", PASS, worst, None, None, len(pts), seed, tol)
    w, vecs = np.linalg.eigh(0.5 * (wdiff + wdiff.T))
    direction = vecs[:, int(np.argmax(np.abs(w)))]
    return ConditionReport("submersion", FAIL, worst, wpt, direction, len(pts), seed, tol)


def monotonicity_profile(geo, h: SmoothMap, gap: GapFunction, same_tol=1e-10):
    """Most negative signed derivative of ``s -> gap(h(gamma(s)), h(gamma(s3)))``.

    For each pair of samples ``(s3, s)`` with distinct outputs the derivative
    at ``s`` must be positive when moving away from ``s3``.  Returns the
    minimum signed value and the sample index where it occurs.
    """
    ys = np.array([h(p) for p in geo.points])
    dys = np.array([h.jacobian(p) @ v for p, v in zip(geo.points, geo.velocities)])
    worst, where = math.inf, None
    m = len(ys)
    scale = 1.0 + np.max(np.abs(ys))
    for j in range(m):
        for k in range(m):
            if k == j or np.linalg.norm(ys[k] - ys[j]) <= same_tol * scale:
                continue
            deriv = float(gap.grad1(ys[k], ys[j]) @ dys[k])
            signed = deriv if k > j else -deriv
            if signed < worst:
                worst, where = signed, k
    return worst, where


def check_geodesic_monotonicity_direct(P: MetricField, Q: MetricField, h: SmoothMap, region,
                                       trials=200, seed=0, gap: Optional[GapFunction] = None,
                                       span=0.3, tol=defaults.MONOTONICITY_TOL) -> ConditionReport:
    """Monte-Carlo search for a geodesic along which the output gap is not monotone.

    Each trial picks a region point and a direction (pure level-set tangent
    on even trials, a random mix on odd ones), shoots a geodesic whose
    initial coordinate speed is ``span`` times the narrowest box width, in
    both senses from there (halved while it leaves the region),
    re-solves the boundary-value problem
    between its ends and inspects the output gap along the result.
    """
    gap = gap_sq_distance(Q) if gap is None else gap
    rng = np.random.default_rng(seed)
    centres = region.sample(seed, trials)
    width = float(np.min(region.upper - region.lower))
    completed, skipped, inconclusive = 0, 0, 0
    worst = math.inf
    witness, wdir = None, None
    for t, x0 in enumerate(centres):
        basis = distributions(P, h, x0)
        V, W = basis.tangent_basis, basis.orth_basis
        u = V @ rng.standard_normal(V.shape[1])
        if t % 2 == 1:
            u = u + W @ rng.standard_normal(W.shape[1]) / max(np.linalg.norm(W), 1e-300)
        u = u / np.linalg.norm(u) * span * width
        ends = None
        for _ in range(24):
            try:
                ends = [geodesic_ivp(P, x0, sgn * u, 1.0, region=region).points[-1] for sgn in (-1.0, 1.0)]
                break
            except LeftRegion:
                u = 0.5 * u
            except (SingularMetric, StepFailure):
                break
        if ends is None:
            skipped += 1
            continue
        try:
            _, geo = geodesic_bvp_distance(P, ends[0], ends[1], region=region)
        except (NoConvergence, StepFailure, LeftRegion, SingularMetric):
            inconclusive += 1
            continue
        completed += 1
        value, k = monotonicity_profile(geo, h, gap)
        if value < worst:
            worst = value
            witness, wdir = geo.points[k], geo.velocities[k]
        if worst < -tol:
            break
    details = {"completed": completed, "skipped": skipped, "inconclusive": inconclusive, "span": span}
    margin = worst if completed else math.nan
    if completed and worst < -tol:
        return ConditionReport("a3-direct", FAIL, margin, witness, wdir, completed, seed, tol, details)
    if completed == 0:
        return ConditionReport("a3-direct", INCONCLUSIVE, margin, None, None, 0, seed, tol, details)
    return ConditionReport("a3-direct", PASS, margin, None, None, completed, seed, tol, details)
