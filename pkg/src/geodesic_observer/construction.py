"""Metrics with totally geodesic output fibres and their tuning.

Two constructions are provided:

* :func:`p_mod` replaces the output-direction part of any metric so that
  the output map becomes a Riemannian submersion onto ``Q``;
* :func:`build_product_metric` pulls back a direct sum ``Q + R`` through
  ``x -> (h(x), h_perp(x))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoFeasiblePoint, RankViolation, SingularBlock, SingularMetric
from .fields import (BlockDiagonalMetric, MetricField, PullbackMetric, SmoothMap, StackedMap,
                     SystemModel, cholesky_checked)
from .geometry import output_rank_check


class PModMetric(MetricField):
    """``P + dh^T [Q(h) - (dh P^-1 dh^T)^-1] dh``, evaluated lazily with exact derivatives."""

    def __init__(self, P: MetricField, Q: MetricField, h: SmoothMap, name=""):
        self.P, self.Q, self.h = P, Q, h
        super().__init__(None, P.dim, name=name or "pmod")

    def _pieces(self, x):
        x = np.asarray(x, dtype=float)
        Pm = self.P(x)
        y = self.h(x)
        dh = self.h.jacobian(x)
        output_rank_check(dh, x)
        L = cholesky_checked(Pm, x)
        Pinv_dhT = np.linalg.solve(L.T, np.linalg.solve(L, dh.T))
        G = dh @ Pinv_dhT
        return Pm, y, dh, Pinv_dhT, np.linalg.inv(G)

    def __call__(self, x):
        Pm, y, dh, _, Ginv = self._pieces(x)
        S = self.Q(y) - Ginv
        out = Pm + dh.T @ S @ dh
        return 0.5 * (out + out.T)

    def with_deriv(self, x):
        x = np.asarray(x, dtype=float)
        Pm, dP = self.P.with_deriv(x)
        y, dh, d2h = self.h.jet(x, order=2)
        output_rank_check(dh, x)
        L = cholesky_checked(Pm, x)
        Pinv = np.linalg.solve(L.T, np.linalg.solve(L, np.eye(Pm.shape[0])))
        G = dh @ Pinv @ dh.T
        Ginv = np.linalg.inv(G)
        Qm, dQ = self.Q.with_deriv(y)
        S = Qm - Ginv
        # dd[c] = d(dh)/dx_c, dPinv[c] = -Pinv dP_c Pinv
        dd = np.moveaxis(d2h, 2, 0)
        dPinv = -np.einsum("ij,cjk,kl->cil", Pinv, dP, Pinv)
        Pinv_dhT = Pinv @ dh.T
        half = np.einsum("cia,aj->cij", dd, Pinv_dhT)
        dG = half + half.transpose(0, 2, 1) + np.einsum("ia,cab,jb->cij", dh, dPinv, dh)
        dGinv = -np.einsum("ij,cjk,kl->cil", Ginv, dG, Ginv)
        dQx = np.einsum("kij,kc->cij", dQ, dh)
        dS = dQx - dGinv
        side = np.einsum("cia,ij,jb->cab", dd, S, dh)
        dPmod = dP + side + side.transpose(0, 2, 1) + np.einsum("ia,cij,jb->cab", dh, dS, dh)
        out = Pm + dh.T @ S @ dh
        return 0.5 * (out + out.T), 0.5 * (dPmod + dPmod.transpose(0, 2, 1))


def p_mod(P: MetricField, Q: MetricField, h: SmoothMap) -> PModMetric:
    return PModMetric(P, Q, h)


def schur_py(P, p: int):
    """Schur complement ``P_yy - P_yz P_zz^-1 P_zy`` of a matrix in (y, z) block order."""
    P = np.asarray(P, dtype=float)
    Pyy, Pyz = P[:p, :p], P[:p, p:]
    Pzy, Pzz = P[p:, :p], P[p:, p:]
    if Pzz.size == 0:
        return Pyy.copy()
    try:
        cond = np.linalg.cond(Pzz)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularBlock("P_zz is singular")
    return Pyy - Pyz @ np.linalg.solve(Pzz, Pzy)


@dataclass(frozen=True)
class OrthComplementMap:
    """Complementary coordinates ``h_perp`` with the metric ``R`` on their space."""

    h_perp: SmoothMap
    R: MetricField
    rank: int


class ConstructedMetric(PullbackMetric):
    """Pullback of ``Q + R`` through ``x -> (h(x), h_perp(x))``."""

    def __init__(self, Q: MetricField, ortho: OrthComplementMap, h: SmoothMap, name=""):
        theta = StackedMap([h, ortho.h_perp])
        super().__init__(theta, BlockDiagonalMetric([Q, ortho.R]), name=name or "product")
        self.Q = Q
        self.ortho = ortho
        self.h = h

    @property
    def provenance(self):
        return {"Q": self.Q.name, "R": self.ortho.R.name, "h": self.h.name, "h_perp": self.ortho.h_perp.name}


def rank_conditions(ortho: OrthComplementMap, h: SmoothMap, x, rel_tol=1e-10):
    """Raise :class:`RankViolation` unless ``dh_perp`` has the declared rank and ``(dh; dh_perp)`` is onto."""
    x = np.asarray(x, dtype=float)
    n = h.n_in
    try:
        dperp = ortho.h_perp.jacobian(x)
        stacked = np.vstack([h.jacobian(x), dperp])
    except (ZeroDivisionError, FloatingPointError, ValueError):
        raise RankViolation("Jacobians cannot be evaluated", x, 0) from None
    for mat, want, label in ((dperp, ortho.rank, "complement"), (stacked, n, "stacked")):
        if not np.all(np.isfinite(mat)):
            raise RankViolation(f"{label} Jacobian is not finite", x, 0)
        s = np.linalg.svd(mat, compute_uv=False)
        rank = int(np.sum(s > rel_tol * max(1.0, s[0])))
        if rank < want:
            raise RankViolation(f"{label} Jacobian has rank {rank} < {want}", x, rank)


def build_product_metric(Q: MetricField, ortho: OrthComplementMap, h: SmoothMap, check_points=None) -> ConstructedMetric:
    """Assemble ``dh^T Q(h) dh + dh_perp^T R(h_perp) dh_perp``.

    Rank conditions are verified at ``check_points`` when given.
    """
    if ortho.rank != h.n_in - h.n_out:
        raise RankViolation(f"complement rank must be {h.n_in - h.n_out}, declared {ortho.rank}")
    if check_points is not None:
        for x in np.atleast_2d(check_points):
            rank_conditions(ortho, h, x)
    return ConstructedMetric(Q, ortho, h)


def a2_sufficiency_lhs(model: SystemModel, ortho: OrthComplementMap, x, v, q=0.0):
    """Kernel form of the Lie derivative of a product metric.

    For ``v`` in ``ker dh`` with ``w = dh_perp v`` and ``g = dh_perp f`` returns
    ``lhs = w^T (dR . g) w + 2 (dg v)^T R w`` and ``rhs = -q w^T R w``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    dh = model.h.jacobian(x)
    output_rank_check(dh, x)
    if np.linalg.norm(dh @ v) > 1e-9 * (1.0 + np.linalg.norm(dh) * np.linalg.norm(v)):
        raise ValueError("direction is not tangent to the output level set")
    xi, J, H = ortho.h_perp.jet(x, order=2)
    fx = model.f(x)
    g = J @ fx
    dg = np.einsum("gca,c->ga", H, fx) + J @ model.f.jacobian(x)
    Rm, dR = ortho.R.with_deriv(xi)
    w = J @ v
    lhs = float(w @ np.einsum("kab,k->ab", dR, g) @ w + 2.0 * (dg @ v) @ Rm @ w)
    return lhs, float(-q * (w @ Rm @ w))


def a2_sufficiency_matrices(model: SystemModel, ortho: OrthComplementMap, x, V):
    """Matrices ``(S, T)`` with ``lhs(V c) = c^T S c`` and ``w^T R w = c^T T c``."""
    x = np.asarray(x, dtype=float)
    xi, J, H = ortho.h_perp.jet(x, order=2)
    fx = model.f(x)
    g = J @ fx
    dg = np.einsum("gca,c->ga", H, fx) + J @ model.f.jacobian(x)
    Rm, dR = ortho.R.with_deriv(xi)
    JV = J @ V
    S = JV.T @ np.einsum("kab,k->ab", dR, g) @ JV + 2.0 * (dg @ V).T @ Rm @ JV
    return 0.5 * (S + S.T), JV.T @ Rm @ JV


# tuning of the harmonic-oscillator product metric

def product_margins(a, b, q, epsilon):
    """Margins of the three scalar inequalities; all must be positive (the first may be zero)."""
    e = epsilon
    m1 = (2.0 - q) * b - 4.0 * (1.0 / e + 1.0) ** 2
    m2 = 1.0 - a * b * 4.0 / e**2 - q
    lhs = 64.0 * a**2 / e**6 * (b + 1.0 + a * b**2) ** 2 * (1.0 + 4.0 * a / e**2) ** 2
    m3 = 4.0 * (a / 2.0 * min(2.0 - q, b) * e**2 / 4.0 - q) * m2 - lhs
    return m1, m2, m3


def product_feasible(a, b, q, epsilon):
    m1, m2, m3 = product_margins(a, b, q, epsilon)
    return m1 >= 0.0 and m2 > 0.0 and m3 > 0.0


def product_gain_b(epsilon):
    return 4.0 * (1.0 / epsilon + 1.0) ** 2


def product_a_bar(epsilon, b=None):
    """Supremum of admissible ``a`` at ``q = 0`` (bisection)."""
    e = epsilon
    b = product_gain_b(e) if b is None else b

    def ok(a):
        left = a * 64.0 / e**6 * (b + 1.0 + a * b**2) ** 2 * (1.0 + 4.0 * a / e**2) ** 2
        return left < e**2 * (1.0 - 4.0 * a * b / e**2)

    lo, hi = 0.0, e**2 / (4.0 * b)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo


def tune_product_parameters(epsilon, c=1.0, depth=20):
    """Return ``(a, b, c, q)`` satisfying the three scalar inequalities.

    ``b`` is fixed by ``epsilon``; ``a`` runs down the grid ``a_bar * 2^-k``,
    ``k = 1..depth``, and for the first ``a`` admitting a positive ``q`` the
    largest admissible ``q`` is found by bisection and halved.
    """
    if not 0.0 < epsilon < 1.0:
        raise NoFeasiblePoint("epsilon must lie in (0, 1)")
    if not c > 0:
        raise NoFeasiblePoint("c must be positive")
    b = product_gain_b(epsilon)
    a_bar = product_a_bar(epsilon, b)
    for k in range(1, depth + 1):
        a = a_bar * 2.0**-k
        if not product_feasible(a, b, 0.0, epsilon):
            continue
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if product_feasible(a, b, mid, epsilon):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * hi:
                break
        q = 0.5 * lo
        if q > 0.0 and product_feasible(a, b, q, epsilon):
            return a, b, float(c), q
    raise NoFeasiblePoint(f"no admissible (a, q) found for epsilon={epsilon}")


def lagrangian_metric(a, b, c, g, structure, z):
    """Metric blocks of a lifted metric on pairs (y, z), assembled in (y, z) order.

    ``structure[mu, eta, i]`` are the structure coefficients and ``g`` the base
    metric at the current point.
    """
    g = np.asarray(g, dtype=float)
    K = np.einsum("mei,e->mi", np.asarray(structure, float), np.asarray(z, float))
    gK = g @ K
    Pyy = a * g - c * (gK + gK.T) + b * K.T @ g @ K
    Pyz = -c * g + b * gK.T
    Pzz = b * g
    return np.block([[Pyy, Pyz], [Pyz.T, Pzz]])
