"""Pointwise differential geometry of a metric field and an output map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import defaults
from .errors import DimensionMismatch, RankDeficientOutput, SingularJacobian
from .fields import MetricField, SmoothMap, cholesky_checked


@dataclass(frozen=True)
class ChristoffelTensor:
    """Christoffel symbols at a point; ``values[c, a, b]`` is the symbol with upper index c."""

    values: np.ndarray
    point: np.ndarray

    def gamma(self, a, b, c):
        return float(self.values[c, a, b])

    def contract(self, v, w=None):
        """Return the vector sum_ab Gamma^c_ab v_a w_b."""
        w = v if w is None else w
        return np.einsum("cab,a,b->c", self.values, v, w)

    def norm(self):
        return float(np.linalg.norm(self.values))


def christoffel_from(P, dP, point=None):
    """Christoffel array from a metric value and its derivatives."""
    L = cholesky_checked(P, point)
    # bracket[a, b, d] = dP_ad/dx_b + dP_bd/dx_a - dP_ab/dx_d
    bracket = dP.transpose(1, 0, 2) + dP - dP.transpose(1, 2, 0)
    n = P.shape[0]
    flat = bracket.reshape(n * n, n).T
    solved = np.linalg.solve(L.T, np.linalg.solve(L, flat))
    return 0.5 * solved.reshape(n, n, n)


def christoffel(P: MetricField, x) -> ChristoffelTensor:
    x = np.asarray(x, dtype=float)
    Pm, dP = P.with_deriv(x)
    return ChristoffelTensor(christoffel_from(Pm, dP, x), x)


def lie_derivative_metric(P: MetricField, f: SmoothMap, x):
    """Lie derivative of the metric along the vector field ``f``."""
    x = np.asarray(x, dtype=float)
    if f.n_in != P.dim or f.n_out != P.dim:
        raise DimensionMismatch("vector field and metric dimensions differ")
    Pm, dP = P.with_deriv(x)
    fx = f(x)
    Df = f.jacobian(x)
    PDf = Pm @ Df
    L = np.einsum("cab,c->ab", dP, fx) + PDf + PDf.T
    return 0.5 * (L + L.T)


def riemannian_gradient(P: MetricField, h: SmoothMap, x):
    """Columns are the gradients P^-1 dh_i^T, shape (n, p)."""
    x = np.asarray(x, dtype=float)
    L = cholesky_checked(P(x), x)
    dh = h.jacobian(x)
    return np.linalg.solve(L.T, np.linalg.solve(L, dh.T))


def riemannian_hessian(P: MetricField, h: SmoothMap, x):
    """Covariant Hessians of the output components, shape (p, n, n)."""
    x = np.asarray(x, dtype=float)
    gam = christoffel(P, x).values
    _, dh, d2h = h.jet(x, order=2)
    return d2h - np.einsum("cab,ic->iab", gam, dh)


def output_rank_check(dh, x=None):
    p = dh.shape[0]
    s = np.linalg.svd(dh, compute_uv=False)
    if s.size < p or s[-1] <= 1e-12 * max(1.0, s[0]):
        raise RankDeficientOutput(f"output Jacobian has rank < {p}", x)


def sff_parts(P: MetricField, Q: MetricField, h: SmoothMap, x):
    """Second fundamental form together with the pieces used to scale it.

    Returns ``(II, d2h, dh, gamma)`` with ``II`` of shape (p, n, n).
    """
    x = np.asarray(x, dtype=float)
    y, dh, d2h = h.jet(x, order=2)
    output_rank_check(dh, x)
    gam = christoffel(P, x).values
    Qm, dQ = Q.with_deriv(y)
    delta = christoffel_from(Qm, dQ, y)
    II = d2h - np.einsum("cab,ic->iab", gam, dh) + np.einsum("ijk,ja,kb->iab", delta, dh, dh)
    return 0.5 * (II + II.transpose(0, 2, 1)), d2h, dh, gam


def second_fundamental_form(P: MetricField, Q: MetricField, h: SmoothMap, x):
    """Second fundamental form of ``h`` between (P) and (Q), shape (p, n, n)."""
    return sff_parts(P, Q, h, x)[0]


def nullity_ratio(II, d2h, dh, gam):
    """Per-component Frobenius norm of II over its natural scale."""
    scale = 1.0 + np.linalg.norm(d2h.reshape(d2h.shape[0], -1), axis=1) + np.linalg.norm(gam) * np.linalg.norm(dh)
    return np.linalg.norm(II.reshape(II.shape[0], -1), axis=1) / scale


def transform_sff(phi: SmoothMap, psi: SmoothMap, II, x):
    """Transport a second fundamental form to new state/output coordinates.

    Solves ``Dphi^T IIbar^k Dphi = sum_i Dpsi_ki II^i`` for ``IIbar`` at
    ``phi(x)``, where ``Dpsi`` is evaluated at the output value of the point.
    ``x`` is a pair ``(state, output)``.
    """
    state, output = (np.asarray(v, dtype=float) for v in x)
    Dphi = phi.jacobian(state)
    Dpsi = psi.jacobian(output)
    for J in (Dphi, Dpsi):
        if J.shape[0] != J.shape[1] or abs(np.linalg.det(J)) <= 1e-14 * max(1.0, np.abs(J).max()) ** J.shape[0]:
            raise SingularJacobian("coordinate change is not locally invertible")
    mixed = np.einsum("ki,iab->kab", Dpsi, np.asarray(II, dtype=float))
    inv = np.linalg.inv(Dphi)
    return np.einsum("ca,kab,bd->kcd", inv.T, mixed, inv)


def curvature_component(P: MetricField, x, indices):
    """Riemann tensor component R^a_{bcd} at ``x``.

    Index order: ``R^a_{bcd} = d_b G^a_{cd} - d_d G^a_{bc}
    + G^a_{be} G^e_{dc} - G^a_{de} G^e_{bc}``, so that for a two-dimensional
    diagonal metric ``R^1_{122} = d_1 G^1_{22} - G^1_{22} G^2_{12}``.
    Derivatives of the Christoffel field use central differences.
    """
    a, b, c, d = indices
    x = np.asarray(x, dtype=float)
    gam = christoffel(P, x).values
    steps = defaults.FD_REL_STEP * (1.0 + np.abs(x))

    def d_gamma(k):
        e = np.zeros_like(x)
        e[k] = steps[k]
        return (christoffel(P, x + e).values - christoffel(P, x - e).values) / (2.0 * steps[k])

    dg_b = d_gamma(b)
    dg_d = dg_b if d == b else d_gamma(d)
    value = dg_b[a, c, d] - dg_d[a, b, c]
    value += gam[a, b, :] @ gam[:, d, c] - gam[a, d, :] @ gam[:, b, c]
    return float(value)
