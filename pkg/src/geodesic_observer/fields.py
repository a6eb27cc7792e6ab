"""Smooth maps, metric fields and system models.

Fields written as jet-transparent expressions are differentiated exactly
with :mod:`geodesic_observer.jets`.  Opaque callbacks (``opaque=True``)
fall back to central finite differences with step ``1e-5 * (1 + |x_c|)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import defaults
from .errors import DimensionMismatch, SingularMetric
from .jets import derivatives


def fd_step(x):
    return defaults.FD_REL_STEP * (1.0 + np.abs(x))


def central_jacobian(fn, x, out_shape):
    """Central-difference derivative of ``fn`` at ``x``; last axis is the direction."""
    x = np.asarray(x, dtype=float)
    steps = fd_step(x)
    cols = []
    for c in range(x.size):
        e = np.zeros_like(x)
        e[c] = steps[c]
        diff = np.asarray(fn(x + e), float) - np.asarray(fn(x - e), float)
        cols.append(diff.reshape(out_shape) / (2.0 * steps[c]))
    return np.stack(cols, axis=-1)


def cholesky_checked(P, point=None):
    """Cholesky factor of ``P`` with a pivot floor of 1e-12 * trace(P) / n."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    tr = np.trace(P)
    if not np.all(np.isfinite(P)) or tr <= 0.0:
        raise SingularMetric("metric is not positive definite", point)
    try:
        L = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise SingularMetric("Cholesky factorization failed", point) from None
    if np.min(np.diag(L)) ** 2 < defaults.CHOLESKY_REL_PIVOT * tr / n:
        raise SingularMetric("Cholesky pivot below tolerance", point)
    return L


class SmoothMap:
    """A smooth map R^n_in -> R^n_out with Jacobian and Hessians.

    ``fn`` receives a 1-D array.  When ``opaque`` is false it must accept an
    object array of jets, which is the case for code built from arithmetic
    and numpy ufuncs.  Explicit ``jacobian`` / ``hessian`` callbacks take
    precedence over automatic differentiation.
    """

    def __init__(self, fn: Callable, n_in: int, n_out: int, *, jacobian=None,
                 hessian=None, opaque=False, name=""):
        self.fn = fn
        self.n_in = int(n_in)
        self.n_out = int(n_out)
        self._jacobian = jacobian
        self._hessian = hessian
        self.opaque = opaque
        self.name = name

    def expr(self, x):
        """Apply the raw expression; jets in, jets out."""
        return self.fn(x)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_in,):
            raise DimensionMismatch(f"{self.name or 'map'} expects {self.n_in} coordinates, got {x.shape}")
        return np.asarray(self.fn(x), dtype=float).reshape(self.n_out)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        if self._jacobian is not None:
            return np.asarray(self._jacobian(x), float).reshape(self.n_out, self.n_in)
        if self.opaque:
            return central_jacobian(self, x, (self.n_out,))
        _, jac, _ = derivatives(self.fn, x, order=1)
        return jac.reshape(self.n_out, self.n_in)

    def hessian(self, x):
        """Second derivatives, shape (n_out, n_in, n_in)."""
        x = np.asarray(x, dtype=float)
        if self._hessian is not None:
            return np.asarray(self._hessian(x), float).reshape(self.n_out, self.n_in, self.n_in)
        if self.opaque:
            hess = central_jacobian(self.jacobian, x, (self.n_out, self.n_in))
            return 0.5 * (hess + hess.transpose(0, 2, 1))
        _, _, hess = derivatives(self.fn, x, order=2)
        return hess.reshape(self.n_out, self.n_in, self.n_in)

    def hessian_component(self, i, x):
        return self.hessian(x)[i]

    def jet(self, x, order=2):
        """Value, Jacobian and (for order 2) Hessian in one pass."""
        x = np.asarray(x, dtype=float)
        if self.opaque or self._jacobian is not None:
            hess = self.hessian(x) if order >= 2 else None
            return self(x), self.jacobian(x), hess
        val, jac, hess = derivatives(self.fn, x, order=order)
        val = val.reshape(self.n_out)
        jac = jac.reshape(self.n_out, self.n_in)
        if hess is not None:
            hess = hess.reshape(self.n_out, self.n_in, self.n_in)
        return val, jac, hess


class StackedMap(SmoothMap):
    """Concatenation x -> (g_1(x), g_2(x), ...) of maps on the same domain."""

    def __init__(self, parts, name=""):
        n_in = parts[0].n_in
        if any(p.n_in != n_in for p in parts):
            raise DimensionMismatch("stacked maps must share their domain")
        self.parts = list(parts)
        super().__init__(self._expr, n_in, sum(p.n_out for p in parts), name=name)

    def _expr(self, x):
        return np.concatenate([np.asarray(p.expr(x), dtype=object).ravel() for p in self.parts])

    def __call__(self, x):
        return np.concatenate([p(x) for p in self.parts])

    def jacobian(self, x):
        return np.vstack([p.jacobian(x) for p in self.parts])

    def hessian(self, x):
        return np.concatenate([p.hessian(x) for p in self.parts], axis=0)

    def jet(self, x, order=2):
        jets = [p.jet(x, order) for p in self.parts]
        val = np.concatenate([j[0] for j in jets])
        jac = np.vstack([j[1] for j in jets])
        hess = np.concatenate([j[2] for j in jets], axis=0) if order >= 2 else None
        return val, jac, hess


class MetricField:
    """A field of symmetric positive-definite matrices.

    ``deriv`` returns the array ``dP`` with ``dP[c] = dP/dx_c``.
    """

    is_constant = False

    def __init__(self, fn: Callable, dim: int, *, deriv=None, opaque=False, name=""):
        self.fn = fn
        self.dim = int(dim)
        self._deriv = deriv
        self.opaque = opaque
        self.name = name

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"{self.name or 'metric'} expects {self.dim} coordinates, got {x.shape}")
        P = np.asarray(self.fn(x), dtype=float).reshape(self.dim, self.dim)
        return 0.5 * (P + P.T)

    def deriv(self, x):
        return self.with_deriv(x)[1]

    def with_deriv(self, x):
        x = np.asarray(x, dtype=float)
        n = self.dim
        if self._deriv is not None:
            return self(x), np.asarray(self._deriv(x), float).reshape(n, n, n)
        if self.opaque:
            dP = central_jacobian(self, x, (n, n))
            return self(x), np.moveaxis(dP, -1, 0)
        val, jac, _ = derivatives(self.fn, x, order=1)
        P = val.reshape(n, n)
        dP = np.moveaxis(jac.reshape(n, n, n), -1, 0)
        return 0.5 * (P + P.T), 0.5 * (dP + dP.transpose(0, 2, 1))


class ConstantMetric(MetricField):
    is_constant = True

    def __init__(self, matrix, name=""):
        M = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.matrix = 0.5 * (M + M.T)
        super().__init__(lambda x: self.matrix, M.shape[0], name=name)

    def __call__(self, x):
        return self.matrix.copy()

    def with_deriv(self, x):
        n = self.dim
        return self.matrix.copy(), np.zeros((n, n, n))


class BlockDiagonalMetric(MetricField):
    """Direct sum of metrics acting on consecutive coordinate blocks."""

    def __init__(self, blocks, name=""):
        self.blocks = list(blocks)
        self.sizes = [b.dim for b in self.blocks]
        super().__init__(None, sum(self.sizes), name=name)
        self.is_constant = all(b.is_constant for b in self.blocks)

    def with_deriv(self, x):
        x = np.asarray(x, dtype=float)
        n = self.dim
        P = np.zeros((n, n))
        dP = np.zeros((n, n, n))
        start = 0
        for b in self.blocks:
            stop = start + b.dim
            Pb, dPb = b.with_deriv(x[start:stop])
            P[start:stop, start:stop] = Pb
            dP[start:stop, start:stop, start:stop] = dPb
            start = stop
        return P, dP

    def __call__(self, x):
        return self.with_deriv(x)[0]


class PullbackMetric(MetricField):
    """Pullback ``J^T W(theta(x)) J`` of a metric ``W`` through a map ``theta``."""

    def __init__(self, theta: SmoothMap, base: MetricField, name=""):
        if theta.n_out != base.dim:
            raise DimensionMismatch("pullback map must land in the base metric's space")
        self.theta = theta
        self.base = base
        super().__init__(None, theta.n_in, name=name)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        J = self.theta.jacobian(x)
        W = self.base(self.theta(x))
        P = J.T @ W @ J
        return 0.5 * (P + P.T)

    def with_deriv(self, x):
        th, J, H = self.theta.jet(np.asarray(x, dtype=float), order=2)
        W, dW = self.base.with_deriv(th)
        P = J.T @ W @ J
        half = np.einsum("kac,kl,lb->cab", H, W, J)
        dP = half + half.transpose(0, 2, 1)
        if not self.base.is_constant:
            dP += np.einsum("mkl,mc,ka,lb->cab", dW, J, J, J)
        return 0.5 * (P + P.T), dP


@dataclass
class SystemModel:
    """Drift ``f``, output ``h`` and the region on which they are studied."""

    f: SmoothMap
    h: SmoothMap
    region: object = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.f.n_in != self.f.n_out or self.h.n_in != self.f.n_in:
            raise DimensionMismatch("drift must map R^n to R^n and the output must be defined on R^n")
        if self.h.n_out > self.h.n_in:
            raise DimensionMismatch("output dimension exceeds state dimension")

    @property
    def n(self):
        return self.f.n_in

    @property
    def p(self):
        return self.h.n_out
