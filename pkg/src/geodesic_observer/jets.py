"""Truncated Taylor jets for forward-mode differentiation.

A :class:`Jet` carries a value, its gradient and (optionally) its Hessian
with respect to a fixed set of seed variables.  Model code written with
plain arithmetic and numpy ufuncs (``np.sin``, ``np.exp``, ...) runs
unchanged on floats and on jets, so one expression yields values, exact
first derivatives and exact second derivatives.
"""

from __future__ import annotations

import math
import operator

import numpy as np


class Jet:
    """Second-order (or first-order when ``hess is None``) Taylor jet."""

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess=None):
        self.val = float(val)
        self.grad = grad
        self.hess = hess

    # construction helpers

    def _const(self, c):
        n = self.grad.shape[0]
        return Jet(c, np.zeros(n), None if self.hess is None else np.zeros((n, n)))

    def _chain(self, f0, f1, f2):
        """Compose a scalar function with value f0, slope f1, curvature f2."""
        g = self.grad
        hess = None
        if self.hess is not None:
            hess = f1 * self.hess + f2 * np.outer(g, g)
        return Jet(f0, f1 * g, hess)

    # arithmetic

    def __add__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            hess = None if self.hess is None or other.hess is None else self.hess + other.hess
            return Jet(self.val + other.val, self.grad + other.grad, hess)
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            hess = None if self.hess is None or other.hess is None else self.hess - other.hess
            return Jet(self.val - other.val, self.grad - other.grad, hess)
        return Jet(self.val - other, self.grad, self.hess)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Jet(other - self.val, -self.grad, None if self.hess is None else -self.hess)

    def __mul__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            a, b = self, other
            hess = None
            if a.hess is not None and b.hess is not None:
                cross = np.outer(a.grad, b.grad)
                hess = a.val * b.hess + b.val * a.hess + cross + cross.T
            return Jet(a.val * b.val, a.val * b.grad + b.val * a.grad, hess)
        return Jet(self.val * other, self.grad * other,
                   None if self.hess is None else self.hess * other)

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.val
        if v == 0.0:
            raise ZeroDivisionError("jet division by zero")
        return self._chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))

    def __truediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return (self.log() * p).exp()
        if p == 2:
            return self * self
        if p == 1:
            return self
        if p == 0:
            return self._const(1.0)
        v = self.val
        return self._chain(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def __rpow__(self, base):
        return (self * math.log(base)).exp()

    # ordering compares values only, so region predicates run on jets

    def __lt__(self, other):
        return self.val < _value(other)

    def __le__(self, other):
        return self.val <= _value(other)

    def __gt__(self, other):
        return self.val > _value(other)

    def __ge__(self, other):
        return self.val >= _value(other)

    def __repr__(self):
        return f"Jet({self.val!r}, grad={self.grad!r})"

    # elementary functions, looked up by numpy for object arrays

    def sin(self):
        s, c = math.sin(self.val), math.cos(self.val)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = math.sin(self.val), math.cos(self.val)
        return self._chain(c, -s, -c)

    def tan(self):
        t = math.tan(self.val)
        d = 1.0 + t * t
        return self._chain(t, d, 2.0 * t * d)

    def exp(self):
        e = math.exp(self.val)
        return self._chain(e, e, e)

    def log(self):
        v = self.val
        return self._chain(math.log(v), 1.0 / v, -1.0 / (v * v))

    def sqrt(self):
        r = math.sqrt(self.val)
        return self._chain(r, 0.5 / r, -0.25 / (r * self.val))

    def sinh(self):
        s, c = math.sinh(self.val), math.cosh(self.val)
        return self._chain(s, c, s)

    def cosh(self):
        s, c = math.sinh(self.val), math.cosh(self.val)
        return self._chain(c, s, c)

    def tanh(self):
        t = math.tanh(self.val)
        d = 1.0 - t * t
        return self._chain(t, d, -2.0 * t * d)

    def arctan(self):
        v = self.val
        d = 1.0 / (1.0 + v * v)
        return self._chain(math.atan(v), d, -2.0 * v * d * d)

    def arcsinh(self):
        v = self.val
        r = math.sqrt(1.0 + v * v)
        return self._chain(math.asinh(v), 1.0 / r, -v / (r * r * r))

    def square(self):
        return self * self

    def __abs__(self):
        return -self if self.val < 0 else self

    absolute = __abs__

    # numpy interoperability

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs:
            return NotImplemented
        fn = _UFUNCS.get(ufunc)
        if fn is None:
            return NotImplemented
        args = [float(a) if isinstance(a, np.generic) else a for a in inputs]
        if any(isinstance(a, np.ndarray) for a in args):
            wrapped = []
            for a in args:
                if isinstance(a, np.ndarray):
                    wrapped.append(a)
                else:
                    box = np.empty((), dtype=object)
                    box[()] = a
                    wrapped.append(box)
            return np.frompyfunc(fn, len(args), 1)(*wrapped)
        return fn(*args)


def _value(x):
    return x.val if isinstance(x, Jet) else x


def _unary(name, fallback):
    def apply(x):
        if isinstance(x, Jet):
            return getattr(x, name)()
        return fallback(x)

    return apply


_UFUNCS = {
    np.add: operator.add,
    np.subtract: operator.sub,
    np.multiply: operator.mul,
    np.true_divide: operator.truediv,
    np.power: operator.pow,
    np.negative: operator.neg,
    np.positive: operator.pos,
    np.absolute: abs,
    np.square: lambda x: x * x,
    np.sin: _unary("sin", math.sin),
    np.cos: _unary("cos", math.cos),
    np.tan: _unary("tan", math.tan),
    np.exp: _unary("exp", math.exp),
    np.log: _unary("log", math.log),
    np.sqrt: _unary("sqrt", math.sqrt),
    np.sinh: _unary("sinh", math.sinh),
    np.cosh: _unary("cosh", math.cosh),
    np.tanh: _unary("tanh", math.tanh),
    np.arctan: _unary("arctan", math.atan),
    np.arcsinh: _unary("arcsinh", math.asinh),
    np.less: operator.lt,
    np.less_equal: operator.le,
    np.greater: operator.gt,
    np.greater_equal: operator.ge,
}


def seed(x, order=2):
    """Return an object array of independent jets centred at ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    eye = np.eye(n)
    out = np.empty(n, dtype=object)
    for i in range(n):
        out[i] = Jet(x[i], eye[i].copy(), np.zeros((n, n)) if order >= 2 else None)
    return out


def unpack(result, n, order=2):
    """Split a jet-valued result into value, Jacobian and Hessian arrays.

    Constant entries (plain numbers) get zero derivatives.  The Jacobian has
    shape ``result.shape + (n,)`` and the Hessian ``result.shape + (n, n)``.
    """
    arr = np.asarray(result, dtype=object)
    shape = arr.shape
    flat = arr.ravel()
    val = np.empty(flat.size)
    jac = np.zeros((flat.size, n))
    hess = np.zeros((flat.size, n, n)) if order >= 2 else None
    for k, item in enumerate(flat):
        if isinstance(item, Jet):
            val[k] = item.val
            jac[k] = item.grad
            if hess is not None and item.hess is not None:
                hess[k] = item.hess
        else:
            val[k] = float(item)
    val = val.reshape(shape)
    jac = jac.reshape(shape + (n,))
    if hess is not None:
        hess = hess.reshape(shape + (n, n))
    return val, jac, hess


def derivatives(fn, x, order=2):
    """Evaluate ``fn`` at ``x`` with exact first (and second) derivatives."""
    x = np.asarray(x, dtype=float).ravel()
    return unpack(fn(seed(x, order)), x.size, order)
