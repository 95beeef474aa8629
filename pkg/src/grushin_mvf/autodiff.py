"""Forward-mode automatic differentiation.

Two independent implementations live here:

* :class:`Dual` -- a plain dual number ``re + du*eps``.  Components may
  themselves be duals, so nesting two levels gives exact second
  derivatives.  It is slow and simple; it is used as the oracle that the
  closed-form formulas are checked against.
* :class:`Jet` -- a truncated second-order Taylor expansion (value,
  gradient, Hessian) of a *batch* of scalar functions of ``n`` variables.
  All arithmetic is vectorised over the leading batch axis, which is what
  the surface calculus and the quadrature run on.

The module-level functions (:func:`sqrt`, :func:`exp`, ...) dispatch on the
argument type so that one expression can be evaluated on floats, numpy
arrays, duals or jets.
"""

from __future__ import annotations

import numpy as np


class Dual:
    """Dual number ``re + du * eps`` with ``eps**2 = 0``."""

    __slots__ = ("re", "du")
    __array_priority__ = 1000

    def __init__(self, re, du=0.0):
        self.re = re
        self.du = du

    def __repr__(self):
        return f"Dual({self.re!r}, {self.du!r})"

    @staticmethod
    def _lift(other):
        return other if isinstance(other, Dual) else Dual(other, 0.0)

    def __add__(self, other):
        other = self._lift(other)
        return Dual(self.re + other.re, self.du + other.du)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        return Dual(self.re - other.re, self.du - other.du)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return Dual(-self.re, -self.du)

    def __mul__(self, other):
        other = self._lift(other)
        return Dual(self.re * other.re, self.re * other.du + self.du * other.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        return Dual(self.re / other.re,
                    (self.du * other.re - self.re * other.du) / (other.re * other.re))

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise TypeError("dual exponents are not supported")
        return Dual(self.re ** p, p * self.re ** (p - 1) * self.du)

    def sqrt(self):
        root = sqrt(self.re)
        return Dual(root, self.du / (2.0 * root))

    def exp(self):
        e = exp(self.re)
        return Dual(e, e * self.du)

    def log(self):
        return Dual(log(self.re), self.du / self.re)

    def sin(self):
        return Dual(sin(self.re), cos(self.re) * self.du)

    def cos(self):
        return Dual(cos(self.re), -sin(self.re) * self.du)


def dual_hessian(f, z):
    """Value, gradient and Hessian of ``f`` at ``z`` by nested duals.

    ``f`` takes a list of coordinates and returns a scalar expression.  ``z``
    has shape ``(d,)`` or ``(m, d)``; the outputs are batched accordingly.
    One nested evaluation is spent per unordered pair ``(i, j)``.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    m, d = z.shape
    grad = np.zeros((m, d))
    hess = np.zeros((m, d, d))
    val = None
    for i in range(d):
        for j in range(i, d):
            coords = [
                Dual(Dual(z[:, k], float(k == j)), Dual(float(k == i), 0.0))
                for k in range(d)
            ]
            out = f(coords)
            val = np.broadcast_to(out.re.re, (m,)).astype(float)
            grad[:, j] = out.re.du
            grad[:, i] = out.du.re
            hess[:, i, j] = hess[:, j, i] = out.du.du
    if single:
        return val[0], grad[0], hess[0]
    return val, grad, hess


class Jet:
    """Second-order Taylor jet of a batch of scalar functions of ``n`` variables.

    ``val`` has shape ``(m,)``, ``grad`` ``(m, n)`` and ``hess`` ``(m, n, n)``.
    A jet of order 1 has ``hess=None``; order 0 also has ``grad=None``.
    Binary operations truncate to the lower order of their operands.
    """

    __slots__ = ("val", "grad", "hess")
    __array_priority__ = 1000

    def __init__(self, val, grad=None, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess if grad is not None else None

    @property
    def order(self):
        if self.hess is not None:
            return 2
        return 1 if self.grad is not None else 0

    @classmethod
    def variables(cls, x, order=2):
        """Seed jets for the coordinates of the points ``x`` (shape ``(m, n)``)."""
        x = np.asarray(x, dtype=float)
        m, n = x.shape
        jets = []
        for k in range(n):
            grad = np.zeros((m, n)) if order >= 1 else None
            if grad is not None:
                grad[:, k] = 1.0
            hess = np.zeros((m, n, n)) if order >= 2 else None
            jets.append(cls(x[:, k].copy(), grad, hess))
        return jets

    @classmethod
    def constant(cls, c, m, n, order=2):
        val = np.broadcast_to(np.asarray(c, dtype=float), (m,)).copy()
        grad = np.zeros((m, n)) if order >= 1 else None
        hess = np.zeros((m, n, n)) if order >= 2 else None
        return cls(val, grad, hess)

    def __repr__(self):
        return f"Jet(order={self.order}, val={self.val!r})"

    def truncate(self, order):
        if order >= self.order:
            return self
        return Jet(self.val, self.grad if order >= 1 else None, None)

    def partial(self, k):
        """Jet of the ``k``-th partial derivative (one order lower)."""
        if self.grad is None:
            raise ValueError("cannot differentiate an order-0 jet")
        return Jet(self.grad[:, k], None if self.hess is None else self.hess[:, k, :])

    def _apply(self, f0, f1, f2):
        # chain rule for a scalar function with derivatives f1, f2 at self.val
        grad = hess = None
        if self.grad is not None:
            grad = f1[:, None] * self.grad
            if self.hess is not None:
                hess = (f1[:, None, None] * self.hess
                        + f2[:, None, None] * self.grad[:, :, None] * self.grad[:, None, :])
        return Jet(f0, grad, hess)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.val + other, self.grad, self.hess)
        order = min(self.order, other.order)
        a, b = self.truncate(order), other.truncate(order)
        return Jet(a.val + b.val,
                   None if order < 1 else a.grad + b.grad,
                   None if order < 2 else a.hess + b.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val,
                   None if self.grad is None else -self.grad,
                   None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other, dtype=float)
            return Jet(self.val * c,
                       None if self.grad is None else self.grad * c[..., None],
                       None if self.hess is None else self.hess * c[..., None, None])
        order = min(self.order, other.order)
        a, b = self.truncate(order), other.truncate(order)
        grad = hess = None
        if order >= 1:
            grad = a.grad * b.val[:, None] + b.grad * a.val[:, None]
        if order >= 2:
            cross = a.grad[:, :, None] * b.grad[:, None, :]
            hess = (a.hess * b.val[:, None, None] + b.hess * a.val[:, None, None]
                    + cross + np.swapaxes(cross, 1, 2))
        return Jet(a.val * b.val, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.val
        return self._apply(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            raise TypeError("jet exponents are not supported")
        v = self.val
        if p == 2:
            return self * self
        return self._apply(v ** p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def sqrt(self):
        root = np.sqrt(self.val)
        return self._apply(root, 0.5 / root, -0.25 / (root * self.val))

    def exp(self):
        e = np.exp(self.val)
        return self._apply(e, e, e)

    def log(self):
        inv = 1.0 / self.val
        return self._apply(np.log(self.val), inv, -inv * inv)

    def sin(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._apply(s, c, -s)

    def cos(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._apply(c, -s, -c)


def _dispatch(name, npfunc):
    def f(z):
        if isinstance(z, (Dual, Jet)):
            return getattr(z, name)()
        return npfunc(z)
    f.__name__ = name
    return f


sqrt = _dispatch("sqrt", np.sqrt)
exp = _dispatch("exp", np.exp)
log = _dispatch("log", np.log)
sin = _dispatch("sin", np.sin)
cos = _dispatch("cos", np.cos)


def jet_sum(terms):
    """Sum a non-empty sequence of jets (or arrays) left to right."""
    terms = list(terms)
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total
