"""Ambient Grushin calculus on R^n x R.

The horizontal fields are ``X_i = d/dx_i`` and the vertical one is
``X_{n+1} = |x|^alpha d/dy``.  Everything here is vectorised: coordinates
come as ``x`` of shape ``(m, n)`` and ``y`` of shape ``(m,)``.  The
point-based helpers (:func:`rho`, :func:`gauge_derivatives`, ...) accept an
:class:`AmbientPoint` and return plain floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import Jet

# points closer than this to the pole are treated as the pole itself
ORIGIN_EPS = 1e-300


@dataclass(frozen=True)
class GrushinParams:
    """Horizontal dimension ``n`` and degeneracy exponent ``alpha``."""

    n: int
    alpha: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def homogeneous_dimension(self):
        """``n + alpha``: the exponent in ``m(r) = r**(n + alpha)``."""
        return self.n + self.alpha


@dataclass(frozen=True)
class AmbientPoint:
    """A point ``xi = (x, y)`` of the ambient space."""

    x: tuple
    y: float

    def __post_init__(self):
        x = tuple(float(c) for c in np.atleast_1d(self.x))
        if not (np.all(np.isfinite(x)) and np.isfinite(self.y)):
            raise ValueError("ambient point coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))

    def arrays(self):
        return np.array([self.x]), np.array([self.y])


def _as_batch(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return x, np.broadcast_to(y, (x.shape[0],))


def _check_pole(x, y):
    s = np.linalg.norm(x, axis=1)
    if np.any((s < ORIGIN_EPS) & (np.abs(y) < ORIGIN_EPS)):
        raise ValueError("the gauge is not differentiable at the origin")
    return s


# ---------------------------------------------------------------------------
# the gauge function


def gauge_expression(xs, y, alpha):
    """``rho`` written with arithmetic only, so it runs on floats, duals or jets."""
    s2 = xs[0] * xs[0]
    for c in xs[1:]:
        s2 = s2 + c * c
    return (s2 ** (alpha + 1.0) + (alpha + 1.0) ** 2 * (y * y)) ** (1.0 / (2.0 * (alpha + 1.0)))


def gauge(params, x, y):
    """Vectorised gauge ``(|x|^(2(a+1)) + (a+1)^2 y^2)^(1/(2(a+1)))``."""
    x, y = _as_batch(x, y)
    a = params.alpha
    s2 = np.einsum("ij,ij->i", x, x)
    return (s2 ** (a + 1.0) + (a + 1.0) ** 2 * y * y) ** (1.0 / (2.0 * (a + 1.0)))


def rho(params, p):
    """Gauge of a single :class:`AmbientPoint`."""
    return float(gauge(params, *p.arrays())[0])


def gauge_euclidean_derivatives(params, x, y):
    """Closed-form value, Euclidean gradient and Hessian of ``rho``.

    Returns arrays of shapes ``(m,)``, ``(m, n+1)`` and ``(m, n+1, n+1)``;
    the last coordinate is ``y``.
    """
    x, y = _as_batch(x, y)
    s = _check_pole(x, y)
    a = params.alpha
    m, n = x.shape
    r = gauge(params, x, y)
    s2a = s ** (2 * a)
    r_2a1 = r ** (-(2 * a + 1))
    r_2a2 = r ** (-(2 * a + 2))

    grad = np.empty((m, n + 1))
    grad[:, :n] = x * (s2a * r_2a1)[:, None]
    grad[:, n] = (a + 1) * y * r_2a1

    with np.errstate(divide="ignore", invalid="ignore"):
        xx_s2 = np.where(s[:, None, None] > 0,
                         x[:, :, None] * x[:, None, :] / (s * s)[:, None, None], 0.0)
    xx = x[:, :, None] * x[:, None, :]
    hess = np.empty((m, n + 1, n + 1))
    hess[:, :n, :n] = (s2a * r_2a1)[:, None, None] * (
        np.eye(n) + 2 * a * xx_s2 - (2 * a + 1) * xx * (s2a * r_2a2)[:, None, None])
    cross = -(2 * a + 1) * (a + 1) * x * (s2a * y * r ** (-(4 * a + 3)))[:, None]
    hess[:, :n, n] = cross
    hess[:, n, :n] = cross
    hess[:, n, n] = (a + 1) * r_2a1 * (1 - (2 * a + 1) * (a + 1) * y * y * r_2a2)
    return r, grad, hess


def gauge_x_derivatives(params, x, y):
    """Closed-form X-gradient, X-Hessian and ``L rho`` of the gauge.

    The X-Hessian is the (non-symmetric) matrix ``H[i, j] = X_i X_j rho``.
    The mixed entries come from differentiating the gauge directly; the
    printed table they are usually copied from has a corrupted
    ``X_i X_{n+1}`` entry and drops the ``rho^(-2a-1)`` factor of the
    horizontal block.
    """
    x, y = _as_batch(x, y)
    s = _check_pole(x, y)
    a = params.alpha
    m, n = x.shape
    r = gauge(params, x, y)
    s_a = s ** a
    s2a = s_a * s_a
    r_2a1 = r ** (-(2 * a + 1))
    r_2a2 = r ** (-(2 * a + 2))

    xgrad = np.empty((m, n + 1))
    xgrad[:, :n] = x * (s2a * r_2a1)[:, None]
    xgrad[:, n] = (a + 1) * s_a * y * r_2a1

    with np.errstate(divide="ignore", invalid="ignore"):
        on_axis = s == 0
        xx_s2 = np.where(on_axis[:, None, None], 0.0,
                         x[:, :, None] * x[:, None, :] / (s * s)[:, None, None])
        s_a2 = np.where(on_axis, 0.0, s ** (a - 2))
    xx = x[:, :, None] * x[:, None, :]
    xhess = np.empty((m, n + 1, n + 1))
    xhess[:, :n, :n] = (s2a * r_2a1)[:, None, None] * (
        np.eye(n) + 2 * a * xx_s2 - (2 * a + 1) * xx * (s2a * r_2a2)[:, None, None])
    # X_i X_{n+1} rho
    xhess[:, :n, n] = (a + 1) * x * (y * r_2a1 * (a * s_a2 - (2 * a + 1) * s_a ** 3 * r_2a2))[:, None]
    # X_{n+1} X_j rho
    xhess[:, n, :n] = -(2 * a + 1) * (a + 1) * x * (s_a ** 3 * y * r ** (-(4 * a + 3)))[:, None]
    xhess[:, n, n] = (a + 1) * s2a * r_2a1 * (1 - (2 * a + 1) * (a + 1) * y * y * r_2a2)

    grad_sq = np.einsum("ij,ij->i", xgrad, xgrad)
    lrho = (n + a) * grad_sq / r
    return xgrad, xhess, lrho


def gauge_derivatives(params, p):
    """X-gradient, X-Hessian and ``L rho`` at one point (raises at the origin)."""
    xgrad, xhess, lrho = gauge_x_derivatives(params, *p.arrays())
    return xgrad[0], xhess[0], float(lrho[0])


def x_gradient_norm_sq(params, x, y):
    """``|X rho|^2 = |x|^(2a) / rho^(2a)``."""
    x, y = _as_batch(x, y)
    s = np.linalg.norm(x, axis=1)
    return (s / gauge(params, x, y)) ** (2 * params.alpha)


def euclidean_to_x(params, x, grad, hess):
    """Convert Euclidean derivatives to the X-frame.

    Given ``grad`` ``(m, n+1)`` and ``hess`` ``(m, n+1, n+1)`` of some
    ``phi`` at points with horizontal part ``x``, returns ``X phi`` and the
    matrix ``X_i X_j phi``.
    """
    x = np.atleast_2d(x)
    a = params.alpha
    n = x.shape[1]
    s = np.linalg.norm(x, axis=1)
    w = s ** a
    with np.errstate(divide="ignore", invalid="ignore"):
        dw = np.where(s[:, None] > 0, a * x * (s ** (a - 2))[:, None], 0.0)
    xgrad = grad.copy()
    xgrad[:, n] = w * grad[:, n]
    xhess = hess.copy()
    xhess[:, :n, n] = dw * grad[:, n][:, None] + w[:, None] * hess[:, :n, n]
    xhess[:, n, :n] = w[:, None] * hess[:, n, :n]
    xhess[:, n, n] = w * w * hess[:, n, n]
    return xgrad, xhess


# ---------------------------------------------------------------------------
# ambient fields


class AmbientField:
    """A C^2 function on the ambient space.

    ``evaluator(x, y)`` returns the value, the Euclidean gradient and the
    Euclidean Hessian in the ``(x, y)`` coordinates.
    """

    def __init__(self, evaluator: Callable, name: str = "field", value: Callable | None = None):
        self._evaluator = evaluator
        self._value = value
        self.name = name

    def __repr__(self):
        return f"AmbientField({self.name!r})"

    def __call__(self, x, y):
        x, y = _as_batch(x, y)
        return self._evaluator(x, y)

    def value(self, x, y):
        """Values only; fields with a value path stay defined at the pole."""
        x, y = _as_batch(x, y)
        if self._value is not None:
            return self._value(x, y)
        return self._evaluator(x, y)[0]

    @classmethod
    def from_expression(cls, expr, name="field"):
        """Build a field from ``expr(xs, y)`` written with jet-compatible arithmetic."""
        def evaluator(x, y):
            coords = Jet.variables(np.column_stack([x, y]))
            out = expr(coords[:-1], coords[-1])
            return out.val, out.grad, out.hess
        return cls(evaluator, name)

    def x_derivatives(self, params, x, y):
        val, grad, hess = self(x, y)
        xgrad, xhess = euclidean_to_x(params, np.atleast_2d(x), grad, hess)
        return val, xgrad, xhess


def gauge_field(params):
    """``rho`` itself, with closed-form derivatives."""
    return AmbientField(lambda x, y: gauge_euclidean_derivatives(params, x, y), "rho",
                        value=lambda x, y: gauge(params, x, y))


def radial_field(params, phi, dphi, d2phi, name="phi(rho)"):
    """``phi(rho)`` given ``phi`` and its first two derivatives as callables."""
    def evaluator(x, y):
        r, g, h = gauge_euclidean_derivatives(params, x, y)
        d1, d2 = dphi(r), d2phi(r)
        hess = d1[:, None, None] * h + d2[:, None, None] * g[:, :, None] * g[:, None, :]
        return phi(r), d1[:, None] * g, hess
    return AmbientField(evaluator, name, value=lambda x, y: phi(gauge(params, x, y)))


def fundamental_solution_field(params):
    """``Gamma = rho^(1-n-alpha)`` as an ambient field."""
    k = 1.0 - params.n - params.alpha
    return radial_field(params,
                        lambda r: r ** k,
                        lambda r: k * r ** (k - 1),
                        lambda r: k * (k - 1) * r ** (k - 2),
                        name="Gamma")


def fundamental_solution(params, p):
    """``rho(p)^(1-n-alpha)``; the pole is rejected."""
    x, y = p.arrays()
    _check_pole(x, y)
    return float(gauge(params, x, y)[0] ** (1.0 - params.n - params.alpha))


def grushin_operator(params, field, p):
    """``Delta_x phi + |x|^(2 alpha) d_y^2 phi`` at ``p``.

    ``p`` may be an :class:`AmbientPoint` (returns a float) or a pair of
    arrays ``(x, y)`` (returns an array).
    """
    single = isinstance(p, AmbientPoint)
    x, y = p.arrays() if single else _as_batch(*p)
    _, _, hess = field(x, y)
    n = params.n
    s = np.linalg.norm(x, axis=1)
    out = np.trace(hess[:, :n, :n], axis1=1, axis2=2) + s ** (2 * params.alpha) * hess[:, n, n]
    return float(out[0]) if single else out


def dilate(params, p, lam):
    """Anisotropic dilation ``(x, y) -> (lam x, lam^(alpha+1) y)``."""
    if not lam > 0:
        raise ValueError(f"dilation factor must be positive, got {lam!r}")
    return AmbientPoint(tuple(lam * c for c in p.x), lam ** (params.alpha + 1) * p.y)
