"""Tangential calculus on graph surfaces.

Functions on ``Sigma`` are written in graph coordinates and extended to the
ambient space constant in ``y``; tangential derivatives do not depend on
the extension.  For such a function ``G(x)`` the X-gradient is
``(grad G, 0)``, so ``delta_j G`` only needs ``grad G`` and the normal.
Since the normal depends on ``x`` only, every tangential quantity is again a
function of ``x`` and nested derivatives are exact jet arithmetic.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .autodiff import Jet, jet_sum
from .gauge import AmbientField, gauge, gauge_x_derivatives
from .surface import SurfacePoints

METHODS = ("adjoint", "corrected", "divergence")
VARIANTS = ("compact", "expanded")


class SurfaceField:
    """Scalar function on a surface in graph coordinates.

    ``fn(x, order)`` returns a :class:`Jet` of the requested order (value,
    gradient, Hessian in ``x``) at the points ``x`` of shape ``(m, n)``.
    """

    def __init__(self, fn: Callable, name: str = "F"):
        self._fn = fn
        self.name = name

    def __repr__(self):
        return f"SurfaceField({self.name!r})"

    def jet(self, x, order=2):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self._fn(x, order)
        if not isinstance(out, Jet):
            m, n = x.shape
            return Jet.constant(out, m, n, order)
        return out.truncate(order)

    def values(self, x):
        return self.jet(x, 0).val

    __call__ = values

    @classmethod
    def from_expression(cls, expr, name="F"):
        """``expr(xs)`` maps coordinate jets to a jet (or a constant)."""
        def fn(x, order):
            out = expr(Jet.variables(x, order=order))
            if not isinstance(out, Jet):
                m, n = x.shape
                return Jet.constant(out, m, n, order)
            return out
        return cls(fn, name)

    @classmethod
    def constant(cls, c, name=None):
        def fn(x, order):
            m, n = x.shape
            return Jet.constant(c, m, n, order)
        return cls(fn, name or f"{c:g}")


def restrict(field: AmbientField, S, name=None):
    """``F(x) = phi(x, u(x))`` with derivatives by the chain rule."""
    n = S.n

    def fn(x, order):
        if order == 0:
            return Jet(field.value(x, S.u(x)))
        u = S.jet(x, 2)
        val, g, h = field(x, u.val)
        gy = g[:, n]
        grad = g[:, :n] + gy[:, None] * u.grad
        if order == 1:
            return Jet(val, grad)
        hxy = h[:, :n, n]
        cross = hxy[:, :, None] * u.grad[:, None, :]
        hess = (h[:, :n, :n] + cross + np.swapaxes(cross, 1, 2)
                + h[:, n, n][:, None, None] * u.grad[:, :, None] * u.grad[:, None, :]
                + gy[:, None, None] * u.hess)
        return Jet(val, grad, hess)
    return SurfaceField(fn, name or f"{field.name}|S")


# ---------------------------------------------------------------------------
# internal helpers on a batch of surface points


def _points(S, x):
    return x if isinstance(x, SurfacePoints) else SurfacePoints(S, x)


def _delta(sp, G):
    """``[delta_1 G, ..., delta_{n+1} G]`` for an x-only function ``G``.

    ``G`` is a jet of order >= 1; the result has one order less.
    """
    n = sp.surface.n
    d = [G.partial(k) for k in range(n)]
    proj = jet_sum(d[k] * sp.nu[k] for k in range(n))
    out = [d[j] - proj * sp.nu[j] for j in range(n)]
    out.append(-(proj * sp.nu[n]))
    return out


def _delta_values(sp, G):
    return np.column_stack([c.val for c in _delta(sp, G)])


def _delta_nu(sp):
    """Matrix ``D[j, k] = delta_j nu_k`` (values, shape ``(m, n+1, n+1)``)."""
    cached = getattr(sp, "_delta_nu_cache", None)
    if cached is None:
        cols = [_delta_values(sp, nu_k) for nu_k in sp.nu]
        cached = np.stack(cols, axis=2)
        sp._delta_nu_cache = cached
    return cached


def _delta_log_a(sp):
    cached = getattr(sp, "_delta_log_a_cache", None)
    if cached is None:
        cached = _delta_values(sp, sp.log_a)
        sp._delta_log_a_cache = cached
    return cached


def _adjoint(sp, psi, i):
    """``delta_i^* psi`` for an order >= 1 jet ``psi`` (0-based ``i``)."""
    n = sp.surface.n
    dnu = _delta_nu(sp)
    d_psi = _delta(sp, psi)[i].val
    bracket = (_delta_log_a(sp)[:, i]
               + (dnu[:, n, i] - dnu[:, i, n]) / sp.nu_last
               + n * sp.H * sp.nu[i].val)
    return -d_psi - psi.val * bracket


def _as_surface_field(S, field):
    return restrict(field, S) if isinstance(field, AmbientField) else field


def _gauge_on_surface(sp):
    xgrad, xhess, lrho = gauge_x_derivatives(sp.params, sp.x, sp.y)
    r = gauge(sp.params, sp.x, sp.y)
    return r, xgrad, xhess, lrho


# ---------------------------------------------------------------------------
# public operations


def tangential_gradient(S, field, x):
    """``delta phi = X phi - <X phi, nu> nu`` at ``(x, u(x))``, shape ``(m, n+1)``."""
    sp = _points(S, x)
    nu = sp.normal
    if isinstance(field, AmbientField):
        _, xg, _ = field.x_derivatives(S.params, sp.x, sp.y)
    else:
        g = field.jet(sp.x, 1).grad
        xg = np.column_stack([g, np.zeros(len(g))])
    proj = np.einsum("ij,ij->i", xg, nu)
    return xg - proj[:, None] * nu


def kernel(S, x):
    """``|delta rho|^2`` on the surface, the weight of the mean value formula."""
    sp = _points(S, x)
    _, xg, _, _ = _gauge_on_surface(sp)
    proj = np.einsum("ij,ij->i", xg, sp.normal)
    return np.einsum("ij,ij->i", xg, xg) - proj * proj


def kernel_field(S):
    """:func:`kernel` as a plain callable of ``x`` (defined as 0 at ``x = 0``)."""
    def k(x):
        x = np.atleast_2d(x)
        out = np.zeros(len(x))
        ok = np.any(x != 0, axis=1)
        if np.any(ok):
            out[ok] = kernel(S, x[ok])
        return out
    return k


def adjoint_tangential(S, psi, x, i):
    """``delta_i^* psi`` for ``i`` in ``1..n+1``."""
    n = S.n
    if not 1 <= i <= n + 1:
        raise ValueError(f"index i must lie in 1..{n + 1}, got {i}")
    sp = _points(S, x)
    psi = _as_surface_field(S, psi)
    return _adjoint(sp, psi.jet(sp.x, 1), i - 1)


def tangential_laplacian_nonadjoint(S, field, x):
    """``Delta_Sigma phi = sum_i delta_i delta_i phi`` by nested differentiation."""
    sp = _points(S, x)
    F = _as_surface_field(S, field).jet(sp.x, 2)
    first = _delta(sp, F)
    return sum(_delta(sp, first[i])[i].val for i in range(S.n + 1))


def _lemma_nonadjoint(sp, field):
    """``L phi - <(X^2 phi) nu, nu> + n H <X phi, nu>`` for an ambient field."""
    S = sp.surface
    n = S.n
    _, xg, xh = field.x_derivatives(S.params, sp.x, sp.y)
    nu = sp.normal
    s = np.linalg.norm(sp.x, axis=1)
    _, _, h = field(sp.x, sp.y)
    lphi = np.trace(h[:, :n, :n], axis1=1, axis2=2) + s ** (2 * S.params.alpha) * h[:, n, n]
    quad = np.einsum("ij,ijk,ik->i", nu, xh, nu)
    return lphi - quad + n * sp.H * np.einsum("ij,ij->i", xg, nu)


def surface_laplacian(S, F, x, method="adjoint"):
    """``L_Sigma F`` by one of three independent routes.

    * ``adjoint``: ``-sum_i delta_i^*(delta_i F)``.
    * ``corrected``: ``Delta_Sigma F + nu_{n+1}^2 <delta F, delta log a>
      + delta_{n+1} F delta_{n+1} log a``; ``Delta_Sigma`` comes from the
      ambient Grushin operator when ``F`` is an :class:`AmbientField` and
      from nested tangential derivatives otherwise.
    * ``divergence``: ``div(A grad F) / v`` with ``A = v I - grad u grad u^T / v``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    sp = _points(S, x)
    n = S.n
    if method == "corrected":
        if isinstance(F, AmbientField):
            lap = _lemma_nonadjoint(sp, F)
            dF = tangential_gradient(S, F, sp)
        else:
            lap = tangential_laplacian_nonadjoint(S, F, sp)
            dF = tangential_gradient(S, F, sp)
        dla = _delta_log_a(sp)
        return (lap + sp.nu_last ** 2 * np.einsum("ij,ij->i", dF, dla)
                + dF[:, n] * dla[:, n])
    J = _as_surface_field(S, F).jet(sp.x, 2)
    if method == "adjoint":
        first = _delta(sp, J)
        return -sum(_adjoint(sp, first[i], i) for i in range(n + 1))
    # divergence form
    dF = [J.partial(k) for k in range(n)]
    du = sp.du
    dot = jet_sum(du[k] * dF[k] for k in range(n))
    inv_v = sp.v.reciprocal()
    flux = [sp.v * dF[k] - dot * du[k] * inv_v for k in range(n)]
    return sum(flux[k].grad[:, k] for k in range(n)) * inv_v.val


def divergence_matrix(S, x):
    """``A = v I - grad u grad u^T / v`` at the points ``x``, shape ``(m, n, n)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = S.grad(x)
    s2 = np.einsum("ij,ij->i", x, x)
    v = np.sqrt(np.einsum("ij,ij->i", g, g) + s2 ** S.params.alpha)
    eye = np.eye(S.n)[None]
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = np.where(v[:, None, None] > 0, g[:, :, None] * g[:, None, :] / v[:, None, None], 0.0)
    return v[:, None, None] * eye - outer


def x_dot_normal(S, x):
    """``<X rho, nu>`` on the surface."""
    sp = _points(S, x)
    _, xg, _, _ = _gauge_on_surface(sp)
    return np.einsum("ij,ij->i", xg, sp.normal)


def q_sigma(S, x, variant="compact"):
    """Structural function ``q_Sigma``.

    ``compact``: ``<X rho, nu> [(n + 3a) <X rho, nu> / rho
    - 2a <x, nu_bar> / |x|^2 + n H]``.

    ``expanded``: the long form built from ``L rho``, the quadratic form
    ``<(X^2 rho) nu, nu>`` and the log-weight terms; kept for
    cross-validation.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    sp = _points(S, x)
    n, a = S.n, S.params.alpha
    r, xg, _, lrho = _gauge_on_surface(sp)
    nu = sp.normal
    xr_nu = np.einsum("ij,ij->i", xg, nu)
    if variant == "compact":
        x_nubar = np.einsum("ij,ij->i", sp.x, sp.nu_bar)
        return xr_nu * ((n + 3 * a) * xr_nu / r - 2 * a * x_nubar / sp.s ** 2 + n * sp.H)
    d_rho = xg - xr_nu[:, None] * nu
    d_log_s = _delta_log_a(sp) / a
    return (-(n + a - 1) / r * np.einsum("ij,ij->i", d_rho, d_rho)
            + lrho
            - gauge_quadratic_form(S.params, sp.x, sp.y, sp.nu_bar, sp.nu_last)
            + n * sp.H * xr_nu
            + a * sp.nu_last ** 2 * np.einsum("ij,ij->i", d_rho, d_log_s)
            + a * d_rho[:, n] * d_log_s[:, n])


def gauge_quadratic_form(params, x, y, nu_bar, nu_last):
    """Closed form of ``<(X^2 rho) nu, nu>`` for a unit vector ``nu``.

    With ``P = |X rho|^2 / rho = |x|^(2a) rho^(-2a-1)`` and ``t = <x, nu_bar>``:

        P * ( |nu_bar|^2 + 2a t^2 / |x|^2 - (2a+1) |x|^(2a) t^2 / rho^(2a+2)
              + (a+1) t y nu_last (a |x|^(-a-2) - 2(2a+1) |x|^a / rho^(2a+2))
              + (a+1) nu_last^2 (1 - (a+1)(2a+1) y^2 / rho^(2a+2)) )

    The mixed term is linear in ``t``; only the symmetric part of the
    (non-symmetric) X-Hessian contributes.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    a = params.alpha
    s = np.linalg.norm(x, axis=1)
    r = gauge(params, x, y)
    P = s ** (2 * a) * r ** (-2 * a - 1)
    R = r ** (-2 * a - 2)
    t = np.einsum("ij,ij->i", x, nu_bar)
    return P * (np.einsum("ij,ij->i", nu_bar, nu_bar)
                + 2 * a * t * t / s ** 2
                - (2 * a + 1) * s ** (2 * a) * t * t * R
                + (a + 1) * t * y * nu_last * (a * s ** (-a - 2) - 2 * (2 * a + 1) * s ** a * R)
                + (a + 1) * nu_last ** 2 * (1 - (a + 1) * (2 * a + 1) * y * y * R))


def radial_surface_laplacian(S, profile, x, variant="compact"):
    """``{phi'' + phi' (n+a-1)/rho} |delta rho|^2 + q_Sigma phi'`` at ``rho(x, u(x))``.

    ``profile`` is a triple of callables ``(phi, dphi, d2phi)``; ``phi``
    itself is not needed but accepted for symmetry with the ambient field
    constructor.
    """
    _, dphi, d2phi = profile
    sp = _points(S, x)
    n, a = S.n, S.params.alpha
    r = _gauge_on_surface(sp)[0]
    k = kernel(S, sp)
    return (d2phi(r) + dphi(r) * (n + a - 1) / r) * k + q_sigma(S, sp, variant) * dphi(r)


def bump_field(center, width, amplitude=1.0, name="bump"):
    """``amplitude * exp(-1 / (1 - |x - c|^2 / w^2))`` inside the ball, 0 outside."""
    center = np.asarray(center, dtype=float)
    width = float(width)

    def fn(x, order):
        m, n = x.shape
        inside = np.sum((x - center) ** 2, axis=1) < width ** 2
        safe = np.where(inside[:, None], x, center)
        xs = Jet.variables(safe, order=order)
        t = jet_sum(((xs[k] - center[k]) * (1.0 / width)) ** 2 for k in range(n))
        out = amplitude * ((1.0 - t).reciprocal() * -1.0).exp()
        keep = inside.astype(float)
        return Jet(out.val * keep,
                   None if out.grad is None else out.grad * keep[:, None],
                   None if out.hess is None else out.hess * keep[:, None, None])
    return SurfaceField(fn, name)
