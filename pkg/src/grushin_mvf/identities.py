"""Pointwise certification of the differential identities on a surface.

Every identity compares two independent evaluations at random points with
``|x|`` in ``[0.1, 0.9 R]``.  Errors use the mixed measure
``|a - b| / (1 + |b|)``, which is relative for large values and absolute
near zero (where several of the quantities vanish identically).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .gauge import (AmbientField, euclidean_to_x, gauge, gauge_expression, gauge_field,
                    gauge_x_derivatives, radial_field)
from .surface import SurfacePoints
from .tangential import (METHODS, SurfaceField, _delta_nu, gauge_quadratic_form, q_sigma,
                         radial_surface_laplacian, restrict, surface_laplacian,
                         tangential_gradient, tangential_laplacian_nonadjoint, x_dot_normal)

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class IdentityResult:
    name: str
    max_err: float
    tol: float
    n_points: int

    @property
    def passed(self):
        return bool(self.max_err <= self.tol)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def mixed_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(b))))


def random_points(S, count=100, seed=0, r_min=0.1, r_frac=0.9):
    """``count`` points with ``|x|`` uniform in ``[r_min, r_frac R]``."""
    lo, hi = S.domain.bounds(S.n)
    R = float(min(np.min(-lo), np.min(hi)))
    rng = np.random.default_rng(seed)
    r = rng.uniform(r_min, r_frac * R, count)
    if S.n == 1:
        d = rng.choice([-1.0, 1.0], size=(count, 1))
    else:
        d = rng.normal(size=(count, S.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
    return r[:, None] * d


def sample_surface_field(n, seed=0):
    """A smooth, non-polynomial field on ``R^n`` with seeded coefficients."""
    c = np.random.default_rng(seed + 1).uniform(0.3, 1.2, size=(3, n))

    def expr(xs):
        lin = ad.jet_sum(float(c[0, k]) * xs[k] for k in range(n))
        wave = ad.jet_sum(float(c[1, k]) * xs[k] for k in range(n))
        quad = ad.jet_sum(float(c[2, k]) * xs[k] * xs[k] for k in range(n))
        return ad.exp(0.5 * lin) * ad.sin(wave + 0.3) + quad * xs[0]
    return SurfaceField.from_expression(expr, "sample field")


def sample_ambient_field(n, seed=0):
    """A smooth ambient field depending on ``y`` in a non-trivial way."""
    c = np.random.default_rng(seed + 2).uniform(0.3, 1.2, size=(2, n))

    def expr(xs, y):
        lin = ad.jet_sum(float(c[0, k]) * xs[k] for k in range(n))
        wave = ad.jet_sum(float(c[1, k]) * xs[k] for k in range(n))
        return ad.exp(0.4 * lin - 0.5 * y) * ad.cos(wave + y) + y * y * xs[0]
    return AmbientField.from_expression(expr, "sample ambient field")


def gauge_oracle(params, x, y):
    """X-gradient and X-Hessian of ``rho`` by nested dual numbers."""
    a = params.alpha
    z = np.column_stack([x, y])
    _, grad, hess = ad.dual_hessian(lambda c: gauge_expression(c[:-1], c[-1], a), z)
    return euclidean_to_x(params, x, grad, hess)


def _check(name, a, b, tol, m):
    return IdentityResult(name, mixed_error(a, b), tol, m)


def run_identities(S, n_points=100, seed=0, tol=DEFAULT_TOL):
    """Evaluate the identity suite on ``S``; returns a list of :class:`IdentityResult`."""
    params = S.params
    n, alpha = S.n, params.alpha
    x = random_points(S, n_points, seed)
    m = len(x)
    sp = SurfacePoints(S, x)
    y = sp.y
    nu = sp.normal
    F = sample_surface_field(n, seed)
    phi = sample_ambient_field(n, seed)
    out = []

    # sum_i delta_i nu_i = -n H
    div_nu = np.einsum("ijj->i", _delta_nu(sp))
    out.append(_check("normal_divergence", div_nu, -n * sp.H, tol, m))

    # adjoint Laplacian against the corrected non-adjoint one
    out.append(_check("adjoint_vs_corrected_laplacian",
                      surface_laplacian(S, F, sp, "adjoint"),
                      surface_laplacian(S, F, sp, "corrected"), tol, m))

    # nested Delta_Sigma against the ambient representation
    xg_phi = phi.x_derivatives(params, x, y)
    _, _, h_phi = phi(x, y)
    lphi = np.trace(h_phi[:, :n, :n], axis1=1, axis2=2) + sp.s ** (2 * alpha) * h_phi[:, n, n]
    ambient = (lphi - np.einsum("ij,ijk,ik->i", nu, xg_phi[2], nu)
               + n * sp.H * np.einsum("ij,ij->i", xg_phi[1], nu))
    out.append(_check("nonadjoint_laplacian_ambient",
                      tangential_laplacian_nonadjoint(S, restrict(phi, S), sp), ambient, tol, m))

    # gauge derivatives: closed forms against the dual-number oracle
    _, xh, _ = gauge_x_derivatives(params, x, y)
    og, oh = gauge_oracle(params, x, y)
    r = gauge(params, x, y)
    out.append(_check("x_gradient_norm", np.einsum("ij,ij->i", og, og),
                      sp.s ** (2 * alpha) * r ** (-2 * alpha), tol, m))
    out.append(_check("x_hessian_closed_form", xh.reshape(m, -1), oh.reshape(m, -1), tol, m))
    lrho_oracle = np.trace(oh[:, :n, :n], axis1=1, axis2=2) + oh[:, n, n]
    out.append(_check("grushin_of_gauge", lrho_oracle,
                      (n + alpha) * np.einsum("ij,ij->i", og, og) / r, tol, m))
    out.append(_check("gauge_quadratic_form",
                      gauge_quadratic_form(params, x, y, sp.nu_bar, sp.nu_last),
                      np.einsum("ij,ijk,ik->i", nu, oh, nu), tol, m))

    # structural function: compact and expanded forms
    out.append(_check("q_sigma_forms", q_sigma(S, sp, "expanded"), q_sigma(S, sp, "compact"),
                      tol, m))

    # <X rho, nu> factorisation
    grad_norm = sp.s ** alpha * r ** (-alpha)
    factor = grad_norm / r ** (alpha + 1) * (
        sp.s ** alpha * np.einsum("ij,ij->i", x, sp.nu_bar) + (alpha + 1) * y * sp.nu_last)
    out.append(_check("normal_projection_factorization", x_dot_normal(S, sp), factor, tol, m))

    # radial formula against the nested tangential Laplacian
    profile = (lambda t: t ** 3 + np.sin(t), lambda t: 3 * t ** 2 + np.cos(t),
               lambda t: 6 * t - np.sin(t))
    radial = radial_field(params, *profile)
    out.append(_check("radial_laplacian", radial_surface_laplacian(S, profile, sp),
                      surface_laplacian(S, radial, sp, "adjoint"), tol, m))

    # tangency of delta for surface, ambient and gauge fields
    tang = max(float(np.max(np.abs(np.einsum("ij,ij->i", tangential_gradient(S, f, sp), nu))))
               for f in (F, phi, gauge_field(params)))
    out.append(IdentityResult("tangency", tang, tol, m))

    # three routes to L_Sigma
    lap = [surface_laplacian(S, F, sp, meth) for meth in METHODS]
    err3 = max(mixed_error(lap[i], lap[j]) for i in range(3) for j in range(i + 1, 3))
    out.append(IdentityResult("laplacian_three_way", err3, tol, m))
    return out


@dataclass(frozen=True)
class AdjointPairing:
    """``lhs = int psi delta_i phi dsigma`` and ``rhs = int phi delta_i^* psi dsigma``."""

    lhs: float
    rhs: float
    scale: float
    error: float

    @property
    def sum(self):
        return self.lhs + self.rhs

    @property
    def difference(self):
        return self.lhs - self.rhs


def adjoint_pairing(S, phi_center, phi_width, psi, i, tol=1e-8):
    """Both sides of the integration by parts for ``delta_i`` against a bump ``phi``.

    The integrands vanish outside the support of ``phi``, so the cubature
    runs over that disk.  ``scale = max |phi| * max |psi|`` on the support.
    """
    from . import cubature
    from .surface import area_element
    from .tangential import adjoint_tangential, bump_field
    c = np.asarray(phi_center, dtype=float)
    w = float(phi_width)
    phi = bump_field(c, w)

    def level(x):
        return np.sum((x - c) ** 2, axis=1) - w * w

    def lhs(x):
        return psi.values(x) * tangential_gradient(S, phi, x)[:, i - 1] * area_element(S, x)

    def rhs(x):
        return phi.values(x) * adjoint_tangential(S, psi, x, i) * area_element(S, x)

    a = cubature.integrate(lhs, c - w, c + w, tol=tol, level=level, origin_levels=0)
    b = cubature.integrate(rhs, c - w, c + w, tol=tol, level=level, origin_levels=0)
    rng = np.random.default_rng(0)
    pts = c + w * rng.uniform(-1, 1, size=(2000, S.n))
    pts = pts[level(pts) < 0]
    scale = float(np.max(np.abs(phi.values(pts))) * np.max(np.abs(psi.values(pts))))
    return AdjointPairing(a.value, b.value, scale, a.error + b.error)


__all__ = ["IdentityResult", "run_identities", "random_points", "mixed_error",
           "sample_surface_field", "sample_ambient_field", "gauge_oracle",
           "AdjointPairing", "adjoint_pairing"]
