"""Graph hypersurfaces ``y = u(x)`` in the Grushin space.

A :class:`GraphSurface` carries ``u`` together with exact first and second
derivatives, returned as a :class:`~grushin_mvf.autodiff.Jet`.  Catalog
surfaces (flat, radial powers, polynomials) use closed forms; custom
surfaces are differentiated by running the user's expression on jets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cubature
from .autodiff import Jet, jet_sum
from .gauge import GrushinParams


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Ball:
    """Closed ball ``|x| <= radius`` centred at the origin."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def bounds(self, n):
        return -self.radius * np.ones(n), self.radius * np.ones(n)

    def level(self, x):
        return np.einsum("ij,ij->i", x, x) - self.radius ** 2

    def contains_ball(self, r):
        return r <= self.radius

    def boundary_samples(self, n, count=64):
        return self.radius * _sphere_directions(n, count)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``lower <= x <= upper`` containing the origin."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(c) for c in self.lower)
        hi = tuple(float(c) for c in self.upper)
        if len(lo) != len(hi) or not all(a < 0 < b for a, b in zip(lo, hi)):
            raise ValueError("box must contain the origin in its interior")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def bounds(self, n):
        return np.array(self.lower), np.array(self.upper)

    def level(self, x):
        lo, hi = np.array(self.lower), np.array(self.upper)
        return np.max(np.maximum(lo - x, x - hi), axis=1)

    def contains_ball(self, r):
        return r <= min(min(-a for a in self.lower), min(self.upper))

    def boundary_samples(self, n, count=64):
        # points of the box boundary hit by rays from the origin
        d = _sphere_directions(n, count)
        lo, hi = np.array(self.lower), np.array(self.upper)
        with np.errstate(divide="ignore"):
            t = np.min(np.where(d > 0, hi / d, np.where(d < 0, lo / d, np.inf)), axis=1)
        return d * t[:, None]


def _sphere_directions(n, count):
    """Deterministic, roughly uniform unit vectors in ``R^n``."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    rng = np.random.default_rng(12345)
    d = rng.normal(size=(count, n))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# surfaces


@dataclass(frozen=True)
class GraphSurface:
    """``Sigma = {(x, u(x)) : x in domain}`` with exact derivatives of ``u``.

    ``height(x, order)`` returns a jet of ``u`` of the requested order at the
    points ``x`` (shape ``(m, n)``).
    """

    params: GrushinParams
    domain: Ball | Box
    height: Callable
    name: str = "surface"
    spec: dict = field(default_factory=dict, compare=False)

    @property
    def n(self):
        return self.params.n

    def jet(self, x, order=2):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n:
            raise ValueError(f"expected points in R^{self.n}, got shape {x.shape}")
        return self.height(x, order)

    def u(self, x):
        return self.jet(x, 0).val

    def grad(self, x):
        return self.jet(x, 1).grad

    def hess(self, x):
        return self.jet(x, 2).hess

    def points(self, x):
        return SurfacePoints(self, x)


def _flat_height(x, order):
    m, n = x.shape
    return Jet.constant(0.0, m, n, order)


def _radial_height(c, p):
    def height(x, order):
        s2 = np.einsum("ij,ij->i", x, x)
        s = np.sqrt(s2)
        val = c * s ** p
        grad = hess = None
        if order >= 1:
            with np.errstate(divide="ignore", invalid="ignore"):
                g1 = np.where(s > 0, c * p * s ** (p - 2), c * p if p == 2 else 0.0)
            grad = g1[:, None] * x
            if order >= 2:
                n = x.shape[1]
                with np.errstate(divide="ignore", invalid="ignore"):
                    g2 = np.where(s > 0, c * p * (p - 2) * s ** (p - 4), 0.0)
                hess = (g1[:, None, None] * np.eye(n)
                        + g2[:, None, None] * x[:, :, None] * x[:, None, :])
        return Jet(val, grad, hess)
    return height


def _monomial_height(terms):
    # terms: list of (coefficient, exponent tuple)
    def power(base, e):
        return base ** e if e > 0 else np.ones_like(base)

    def height(x, order):
        m, n = x.shape
        val = np.zeros(m)
        grad = np.zeros((m, n)) if order >= 1 else None
        hess = np.zeros((m, n, n)) if order >= 2 else None
        for coef, exps in terms:
            cols = [power(x[:, k], e) for k, e in enumerate(exps)]
            val += coef * np.prod(cols, axis=0)
            if order < 1:
                continue
            for i, ei in enumerate(exps):
                if ei == 0:
                    continue
                di = list(cols)
                di[i] = ei * power(x[:, i], ei - 1)
                grad[:, i] += coef * np.prod(di, axis=0)
                if order < 2:
                    continue
                for j, ej in enumerate(exps):
                    if j == i:
                        if ei < 2:
                            continue
                        dij = list(cols)
                        dij[i] = ei * (ei - 1) * power(x[:, i], ei - 2)
                    else:
                        if ej == 0:
                            continue
                        dij = list(di)
                        dij[j] = ej * power(x[:, j], ej - 1)
                    hess[:, i, j] += coef * np.prod(dij, axis=0)
        return Jet(val, grad, hess)
    return height


def _custom_height(expr):
    def height(x, order):
        out = expr(Jet.variables(x, order=max(order, 0)))
        if not isinstance(out, Jet):
            m, n = x.shape
            return Jet.constant(out, m, n, order)
        return out.truncate(order)
    return height


def _parse_monomial_terms(terms, n):
    parsed = []
    items = terms.items() if isinstance(terms, dict) else terms
    for a, b in items:
        if isinstance(a, str):
            exps, coef = _parse_monomial_string(a, n), float(b)
        elif isinstance(b, str):
            exps, coef = _parse_monomial_string(b, n), float(a)
        elif np.ndim(a) == 0:
            coef, exps = float(a), tuple(int(e) for e in b)
        else:
            exps, coef = tuple(int(e) for e in a), float(b)
        if len(exps) != n or any(e < 0 for e in exps):
            raise ValueError(f"bad exponent tuple {exps} for n={n}")
        parsed.append((coef, exps))
    return parsed


def _parse_monomial_string(text, n):
    """``"x1*x2^2"`` -> ``(1, 2)``."""
    exps = [0] * n
    for factor in text.replace(" ", "").split("*"):
        if not factor:
            continue
        name, _, power = factor.partition("^")
        if not name.startswith("x") or not name[1:].isdigit():
            raise ValueError(f"cannot parse monomial factor {factor!r}")
        k = int(name[1:]) - 1
        if not 0 <= k < n:
            raise ValueError(f"variable {name} out of range for n={n}")
        exps[k] += int(power) if power else 1
    return tuple(exps)


def make_surface(params, spec, domain=None):
    """Build a catalog or custom surface.

    ``spec`` is ``"flat"`` or a mapping with a ``kind`` key:

    * ``{"kind": "flat"}``
    * ``{"kind": "radial-power", "c": c, "m": m}`` for ``u = c |x|^m``
    * ``{"kind": "monomial", "terms": {"x1*x2": 1.0}}`` (or a list of
      ``[coefficient, [exponents]]`` pairs)
    * ``{"kind": "custom", "u": expr}`` with ``expr(xs)`` written in jet
      arithmetic

    The domain defaults to the unit ball.
    """
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.get("kind")
    domain = domain if domain is not None else Ball(1.0)
    n = params.n
    if kind == "flat":
        return GraphSurface(params, domain, _flat_height, "flat", spec)
    if kind == "radial-power":
        c, p = float(spec["c"]), float(spec["m"])
        if p < 2:
            raise ValueError(f"radial power u = c|x|^{p:g} is not C^2 at the origin (need m >= 2)")
        even_int = p == int(p) and int(p) % 2 == 0
        if not (even_int or p >= params.alpha + 1):
            raise ValueError(
                f"radial power m={p:g} is rejected: regularity at 0 is marginal unless m is an "
                f"even integer or m >= alpha + 1 = {params.alpha + 1:g}")
        return GraphSurface(params, domain, _radial_height(c, p), f"{c:g}|x|^{p:g}", spec)
    if kind == "monomial":
        terms = _parse_monomial_terms(spec["terms"], n)
        name = " + ".join(f"{c:g}*" + "*".join(f"x{k + 1}^{e}" for k, e in enumerate(ex) if e)
                          for c, ex in terms) or "0"
        return GraphSurface(params, domain, _monomial_height(terms), name, spec)
    if kind == "custom":
        expr = spec["u"]
        if not callable(expr):
            raise ValueError("custom surface needs a callable 'u'")
        return GraphSurface(params, domain, _custom_height(expr), spec.get("name", "custom"), spec)
    raise ValueError(f"unknown surface kind {kind!r}")


# ---------------------------------------------------------------------------
# pointwise geometry


class SurfacePoints:
    """Geometric quantities of a surface at a batch of points ``x != 0``.

    Holds ``u`` (order-2 jet), ``du`` (order-1 jets of the partials of
    ``u``), ``a = |x|^alpha`` and ``log_a`` (order-2 jets), the area element
    ``v`` and the normal components ``nu`` (order-1 jets, the last one being
    ``nu_{n+1}``) and the mean curvature ``H`` (values).
    """

    def __init__(self, surface, x, check=True):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = np.linalg.norm(x, axis=1)
        if check and np.any(s == 0):
            raise ValueError("surface quantities are undefined at x = 0")
        self.surface = surface
        self.params = surface.params
        self.x = x
        self.s = s
        n, alpha = surface.n, surface.params.alpha
        self.u = surface.jet(x, 2)
        coords = Jet.variables(x, order=2)
        s2 = jet_sum(c * c for c in coords)
        self.log_a = (0.5 * alpha) * s2.log()
        self.a = s2 ** (0.5 * alpha)
        self.du = [self.u.partial(k) for k in range(n)]
        a1 = self.a.truncate(1)
        self.v = (jet_sum(d * d for d in self.du) + a1 * a1).sqrt()
        inv_v = self.v.reciprocal()
        self.nu = [-(d * inv_v) for d in self.du] + [a1 * inv_v]
        self.H = jet_sum((d * inv_v).partial(k).val for k, d in enumerate(self.du)) / n

    @property
    def y(self):
        return self.u.val

    @property
    def nu_bar(self):
        return np.column_stack([c.val for c in self.nu[:-1]])

    @property
    def nu_last(self):
        return self.nu[-1].val

    @property
    def normal(self):
        return np.column_stack([c.val for c in self.nu])


@dataclass(frozen=True)
class Normal:
    nu_bar: np.ndarray
    nu_last: np.ndarray


def _points(S, x):
    return x if isinstance(x, SurfacePoints) else SurfacePoints(S, x)


def alpha_normal(S, x):
    """Upward alpha-normal ``(-grad u, |x|^alpha) / v`` at ``x != 0``."""
    sp = _points(S, x)
    return Normal(sp.nu_bar, sp.nu_last)


def area_element(S, x):
    """``v = sqrt(|grad u|^2 + |x|^(2 alpha))``; at ``x = 0`` this is ``|grad u(0)|``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = S.grad(x)
    s2 = np.einsum("ij,ij->i", x, x)
    return np.sqrt(np.einsum("ij,ij->i", g, g) + s2 ** S.params.alpha)


def mean_curvature(S, x):
    """``H = div(grad u / v) / n`` at ``x != 0``."""
    return _points(S, x).H


def euler_residual(S, x):
    """``<grad u, x> - (alpha + 1) u``; vanishes on dilation-invariant graphs."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    j = S.jet(x, 1)
    return np.einsum("ij,ij->i", j.grad, x) - (S.params.alpha + 1) * j.val


def integrate_surface(S, g, region=None, tol=1e-8, **options):
    """``int_region g dsigma = int_region g(x) v(x) dx`` by adaptive cubature.

    ``g`` maps points ``(m, n)`` to values (a :class:`SurfaceField` works
    too).  ``region`` is a :class:`Ball` or :class:`Box` inside the domain;
    it defaults to the domain.  Returns a
    :class:`~grushin_mvf.cubature.CubatureResult` (unpacks as
    ``value, error``).
    """
    region = S.domain if region is None else region
    n = S.n
    lower, upper = region.bounds(n)
    dom_lo, dom_hi = S.domain.bounds(n)
    if np.any(lower < dom_lo - 1e-12) or np.any(upper > dom_hi + 1e-12):
        raise ValueError("integration region is not inside the surface domain")
    values = getattr(g, "values", g)

    def integrand(x):
        return np.asarray(values(x), dtype=float) * area_element(S, x)

    level = region.level if isinstance(region, Ball) else None
    return cubature.integrate(integrand, lower, upper, tol=tol, level=level, **options)


def annulus_level(r_in, r_out):
    """Level function of ``r_in < |x| < r_out`` (for use with :mod:`cubature`)."""
    def level(x):
        s = np.linalg.norm(x, axis=1)
        return np.maximum(s - r_out, r_in - s)
    return level


def unit_ball_volume(n):
    """Lebesgue measure of the unit ball in ``R^n``."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)
