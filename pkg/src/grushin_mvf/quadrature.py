"""Gauge balls on a surface, the constant profile and mean value verdicts.

``B_r`` is the gauge ball ``{rho < r}``; on a graph it is the set of ``x``
with ``rho(x, u(x)) < r``.  Since ``rho >= |x|`` it always lies in
``[-r, r]^n``, which is the box handed to the cubature together with the
level function ``rho(x, u(x)) - r``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cubature
from .gauge import gauge
from .surface import area_element
from .tangential import SurfaceField, kernel_field

MODES = ("harmonic", "subharmonic", "superharmonic")
WORKERS_ENV = "GRUSHIN_MVF_WORKERS"


def worker_count(default=1):
    """Worker threads, overridable through the ``GRUSHIN_MVF_WORKERS`` variable."""
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _map(fn, items, workers):
    # results come back in input order, so reductions stay deterministic
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class BallRegion:
    """``B_r cap Sigma`` in graph coordinates.

    Construction checks that ``rho(x, u(x)) >= r`` on sampled points of the
    domain boundary, so the ball does not leak out of the graph.
    """

    surface: object
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"ball radius must be positive, got {self.r!r}")
        S = self.surface
        xb = S.domain.boundary_samples(S.n, count=256)
        rb = gauge(S.params, xb, S.u(xb))
        # a ball touching the boundary is allowed up to rounding
        if np.min(rb) < self.r * (1 - 1e-12):
            raise ValueError(
                f"gauge ball of radius {self.r:g} is not contained in the surface domain "
                f"(min rho on the boundary is {np.min(rb):.6g})")

    def level(self, x):
        S = self.surface
        lev = gauge(S.params, x, S.u(x)) - self.r
        if not S.domain.contains_ball(self.r):
            lev = np.maximum(lev, S.domain.level(x))
        return lev

    def indicator(self, x):
        return self.level(np.atleast_2d(x)) < 0

    def bounds(self):
        n = self.surface.n
        return -self.r * np.ones(n), self.r * np.ones(n)


def _values(g):
    if isinstance(g, SurfaceField):
        return g.values
    if callable(g):
        return g
    c = float(g)
    return lambda x: np.full(len(x), c)


def integrate_ball(S, g, r, tol=1e-8, rtol=0.0, max_cells=200_000):
    """``int_{B_r cap Sigma} g dsigma`` as a :class:`~grushin_mvf.cubature.CubatureResult`.

    ``g`` may be a :class:`SurfaceField`, a callable of ``x`` or a constant.
    """
    region = BallRegion(S, float(r))
    gv = _values(g)
    lower, upper = region.bounds()

    def integrand(x):
        return np.asarray(gv(x), dtype=float) * area_element(S, x)

    return cubature.integrate(integrand, lower, upper, tol=tol, rtol=rtol,
                              level=region.level, max_cells=max_cells)


def _weighted(S, f):
    k = kernel_field(S)
    fv = _values(f) if f is not None else None
    if fv is None:
        return k
    return lambda x: np.asarray(fv(x), dtype=float) * k(x)


def _ball_mass(S, r, tol):
    """``int_{B_r} |delta rho|^2 dsigma`` at relative accuracy ``tol``."""
    scale = r ** S.params.homogeneous_dimension
    return integrate_ball(S, _weighted(S, None), r, tol=tol * scale)


def _extrapolate(r, c):
    """Limit of ``c(r)`` as ``r -> 0`` from the smallest radii.

    Fits ``c = c0 + k r^p`` through the three smallest radii (Aitken-type
    elimination on a geometric grid) and falls back to a linear fit in ``r``
    when the exponent cannot be identified.
    """
    order = np.argsort(r)
    r, c = np.asarray(r)[order], np.asarray(c)[order]
    if len(r) < 2:
        return float(c[0])
    if len(r) >= 3:
        d1, d2 = c[1] - c[0], c[2] - c[1]
        q1, q2 = r[1] / r[0], r[2] / r[1]
        if d1 != 0 and d2 / d1 > 0 and abs(q1 - q2) < 1e-9 * q1:
            p = np.log(d2 / d1) / np.log(q1)
            if 0.25 <= p <= 8:
                return float(c[0] - d1 / (q1 ** p - 1))
    slope = (c[1] - c[0]) / (r[1] - r[0])
    return float(c[0] - slope * r[0])


@dataclass(frozen=True)
class ConstantProfile:
    r_grid: tuple
    c_of_r: tuple
    err: tuple
    c_min: float
    c_extrapolated: float
    C: float
    spread: float
    is_constant: bool
    converged: bool

    def __iter__(self):
        yield list(self.c_of_r)
        yield self.C


def constant_profile(S, r_grid, tol=1e-8, workers=None):
    """``c(r) = r^-(n+a) int_{B_r} |delta rho|^2 dsigma`` over ``r_grid`` and ``C``.

    ``C = 1 / c(r_min)`` unless the extrapolated limit of ``c`` differs from
    ``c(r_min)`` by more than ``10 tol`` relative, in which case the limit
    is used.  ``tol`` is relative to the size of each ``c(r)``.
    """
    r_grid = [float(r) for r in r_grid]
    if not r_grid:
        raise ValueError("empty radius grid")
    if any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise ValueError("radius grid must be strictly increasing")
    for r in r_grid:
        BallRegion(S, r)
    Q = S.params.homogeneous_dimension
    workers = worker_count() if workers is None else workers
    results = _map(lambda r: _ball_mass(S, r, tol), r_grid, workers)
    c = [res.value / r ** Q for res, r in zip(results, r_grid)]
    err = [res.error / r ** Q for res, r in zip(results, r_grid)]
    c_arr = np.array(c)
    spread = float((c_arr.max() - c_arr.min()) / abs(c_arr.mean()))
    c_min = c[0]
    c_ext = _extrapolate(r_grid, c)
    limit = c_ext if abs(c_ext - c_min) > 10 * tol * abs(c_min) else c_min
    return ConstantProfile(tuple(r_grid), tuple(c), tuple(err), c_min, c_ext, 1.0 / limit,
                           spread, spread <= 10 * tol, all(res.converged for res in results))


def mean_value(S, f, r, C, tol=1e-8):
    """``M(f, r) = C r^-(n+a) int_{B_r} f |delta rho|^2 dsigma``.

    Returns ``(M, error estimate)``; ``tol`` is relative to ``r^(n+a)``.
    """
    Q = S.params.homogeneous_dimension
    res = integrate_ball(S, _weighted(S, f), r, tol=tol * r ** Q)
    return C * res.value / r ** Q, abs(C) * res.error / r ** Q


def field_at_origin(S, f):
    return float(_values(f)(np.zeros((1, S.n)))[0]) + 0.0


def field_scale(S, f, r, samples=41):
    """``max |f| + 1`` over a grid of points of ``B_r``."""
    region = BallRegion(S, r)
    t = np.linspace(-r, r, samples)
    grids = np.meshgrid(*([t] * S.n), indexing="ij")
    x = np.column_stack([g.ravel() for g in grids])
    x = x[region.level(x) < 0]
    vals = np.abs(_values(f)(x)) if len(x) else np.zeros(1)
    return float(max(np.max(vals), abs(field_at_origin(S, f)))) + 1.0


def verdict(f0, M, band):
    if abs(M - f0) <= band:
        return "equal"
    return "sub" if f0 < M else "super"


_ACCEPT = {
    "harmonic": {"equal"},
    "subharmonic": {"equal", "sub"},
    "superharmonic": {"equal", "super"},
}


@dataclass
class MeanValueReport:
    mode: str
    r_grid: list
    c_of_r: list
    C: float
    c_min: float
    c_extrapolated: float
    M_of_r: list
    f_at_0: float
    verdicts: list
    err_est: list
    tol: float
    scale: float
    profile_err: list = field(default_factory=list)

    @property
    def passed(self):
        return all(v in _ACCEPT[self.mode] for v in self.verdicts)

    @property
    def failures(self):
        return [(r, v) for r, v in zip(self.r_grid, self.verdicts) if v not in _ACCEPT[self.mode]]

    CSV_COLUMNS = ("r", "c_r", "C", "M_f_r", "f0", "verdict", "err_est")

    def rows(self):
        return [
            {"r": r, "c_r": c, "C": self.C, "M_f_r": M, "f0": self.f_at_0,
             "verdict": v, "err_est": e}
            for r, c, M, v, e in zip(self.r_grid, self.c_of_r, self.M_of_r, self.verdicts,
                                     self.err_est)
        ]


def check_mvf(S, f, r_grid, mode="harmonic", tol=1e-6, quad_tol=None, profile=None,
              workers=None):
    """Compare ``f(0)`` with ``M(f, r)`` over ``r_grid``.

    The verdict at each radius is ``equal`` when ``|f(0) - M| <= tol * scale``
    with ``scale = max |f| + 1`` on the largest ball, otherwise ``sub`` or
    ``super`` by the sign of ``M - f(0)``.  ``mode`` decides which verdicts
    count as a pass.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    r_grid = [float(r) for r in r_grid]
    quad_tol = min(1e-8, 1e-3 * tol) if quad_tol is None else quad_tol
    workers = worker_count() if workers is None else workers
    if profile is None:
        profile = constant_profile(S, r_grid, tol=quad_tol, workers=workers)
    f0 = field_at_origin(S, f)
    scale = field_scale(S, f, r_grid[-1])
    means = _map(lambda r: mean_value(S, f, r, profile.C, tol=quad_tol), r_grid, workers)
    band = tol * scale
    return MeanValueReport(
        mode=mode,
        r_grid=r_grid,
        c_of_r=list(profile.c_of_r),
        C=profile.C,
        c_min=profile.c_min,
        c_extrapolated=profile.c_extrapolated,
        M_of_r=[m for m, _ in means],
        f_at_0=f0,
        verdicts=[verdict(f0, m, band) for m, _ in means],
        err_est=[e for _, e in means],
        tol=tol,
        scale=scale,
        profile_err=list(profile.err),
    )
