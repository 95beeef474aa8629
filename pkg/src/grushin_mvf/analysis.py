"""Harmonicity of surfaces at the origin and the flatness certificate."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .quadrature import BallRegion
from .surface import _sphere_directions, alpha_normal, make_surface, mean_curvature
from .tangential import q_sigma, surface_laplacian

CLASSES = ("harmonic", "subharmonic", "superharmonic", "indefinite")


def _inradius(S):
    lo, hi = S.domain.bounds(S.n)
    return float(min(np.min(-lo), np.min(hi)))


def sample_points(S, radii, n_dirs=16):
    """Points ``r * d`` for every radius and ``n_dirs`` fixed directions."""
    d = _sphere_directions(S.n, n_dirs)
    radii = np.asarray(radii, dtype=float)
    return (radii[:, None, None] * d[None]).reshape(-1, S.n)


@dataclass(frozen=True)
class HarmonicityVerdict:
    classification: str
    q_min: float
    q_max: float
    radii: tuple
    n_samples: int
    tol: float

    def to_dict(self):
        return asdict(self)


def classify_harmonicity(S, radii=None, n_dirs=16, tol=1e-9, variant="compact"):
    """Sign pattern of ``q_Sigma`` on the sampled points.

    ``harmonic`` when ``max |q| <= tol``, ``subharmonic`` when ``q >= -tol``
    everywhere and ``q > tol`` somewhere, ``superharmonic`` symmetrically,
    ``indefinite`` otherwise.
    """
    if radii is None:
        radii = _inradius(S) * np.linspace(0.1, 1.0, 10)
    radii = tuple(float(r) for r in radii)
    if min(radii) <= 0:
        raise ValueError("sample radii must be positive")
    q = q_sigma(S, sample_points(S, radii, n_dirs), variant)
    lo, hi = float(np.min(q)), float(np.max(q))
    if max(abs(lo), abs(hi)) <= tol:
        cls = "harmonic"
    elif lo >= -tol:
        cls = "subharmonic"
    elif hi <= tol:
        cls = "superharmonic"
    else:
        cls = "indefinite"
    return HarmonicityVerdict(cls, lo, hi, radii, len(q), tol)


def _eta_ratios(S, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    j = S.jet(x, 1)
    num = (S.params.alpha + 1) * np.abs(j.val)
    den = np.abs(np.einsum("ij,ij->i", x, j.grad))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, np.where(num > 0, np.inf, 0.0))
    return ratio


def eta_flatness(S, samples):
    """``sup (a+1)|u| / |<x, grad u>|`` over the samples.

    A sample where both vanish contributes 0; one where only the
    denominator vanishes makes the result ``inf``.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if np.any(np.linalg.norm(samples, axis=1) == 0):
        raise ValueError("samples must avoid x = 0")
    return float(np.max(_eta_ratios(S, samples)))


def growth_envelope_check(S, eta, samples, n_sphere=256):
    """Check ``|u(x)| <= max_{|x|=1}|u| * |x|^((a+1)/eta)`` on ``|x| <= 1``.

    Returns ``(ok, worst)`` where ``worst`` is the largest ratio of the two
    sides (1 means equality).
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    if _inradius(S) < 1.0 - 1e-12:
        raise ValueError("the envelope check needs the unit ball inside the domain")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    s = np.linalg.norm(samples, axis=1)
    if np.any(s > 1 + 1e-12):
        raise ValueError("samples must lie in the closed unit ball")
    m1 = float(np.max(np.abs(S.u(_sphere_directions(S.n, n_sphere)))))
    lhs = np.abs(S.u(samples))
    rhs = m1 * s ** ((S.params.alpha + 1) / eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    worst = float(np.max(ratio))
    return worst <= 1 + 1e-10, worst


@dataclass
class FlatnessCertificate:
    eta_hat: float
    eta_bound: float
    condition_i: bool
    condition_ii_samples: list
    condition_ii: bool
    overall: bool
    tol: float
    q_spot_min: float | None = None
    spot_check: bool | None = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["condition_ii_samples"] = [{"r": r, "ratio": q} for r, q in self.condition_ii_samples]
        return d


def curvature_ratio(S, x):
    """``|x|^2 H / <nu_bar, x>`` with ``0/0 -> 0`` and ``c/0 -> inf``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    H = mean_curvature(S, x)
    t = np.einsum("ij,ij->i", alpha_normal(S, x).nu_bar, x)
    num = np.einsum("ij,ij->i", x, x) * H
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(t != 0, num / t, np.where(num != 0, np.inf, 0.0))


def subharmonicity_certificate(S, tol=1e-6, k_max=10, n_dirs=16):
    """Test the two sufficient conditions for ``q_Sigma >= 0`` near 0.

    (i) ``eta_hat < (n+a)/(n+3a)`` over the dyadic sweep ``R 2^-k``;
    (ii) ``|x|^2 H / <nu_bar, x>`` tends to 0, accepted when its largest
    magnitude over directions is non-increasing on the last three radii and
    at most ``tol`` on the last one.  A passing certificate is spot-checked
    by sampling ``q_Sigma`` on the swept region.
    """
    n, a = S.n, S.params.alpha
    R = _inradius(S)
    radii = R * 2.0 ** -np.arange(1, k_max + 1)
    bound = (n + a) / (n + 3 * a)
    eta_hat = eta_flatness(S, sample_points(S, radii, n_dirs))
    cond_i = bool(eta_hat < bound)
    samples = []
    mags = []
    for r in radii:
        ratio = curvature_ratio(S, sample_points(S, [r], n_dirs))
        k = int(np.argmax(np.abs(ratio)))
        samples.append((float(r), float(ratio[k])))
        mags.append(float(np.abs(ratio[k])))
    tail = mags[-3:]
    cond_ii = bool(all(b <= a_ for a_, b in zip(tail, tail[1:])) and tail[-1] <= tol)
    cert = FlatnessCertificate(eta_hat, bound, cond_i, samples, cond_ii, cond_i and cond_ii, tol)
    cert.notes.append("limits are supported or refuted by sampling, not proved")
    if cert.overall:
        q = q_sigma(S, sample_points(S, radii[2:], n_dirs))
        cert.q_spot_min = float(np.min(q))
        cert.spot_check = bool(cert.q_spot_min >= -tol)
    return cert


def laplacian_range(S, F, r, count=400, seed=0, method="divergence"):
    """``(min, max)`` of ``L_Sigma F`` on random points of ``B_r`` with ``x != 0``."""
    region = BallRegion(S, r)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-r, r, size=(4 * count, S.n))
    x = x[(region.level(x) < 0) & (np.linalg.norm(x, axis=1) > 0)][:count]
    vals = surface_laplacian(S, F, x, method=method)
    return float(np.min(vals)), float(np.max(vals))


def search_subharmonic(params, trials=50, degree=4, seed=0, tol=1e-6):
    """Best-effort random search for polynomial graphs certified subharmonic.

    Draws coefficients of monomials of total degree ``degree`` and keeps
    the surfaces whose certificate passes and whose sampled ``q_Sigma`` is
    non-negative but not identically zero.  Finding none is not an error.
    """
    if params.n != 2:
        raise ValueError("the search enumerates monomials in two variables only")
    rng = np.random.default_rng(seed)
    exps = [(i, degree - i) for i in range(degree + 1)]
    found = []
    for _ in range(trials):
        coefs = rng.normal(size=len(exps))
        terms = [[float(c), list(e)] for c, e in zip(coefs, exps)]
        S = make_surface(params, {"kind": "monomial", "terms": terms})
        cert = subharmonicity_certificate(S, tol=tol)
        if not cert.overall:
            continue
        v = classify_harmonicity(S, radii=np.linspace(0.05, 0.5, 10), tol=tol)
        if v.classification == "subharmonic":
            found.append({"terms": terms, "certificate": cert.to_dict(), "q_min": v.q_min})
    return found
