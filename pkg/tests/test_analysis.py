import numpy as np
import pytest

from grushin_mvf import (GrushinParams, classify_harmonicity, eta_flatness, growth_envelope_check,
                         make_surface, subharmonicity_certificate)
from grushin_mvf.analysis import curvature_ratio, laplacian_range, sample_points, search_subharmonic
from grushin_mvf.gauge import radial_field

from conftest import annulus_points

P = GrushinParams(2, 1.0)
RHO_SQ = (lambda t: t * t, lambda t: 2 * t, lambda t: 2 + 0 * t)


def test_classification_of_catalog(flat, paraboloid, saddle, quartic):
    assert classify_harmonicity(flat).classification == "harmonic"
    assert classify_harmonicity(paraboloid).classification == "harmonic"
    assert classify_harmonicity(saddle).classification == "harmonic"
    v = classify_harmonicity(quartic, radii=np.linspace(0.02, 0.3, 8))
    assert v.classification == "superharmonic"
    assert v.q_max < 0 and v.n_samples == 8 * 16
    with pytest.raises(ValueError):
        classify_harmonicity(flat, radii=[0.0, 0.1])


def test_indefinite_surface_is_detected():
    S = make_surface(P, {"kind": "monomial", "terms": {"x1^4": 1.0, "x2^4": -1.0}})
    assert classify_harmonicity(S).classification == "indefinite"


def test_eta_values(flat, paraboloid, quartic, rng):
    x = annulus_points(rng, 300, r_min=1e-3, r_max=1.0)
    assert eta_flatness(flat, x) == 0.0
    assert eta_flatness(paraboloid, x) == pytest.approx(1.0, rel=1e-13)
    assert eta_flatness(quartic, x) == pytest.approx(0.5, rel=1e-13)
    with pytest.raises(ValueError):
        eta_flatness(flat, [[0.0, 0.0]])


def test_eta_infinite_when_only_denominator_vanishes(rng):
    S = make_surface(P, {"kind": "monomial", "terms": [[1.0, [0, 0]]]})
    assert eta_flatness(S, annulus_points(rng, 5)) == np.inf


def test_growth_envelope(flat, paraboloid, quartic, rng):
    x = annulus_points(rng, 400, r_min=0.0, r_max=1.0)
    ok, worst = growth_envelope_check(quartic, 0.5, x)
    assert ok and worst == pytest.approx(1.0, rel=1e-12)
    assert growth_envelope_check(flat, 0.3, x)[0]
    ok, worst = growth_envelope_check(paraboloid, 1.0, x)
    assert ok and worst == pytest.approx(1.0, rel=1e-12)
    assert not growth_envelope_check(quartic, 0.25, x)[0]
    with pytest.raises(ValueError):
        growth_envelope_check(quartic, 0.0, x)


def test_certificate_flat(flat):
    cert = subharmonicity_certificate(flat)
    assert cert.eta_hat == 0.0 and cert.condition_i and cert.condition_ii and cert.overall
    assert cert.spot_check
    d = cert.to_dict()
    assert set(d["condition_ii_samples"][0]) == {"r", "ratio"}


def test_certificate_quartic(quartic):
    cert = subharmonicity_certificate(quartic)
    assert cert.eta_hat == pytest.approx(0.5, rel=1e-12)
    assert cert.eta_bound == pytest.approx(0.6)
    assert cert.condition_i and not cert.condition_ii and not cert.overall
    r, ratio = cert.condition_ii_samples[-1]
    assert r == pytest.approx(2.0 ** -10)
    assert ratio == pytest.approx(-1.5, rel=1e-3)


def test_certificate_paraboloid_fails_flatness(paraboloid):
    cert = subharmonicity_certificate(paraboloid)
    assert cert.eta_hat == pytest.approx(1.0) and not cert.condition_i and not cert.overall


def test_curvature_ratio_limit(quartic):
    th = np.linspace(0, 2 * np.pi, 5, endpoint=False)
    x = 2.0 ** -8 * np.column_stack([np.cos(th), np.sin(th)])
    np.testing.assert_allclose(curvature_ratio(quartic, x), -1.5, rtol=1e-3)


def test_gauge_square_is_sub_and_super_where_expected(flat, quartic):
    lo, hi = laplacian_range(flat, radial_field(P, *RHO_SQ), 0.5)
    assert lo == pytest.approx(6.0) and hi == pytest.approx(6.0)
    neg = radial_field(P, lambda t: -t * t, lambda t: -2 * t, lambda t: -2 + 0 * t)
    assert laplacian_range(quartic, neg, 0.2)[1] < 0


def test_sample_points_layout(flat):
    x = sample_points(flat, [0.1, 0.2], 4)
    assert x.shape == (8, 2)
    np.testing.assert_allclose(np.linalg.norm(x, axis=1), [0.1] * 4 + [0.2] * 4)


def test_search_runs_and_is_reproducible():
    a = search_subharmonic(P, trials=3, seed=1)
    b = search_subharmonic(P, trials=3, seed=1)
    assert a == b
    with pytest.raises(ValueError):
        search_subharmonic(GrushinParams(3, 1.0), trials=1)
