import numpy as np
import pytest

from grushin_mvf import (BallRegion, GrushinParams, SurfaceField, check_mvf, constant_profile,
                         integrate_ball, make_surface, mean_value)
from grushin_mvf.gauge import gauge, gauge_field
from grushin_mvf.quadrature import _extrapolate, field_at_origin, verdict, worker_count
from grushin_mvf.tangential import kernel_field, restrict

P = GrushinParams(2, 1.0)
R_GRID = [0.1, 0.2, 0.3, 0.4, 0.5]
C_FLAT = 2 * np.pi / 3


def rho_power(S, k):
    return lambda x: gauge(S.params, x, S.u(x)) ** k


def test_ball_region_validation(flat):
    BallRegion(flat, 1.0)
    with pytest.raises(ValueError):
        BallRegion(flat, 1.5)
    with pytest.raises(ValueError):
        BallRegion(flat, 0.0)


def test_ball_region_on_graph(quartic):
    region = BallRegion(quartic, 0.5)
    x = np.array([[0.45, 0.0], [0.0, 0.3], [0.49, 0.0]])
    lev = region.level(x)
    np.testing.assert_allclose(lev, gauge(P, x, quartic.u(x)) - 0.5)
    assert list(region.indicator(x)) == [True, True, False]  # rho(0.49, 0.49^4) > 0.5


def test_kernel_integral_on_flat_ball(flat):
    val, err = integrate_ball(flat, kernel_field(flat), 0.5, tol=1e-10)
    assert val == pytest.approx(2 * np.pi * 0.5 ** 3 / 3, abs=1e-9)
    assert integrate_ball(flat, 0.0, 0.5).value == 0.0


def test_odd_integrand_cancels(quartic):
    val, _ = integrate_ball(quartic, lambda x: x[:, 0] * np.exp(x[:, 1]), 0.6, tol=1e-10)
    assert abs(val) < 1e-10


def test_flat_profile(flat):
    prof = constant_profile(flat, R_GRID, tol=1e-9)
    np.testing.assert_allclose(prof.c_of_r, C_FLAT, rtol=1e-8)
    assert prof.is_constant and prof.converged
    assert prof.C == pytest.approx(3 / (2 * np.pi), rel=1e-8)
    c, C = prof
    assert len(c) == 5 and C == prof.C


def test_homogeneous_profile(paraboloid):
    prof = constant_profile(paraboloid, [0.05, 0.1, 0.2, 0.3, 0.4, 0.5], tol=1e-8)
    assert prof.spread <= 1e-6
    assert all(c > 0 for c in prof.c_of_r)


def test_profile_positive_on_quartic(quartic):
    prof = constant_profile(quartic, [0.1, 0.2, 0.4], tol=1e-8)
    assert all(c > 0 for c in prof.c_of_r)
    assert not prof.is_constant


def test_profile_rejects_bad_grid(flat):
    with pytest.raises(ValueError):
        constant_profile(flat, [])
    with pytest.raises(ValueError):
        constant_profile(flat, [0.2, 0.1])


def test_extrapolation_recovers_power_law():
    r = np.array([0.1, 0.2, 0.4])
    assert _extrapolate(r, 2.0 + 3.0 * r ** 2) == pytest.approx(2.0, rel=1e-12)
    assert _extrapolate(r[:2], 2.0 + 3.0 * r[:2]) == pytest.approx(2.0, rel=1e-12)


def test_mean_value_of_one_and_of_gauge_powers(flat, paraboloid):
    C = 3 / (2 * np.pi)
    m1, _ = mean_value(flat, lambda x: np.ones(len(x)), 0.3, C, tol=1e-10)
    assert m1 == pytest.approx(1.0, rel=1e-9)
    m2, _ = mean_value(flat, rho_power(flat, 2), 0.5, C, tol=1e-10)
    assert m2 == pytest.approx(0.15, rel=1e-8)
    for k in (1, 3):
        mk, _ = mean_value(flat, rho_power(flat, k), 0.4, C, tol=1e-10)
        assert mk == pytest.approx(3 / (3 + k) * 0.4 ** k, rel=1e-8)
    prof = constant_profile(paraboloid, [0.2, 0.4])
    assert mean_value(paraboloid, lambda x: np.ones(len(x)), 0.4, prof.C)[0] == pytest.approx(1.0, rel=1e-7)


def test_mean_value_of_odd_field(paraboloid):
    m, _ = mean_value(paraboloid, lambda x: x[:, 0] ** 3 + x[:, 0], 0.4, 0.5, tol=1e-10)
    assert abs(m) < 1e-9


def test_verdict_rules():
    assert verdict(0.0, 1e-9, 1e-8) == "equal"
    assert verdict(0.0, 1.0, 1e-8) == "sub"
    assert verdict(0.0, -1.0, 1e-8) == "super"


def test_field_at_origin_handles_fields(quartic):
    assert field_at_origin(quartic, restrict(gauge_field(P), quartic)) == 0.0
    assert field_at_origin(quartic, SurfaceField.constant(2.5)) == 2.5
    assert str(field_at_origin(quartic, lambda x: -0.0 * x[:, 0])) == "0.0"


def test_check_mvf_sub_on_flat(flat):
    report = check_mvf(flat, rho_power(flat, 2), [0.1, 0.3, 0.5], mode="subharmonic", tol=1e-6)
    assert report.passed
    assert report.verdicts == ["sub"] * 3
    np.testing.assert_allclose(report.M_of_r, 0.6 * np.array([0.1, 0.3, 0.5]) ** 2, rtol=1e-6)
    assert len(report.rows()) == 3
    assert set(report.rows()[0]) == set(report.CSV_COLUMNS)
    wrong = check_mvf(flat, rho_power(flat, 2), [0.1, 0.3], mode="harmonic", tol=1e-6)
    assert not wrong.passed and [r for r, _ in wrong.failures] == [0.1, 0.3]
    with pytest.raises(ValueError):
        check_mvf(flat, rho_power(flat, 2), [0.1], mode="quasi")


def test_workers_do_not_change_results(quartic, monkeypatch):
    a = constant_profile(quartic, [0.1, 0.2, 0.3], workers=1)
    b = constant_profile(quartic, [0.1, 0.2, 0.3], workers=3)
    assert a == b
    monkeypatch.setenv("GRUSHIN_MVF_WORKERS", "4")
    assert worker_count() == 4
    monkeypatch.setenv("GRUSHIN_MVF_WORKERS", "many")
    with pytest.raises(ValueError):
        worker_count()
