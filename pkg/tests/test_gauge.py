import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grushin_mvf import AmbientField, AmbientPoint, GrushinParams
from grushin_mvf.gauge import (dilate, fundamental_solution, fundamental_solution_field,
                               gauge_derivatives, gauge_field, grushin_operator, rho,
                               x_gradient_norm_sq)
from grushin_mvf.identities import gauge_oracle

P = GrushinParams(2, 1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        GrushinParams(0, 1.0)
    with pytest.raises(ValueError):
        GrushinParams(2, 0.0)
    assert P.homogeneous_dimension == 3


def test_point_must_be_finite():
    with pytest.raises(ValueError):
        AmbientPoint((np.nan, 0.0), 1.0)


def test_rho_on_axes():
    assert rho(P, AmbientPoint((0.5, 0.0), 0.0)) == pytest.approx(0.5)
    assert rho(P, AmbientPoint((0.0, 0.0), 0.5)) == pytest.approx(1.0)
    assert rho(P, AmbientPoint((0.0, 0.0), 0.0)) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(-3, 3),
       st.floats(0.1, 5), st.sampled_from([0.5, 1.0, 2.0, 3.7]))
def test_rho_is_homogeneous(x, y, lam, alpha):
    params = GrushinParams(2, alpha)
    p = AmbientPoint(tuple(x), y)
    assert rho(params, dilate(params, p, lam)) == pytest.approx(lam * rho(params, p), rel=1e-12,
                                                                abs=1e-300)


def test_gradient_at_unit_point_matches_finite_differences():
    g, _, _ = gauge_derivatives(P, AmbientPoint((1.0, 0.0), 0.0))
    np.testing.assert_allclose(g, [1.0, 0.0, 0.0], atol=1e-15)
    h = 1e-6
    fd = [(rho(P, AmbientPoint((1.0 + h, 0.0), 0.0)) - rho(P, AmbientPoint((1.0 - h, 0.0), 0.0))) / (2 * h),
          (rho(P, AmbientPoint((1.0, h), 0.0)) - rho(P, AmbientPoint((1.0, -h), 0.0))) / (2 * h),
          1.0 * (rho(P, AmbientPoint((1.0, 0.0), h)) - rho(P, AmbientPoint((1.0, 0.0), -h))) / (2 * h)]
    np.testing.assert_allclose(g, fd, atol=1e-8)


def test_gradient_vanishes_on_vertical_axis():
    g, _, _ = gauge_derivatives(P, AmbientPoint((0.0, 0.0), 0.3))
    np.testing.assert_array_equal(g, 0.0)


def test_origin_is_rejected():
    with pytest.raises(ValueError):
        gauge_derivatives(P, AmbientPoint((0.0, 0.0), 0.0))
    with pytest.raises(ValueError):
        fundamental_solution(P, AmbientPoint((0.0, 0.0), 0.0))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.7])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_closed_form_x_hessian_matches_oracle(n, alpha):
    params = GrushinParams(n, alpha)
    rng = np.random.default_rng(n * 10 + int(alpha * 10))
    x = rng.uniform(-1, 1, size=(50, n))
    y = rng.uniform(-1, 1, 50)
    from grushin_mvf.gauge import gauge_x_derivatives
    xg, xh, lrho = gauge_x_derivatives(params, x, y)
    og, oh = gauge_oracle(params, x, y)
    np.testing.assert_allclose(xg, og, rtol=1e-10, atol=1e-12)
    scale = np.max(np.abs(oh), axis=(1, 2))[:, None, None]
    assert np.max(np.abs(xh - oh) / scale) < 1e-10
    # |X rho|^2 = |x|^(2a) rho^(-2a)  and  L rho = (n+a)|X rho|^2 / rho
    s = np.linalg.norm(x, axis=1)
    r = (s ** (2 * alpha + 2) + (alpha + 1) ** 2 * y ** 2) ** (1 / (2 * alpha + 2))
    np.testing.assert_allclose(x_gradient_norm_sq(params, x, y), s ** (2 * alpha) / r ** (2 * alpha),
                               rtol=1e-12)
    assert np.all(x_gradient_norm_sq(params, x, y) <= 1 + 1e-14)
    np.testing.assert_allclose(lrho * r, (n + alpha) * np.einsum("ij,ij->i", og, og), rtol=1e-10)


def test_mixed_x_derivatives_do_not_commute():
    _, xh, _ = gauge_derivatives(P, AmbientPoint((0.4, 0.3), 0.7))
    assert abs(xh[0, 2] - xh[2, 0]) > 1e-3


def test_grushin_operator_of_y_squared():
    field = AmbientField.from_expression(lambda xs, y: y * y)
    p = AmbientPoint((0.3, -0.4), 0.9)
    assert grushin_operator(P, field, p) == pytest.approx(2 * 0.5 ** 2)


def test_grushin_operator_of_rho_and_gamma():
    rng = np.random.default_rng(4)
    for _ in range(30):
        x = tuple(rng.uniform(-1, 1, 2))
        p = AmbientPoint(x, rng.uniform(-1, 1))
        g, _, _ = gauge_derivatives(P, p)
        r = rho(P, p)
        assert grushin_operator(P, gauge_field(P), p) * r == pytest.approx(3 * g @ g, rel=1e-12)
    gamma = fundamental_solution_field(P)
    for _ in range(30):
        d = rng.normal(size=3)
        p = AmbientPoint(tuple(d[:2]), d[2])
        p = dilate(P, p, rng.uniform(0.5, 2) / rho(P, p))
        assert 0.5 - 1e-12 <= rho(P, p) <= 2 + 1e-12
        assert abs(grushin_operator(P, gamma, p)) < 1e-8


def test_fundamental_solution_values_and_homogeneity():
    assert fundamental_solution(P, AmbientPoint((1.0, 0.0), 0.0)) == pytest.approx(1.0)
    assert fundamental_solution(P, AmbientPoint((2.0, 0.0), 0.0)) == pytest.approx(0.25)
    p = AmbientPoint((0.3, 0.1), -0.2)
    assert fundamental_solution(P, dilate(P, p, 3.0)) == pytest.approx(3.0 ** -2 * fundamental_solution(P, p))


def test_dilation_group_law():
    p = AmbientPoint((1.0, 0.0), 1.0)
    assert dilate(P, p, 1.0) == p
    q = dilate(P, p, 2.0)
    assert q.x == (2.0, 0.0) and q.y == 4.0
    a = dilate(P, dilate(P, p, 1.7), 0.3)
    b = dilate(P, p, 1.7 * 0.3)
    np.testing.assert_allclose(a.x, b.x)
    assert a.y == pytest.approx(b.y)
    with pytest.raises(ValueError):
        dilate(P, p, 0.0)
