import numpy as np
import pytest

from grushin_mvf.cubature import integrate


def disk(r):
    return lambda x: np.einsum("ij,ij->i", x, x) - r * r


def test_polynomial_on_box_is_exact():
    res = integrate(lambda x: x[:, 0] ** 2 * x[:, 1] ** 3 + 1, [0, 0], [1, 2], tol=1e-12)
    assert res.converged
    assert res.value == pytest.approx(2 + (1 / 3) * 4, rel=1e-13)


def test_disk_area_and_radial_weight():
    area, err = integrate(lambda x: np.ones(len(x)), [-1, -1], [1, 1], tol=1e-10, level=disk(1.0))
    assert area == pytest.approx(np.pi, abs=1e-10)
    val = integrate(lambda x: np.linalg.norm(x, axis=1), [-0.5, -0.5], [0.5, 0.5], tol=1e-10,
                    level=disk(0.5)).value
    assert val == pytest.approx(2 * np.pi * 0.5 ** 3 / 3, abs=1e-10)


def test_cusp_at_origin_in_one_dimension():
    res = integrate(lambda x: np.abs(x[:, 0]) ** 0.5, [-1], [1], tol=1e-10)
    assert res.value == pytest.approx(4 / 3, abs=1e-9)


def test_error_estimate_is_honest():
    res = integrate(lambda x: np.exp(x[:, 0]) * np.cos(x[:, 1]), [-1, -1], [1, 1], tol=1e-6,
                    level=disk(0.9))
    exact = integrate(lambda x: np.exp(x[:, 0]) * np.cos(x[:, 1]), [-1, -1], [1, 1], tol=1e-13,
                      level=disk(0.9)).value
    assert abs(res.value - exact) <= max(res.error, 1e-6)


def test_budget_exhaustion_is_flagged():
    res = integrate(lambda x: np.abs(x[:, 0] - 0.1234567) ** -0.5, [-1, -1], [1, 1], tol=1e-14,
                    max_cells=200)
    assert not res.converged


def test_rejects_empty_box():
    with pytest.raises(ValueError):
        integrate(lambda x: x[:, 0], [1, 0], [0, 1])


def test_result_is_reproducible():
    f = lambda x: np.sin(3 * x[:, 0]) * x[:, 1] ** 2 + 1  # noqa: E731
    a = integrate(f, [-1, -1], [1, 1], tol=1e-9, level=disk(0.8))
    b = integrate(f, [-1, -1], [1, 1], tol=1e-9, level=disk(0.8))
    assert a.value == b.value and a.error == b.error
