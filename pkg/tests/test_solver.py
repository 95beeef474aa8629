import csv

import numpy as np
import pytest

from grushin_mvf import (Annulus, Ball, Box, GrushinParams, SolveProblem, assemble,
                         make_surface, residual_check, solve_dirichlet)
from grushin_mvf.solver import SolveSolution, interior_samples
from grushin_mvf.tangential import divergence_matrix

P = GrushinParams(2, 1.0)
RING = Annulus(0.2, 1.0)


def radial_exact(x):
    # F = 0.75 + 0.25 / s, guarded near 0 so the lattice corner values stay finite
    return 0.75 + 0.25 / np.maximum(np.linalg.norm(x, axis=1), 0.05)


def ring_boundary(x):
    return np.where(np.linalg.norm(x, axis=1) < 0.6, 2.0, 1.0)


def test_problem_validation(flat):
    with pytest.raises(ValueError):
        SolveProblem(flat, Ball(1.0), radial_exact, 63)
    with pytest.raises(ValueError):
        SolveProblem(flat, Ball(1.0), radial_exact, 2)
    with pytest.raises(ValueError):
        SolveProblem(make_surface(GrushinParams(1, 1.0), "flat"), Ball(1.0), radial_exact, 8)
    with pytest.raises(ValueError):
        Annulus(0.5, 0.2)
    pb = SolveProblem(flat, RING, radial_exact, 16)
    assert pb.h == pytest.approx(0.125)
    assert 0.0 in pb.axis


def test_divergence_matrix_structure(flat, rng):
    x = rng.uniform(-0.9, 0.9, size=(20, 2))
    s = np.linalg.norm(x, axis=1)
    np.testing.assert_allclose(divergence_matrix(flat, x), s[:, None, None] * np.eye(2)[None])
    S = make_surface(P, {"kind": "monomial", "terms": {"x1^2": 0.7}})
    A = divergence_matrix(S, x)
    g1 = 1.4 * x[:, 0]
    v = np.sqrt(g1 ** 2 + s ** 2)
    np.testing.assert_allclose(A[:, 0, 1], 0.0, atol=1e-16)
    np.testing.assert_allclose(A[:, 0, 0], s ** 2 / v, rtol=1e-13)
    np.testing.assert_allclose(A[:, 1, 1], v, rtol=1e-13)


def test_constant_rows_balance(saddle):
    pb = SolveProblem(saddle, Ball(1.0), lambda x: np.full(len(x), 3.0), 32)
    system = assemble(pb)
    ones = np.ones(system.matrix.shape[0])
    ii, jj = np.nonzero(system.index >= 0)
    t = pb.axis
    deep = np.hypot(t[ii], t[jj]) < 0.8
    assert np.max(np.abs((system.matrix @ ones)[deep])) < 1e-11
    assert np.max(np.abs(system.matrix @ (3 * ones) - system.rhs)) < 1e-11


def test_flat_stencil_is_symmetric_on_regular_block(flat):
    system = assemble(SolveProblem(flat, Ball(1.0), radial_exact, 32))
    block = system.matrix[system.regular][:, system.regular].toarray()
    assert np.max(np.abs(block - block.T)) < 1e-12


@pytest.mark.parametrize("kind", ["flat", "saddle"])
def test_constant_data_gives_constant_solution(kind, flat, saddle):
    S = flat if kind == "flat" else saddle
    sol = solve_dirichlet(SolveProblem(S, Ball(1.0), lambda x: np.full(len(x), 2.5), 32))
    np.testing.assert_allclose(sol.F[sol.inside], 2.5, atol=1e-12)


def test_annulus_radial_solution_converges(flat):
    errors = []
    for N in (32, 64, 128):
        sol = solve_dirichlet(SolveProblem(flat, RING, ring_boundary, N))
        nodes = sol.problem.nodes()[sol.inside.ravel()]
        errors.append(np.max(np.abs(sol.F[sol.inside] - radial_exact(nodes))))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert errors[-1] < 5e-3
    assert np.all(orders > 1.5)
    sol = solve_dirichlet(SolveProblem(flat, RING, ring_boundary, 128))
    assert sol.value_at([[0.5, 0.0]])[0] == pytest.approx(1.25, abs=1e-3)


def test_residual_of_exact_solution_shrinks(flat):
    res = []
    for N in (64, 128):
        pb = SolveProblem(flat, RING, radial_exact, N)
        F = radial_exact(pb.nodes()).reshape(N + 1, N + 1)
        sol = SolveSolution(pb, F, pb.inside(), 0.0, 1.0, pb.h)
        pts = interior_samples(pb, 100, margin=3, seed=1)
        pts = pts[(np.linalg.norm(pts, axis=1) > 0.3) & (np.linalg.norm(pts, axis=1) < 0.9)]
        res.append(residual_check(sol, pts))
    assert res[1] < res[0] / 2.5


def test_residual_of_constant_is_zero(flat):
    pb = SolveProblem(flat, Ball(1.0), lambda x: np.ones(len(x)), 16)
    sol = SolveSolution(pb, np.ones((17, 17)), pb.inside(), 0.0, 1.0, pb.h)
    assert residual_check(sol, [[0.3, 0.1], [-0.2, 0.5]]) < 1e-12


def test_box_domain_and_csv(saddle, tmp_path):
    g = lambda x: x[:, 0] - x[:, 1] ** 2  # noqa: E731
    sol = solve_dirichlet(SolveProblem(saddle, Box((-1, -1), (1, 1)), g, 16))
    assert sol.diagnostics["unknowns"] == 15 * 15
    path = tmp_path / "sol.csv"
    sol.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x1", "x2", "F"]
    assert len(rows) == 1 + 17 * 17


def test_interior_samples_keep_margin(flat):
    pb = SolveProblem(flat, RING, radial_exact, 32)
    x = interior_samples(pb, 50, margin=2, seed=3)
    s = np.linalg.norm(x, axis=1)
    assert len(x) == 50
    assert np.all(s >= 0.2 + 2 * pb.h - 1e-12) and np.all(s <= 1.0 - 2 * pb.h + 1e-12)
