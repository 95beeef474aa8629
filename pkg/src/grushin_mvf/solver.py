"""Dirichlet problems for ``L_Sigma F = 0`` on two-dimensional graph patches.

In graph coordinates ``L_Sigma F = div(A grad F) / v`` with
``A = v I - grad u grad u^T / v``, so harmonic functions solve the
divergence-form equation ``div(A grad F) = 0``.  The discretisation lives on
a vertex lattice over ``[-L, L]^2`` with the origin as a vertex:

* diagonal terms ``d_k (A_kk d_k F)`` use fluxes with ``A`` sampled at arm
  midpoints, so the degenerate point ``x = 0`` is never sampled;
* the cross terms come from the cell energy ``2 A_12 d_1F d_2F`` with
  ``A_12`` at cell centres, which keeps the operator symmetric;
* arms that leave the domain are shortened to the boundary crossing
  (Shortley-Weller), which keeps the scheme second order on curved
  boundaries.  Rows touched by this are not symmetric.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RectBivariateSpline

from .autodiff import Jet
from .surface import Ball, Box
from .tangential import SurfaceField, divergence_matrix, surface_laplacian

_THETA_MIN = 1e-6
_BISECTION_STEPS = 60


@dataclass(frozen=True)
class Annulus:
    """``r_in <= |x| <= r_out``."""

    r_in: float
    r_out: float

    def __post_init__(self):
        if not 0 < self.r_in < self.r_out:
            raise ValueError("annulus needs 0 < r_in < r_out")

    def level(self, x):
        s = np.linalg.norm(x, axis=1)
        return np.maximum(s - self.r_out, self.r_in - s)

    def bounds(self, n):
        return -self.r_out * np.ones(n), self.r_out * np.ones(n)


@dataclass(frozen=True)
class SolveProblem:
    """``div(A grad F) = 0`` in ``domain``, ``F = g`` on its boundary.

    ``domain`` is a :class:`~grushin_mvf.surface.Ball` (disk), an
    :class:`Annulus` or a :class:`~grushin_mvf.surface.Box`.  The lattice
    has ``N`` intervals per side (``N`` even) over ``[-L, L]^2`` where ``L``
    defaults to the domain's half width.  ``g`` maps points ``(m, 2)`` to
    values and must be defined on lattice nodes next to the boundary as
    well (they feed the cross terms).
    """

    surface: object
    domain: object
    g: Callable
    N: int
    half_width: float | None = None

    def __post_init__(self):
        if self.surface.n != 2:
            raise ValueError("the solver handles n = 2 only")
        if self.N < 4 or self.N % 2:
            raise ValueError("N must be an even integer >= 4 so that 0 is a lattice vertex")
        if self.half_width is None:
            lo, hi = self.domain.bounds(2)
            object.__setattr__(self, "half_width", float(max(np.max(np.abs(lo)), np.max(hi))))
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def h(self):
        return 2.0 * self.half_width / self.N

    @property
    def axis(self):
        return np.linspace(-self.half_width, self.half_width, self.N + 1)

    def nodes(self):
        t = self.axis
        X1, X2 = np.meshgrid(t, t, indexing="ij")
        return np.column_stack([X1.ravel(), X2.ravel()])

    def inside(self):
        """Mask of unknown nodes (strictly inside the domain), shape ``(N+1, N+1)``."""
        lev = self.domain.level(self.nodes()).reshape(self.N + 1, self.N + 1)
        mask = lev < 0
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = False
        return mask


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    index: np.ndarray          # lattice (i, j) -> unknown number or -1
    regular: np.ndarray        # unknowns whose rows carry no shortened arms
    boundary_values: np.ndarray


@dataclass
class SolveSolution:
    problem: SolveProblem
    F: np.ndarray              # lattice values, g outside the domain
    inside: np.ndarray
    residual: float
    rhs_norm: float
    h: float
    diagnostics: dict = field(default_factory=dict)

    def interpolant(self):
        t = self.problem.axis
        return RectBivariateSpline(t, t, self.F, kx=3, ky=3)

    def field(self, name="F_h"):
        """Bicubic interpolant of the lattice solution as a :class:`SurfaceField`."""
        spline = self.interpolant()

        def fn(x, order):
            a, b = x[:, 0], x[:, 1]
            val = spline.ev(a, b)
            if order == 0:
                return Jet(val)
            grad = np.column_stack([spline.ev(a, b, dx=1), spline.ev(a, b, dy=1)])
            if order == 1:
                return Jet(val, grad)
            f11 = spline.ev(a, b, dx=2)
            f12 = spline.ev(a, b, dx=1, dy=1)
            f22 = spline.ev(a, b, dy=2)
            hess = np.stack([np.column_stack([f11, f12]), np.column_stack([f12, f22])], axis=1)
            return Jet(val, grad, hess)
        return SurfaceField(fn, name)

    def value_at(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.interpolant().ev(x[:, 0], x[:, 1])

    def to_csv(self, path):
        """Write ``x1, x2, F`` for every node of the closed domain."""
        nodes = self.problem.nodes()
        keep = self.problem.domain.level(nodes) <= 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "F"])
            for (a, b), f in zip(nodes[keep], self.F.ravel()[keep]):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(f))])


def _crossing(level, p, d, h):
    """Fraction ``theta`` of the arm ``p -> p + h d`` at which the boundary is hit."""
    lo = np.zeros(len(p))
    hi = np.ones(len(p))
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        inside = level(p + (mid * h)[:, None] * d) < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return np.maximum(0.5 * (lo + hi), _THETA_MIN)


def assemble(problem: SolveProblem) -> LinearSystem:
    """Sparse system for the unknown lattice values."""
    S, N, h = problem.surface, problem.N, problem.h
    t = problem.axis
    mask = problem.inside()
    index = -np.ones((N + 1, N + 1), dtype=np.int64)
    ii, jj = np.nonzero(mask)
    index[ii, jj] = np.arange(len(ii))
    n_unk = len(ii)
    nodes = problem.nodes()
    bvals = np.asarray(problem.g(nodes), dtype=float).reshape(N + 1, N + 1)
    level = problem.domain.level

    rows, cols, vals = [], [], []
    rhs = np.zeros(n_unk)
    irregular = np.zeros(n_unk, dtype=bool)
    p = np.column_stack([t[ii], t[jj]])
    me = np.arange(n_unk)

    # diagonal terms, one coordinate direction at a time
    for k in range(2):
        d = np.zeros(2)
        d[k] = 1.0
        arms = []
        for sgn in (1, -1):
            qi, qj = ii + sgn * d[0].astype(int), jj + sgn * d[1].astype(int)
            q_in = mask[qi, qj]
            q_pt = np.column_stack([t[qi], t[qj]])
            # an inside neighbour still needs the segment to stay in the domain
            mid_ok = level(0.5 * (p + q_pt)) < 0
            regular = q_in & mid_ok
            theta = np.ones(n_unk)
            cut = ~regular
            if np.any(cut):
                theta[cut] = _crossing(level, p[cut], sgn * d, h)
            length = theta * h
            mid = p + (0.5 * sgn * length)[:, None] * d
            A = divergence_matrix(S, mid)[:, k, k]
            arms.append((qi, qj, regular, length, A / length, p + (sgn * length)[:, None] * d))
        denom = 0.5 * (arms[0][3] + arms[1][3])
        for qi, qj, regular, length, c, bpt in arms:
            w = c / denom
            rows.append(me)
            cols.append(me)
            vals.append(w)
            r = regular
            rows.append(me[r])
            cols.append(index[qi[r], qj[r]])
            vals.append(-w[r])
            cut = ~r
            if np.any(cut):
                rhs[cut] += w[cut] * np.asarray(problem.g(bpt[cut]), dtype=float)
                irregular[cut] = True

    # cross terms from the cell energy; corners ordered 00, 10, 01, 11
    ci, cj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    ci, cj = ci.ravel(), cj.ravel()
    corners = [(0, 0), (1, 0), (0, 1), (1, 1)]
    cidx = np.stack([index[ci + a, cj + b] for a, b in corners], axis=1)
    touched = np.any(cidx >= 0, axis=1)
    ci, cj, cidx = ci[touched], cj[touched], cidx[touched]
    centres = np.column_stack([t[ci] + 0.5 * h, t[cj] + 0.5 * h])
    a12 = divergence_matrix(S, centres)[:, 0, 1]
    active = a12 != 0
    if np.any(active):
        ci, cj, cidx, a12 = ci[active], cj[active], cidx[active], a12[active]
        s1 = np.array([-1.0, 1.0, -1.0, 1.0])
        s2 = np.array([-1.0, -1.0, 1.0, 1.0])
        M = 0.25 * (np.outer(s1, s2) + np.outer(s2, s1)) / h ** 2
        cval = np.stack([bvals[ci + a, cj + b] for a, b in corners], axis=1)
        for r_loc in range(4):
            row = cidx[:, r_loc]
            ok = row >= 0
            for c_loc in range(4):
                coef = a12 * M[r_loc, c_loc]
                col = cidx[:, c_loc]
                inner = ok & (col >= 0)
                rows.append(row[inner])
                cols.append(col[inner])
                vals.append(coef[inner])
                outer = ok & (col < 0)
                if np.any(outer):
                    np.add.at(rhs, row[outer], -coef[outer] * cval[outer, c_loc])

    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_unk, n_unk))
    matrix.sum_duplicates()
    return LinearSystem(matrix, rhs, index, np.nonzero(~irregular)[0], bvals)


def solve_dirichlet(problem: SolveProblem, rtol=1e-10) -> SolveSolution:
    """Direct sparse solve; raises if the residual exceeds ``rtol * |rhs|``."""
    system = assemble(problem)
    A, b = system.matrix, system.rhs
    sol = spla.spsolve(A.tocsc(), b)
    residual = float(np.linalg.norm(A @ sol - b))
    rhs_norm = float(np.linalg.norm(b))
    if not np.all(np.isfinite(sol)) or residual > rtol * max(rhs_norm, 1e-300):
        raise RuntimeError(f"linear solve failed: residual {residual:.3e}, |rhs| {rhs_norm:.3e}")
    F = system.boundary_values.copy()
    inside = system.index >= 0
    F[inside] = sol[system.index[inside]]
    return SolveSolution(problem, F, inside, residual, rhs_norm, problem.h,
                         {"unknowns": int(A.shape[0]), "nonzeros": int(A.nnz),
                          "method": "spsolve"})


def residual_check(solution: SolveSolution, points, method="divergence"):
    """``max |L_Sigma F_h|`` at ``points`` for the bicubic interpolant ``F_h``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    vals = surface_laplacian(solution.problem.surface, solution.field(), points, method=method)
    return float(np.max(np.abs(vals)))


def interior_samples(problem: SolveProblem, count=200, margin=2, seed=0):
    """Random points at distance ``>= margin * h`` from the boundary and from 0."""
    rng = np.random.default_rng(seed)
    lo, hi = problem.domain.bounds(2)
    out = []
    h = problem.h
    offsets = margin * h * np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [0.7071, 0.7071],
                                     [-0.7071, 0.7071], [0.7071, -0.7071], [-0.7071, -0.7071]])
    while sum(len(o) for o in out) < count:
        x = rng.uniform(lo, hi, size=(4 * count, 2))
        ok = np.linalg.norm(x, axis=1) >= margin * h
        for off in offsets:
            ok &= problem.domain.level(x + off) < 0
        out.append(x[ok])
    return np.concatenate(out)[:count]


__all__ = [
    "Annulus", "Ball", "Box", "SolveProblem", "SolveSolution", "LinearSystem",
    "assemble", "solve_dirichlet", "residual_check", "interior_samples",
]
