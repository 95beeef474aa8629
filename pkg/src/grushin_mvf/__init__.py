"""Mean value formulas on graph surfaces in Grushin spaces.

Gauge geometry (:mod:`gauge`), graph surfaces (:mod:`surface`), tangential
calculus (:mod:`tangential`), gauge-ball quadrature and mean value verdicts
(:mod:`quadrature`), a Dirichlet solver for surface-harmonic functions
(:mod:`solver`), harmonicity diagnostics (:mod:`analysis`) and a batch CLI
(:mod:`cli`).
"""

__version__ = "0.1.0"

from .gauge import (AmbientField, AmbientPoint, GrushinParams, dilate, fundamental_solution,
                    gauge_derivatives, grushin_operator, rho)
from .surface import Ball, Box, GraphSurface, Normal, SurfacePoints, alpha_normal, \
    area_element, euler_residual, integrate_surface, make_surface, mean_curvature
from .tangential import (SurfaceField, adjoint_tangential, kernel, q_sigma,
                         radial_surface_laplacian, restrict, surface_laplacian,
                         tangential_gradient)
from .quadrature import (BallRegion, MeanValueReport, check_mvf, constant_profile,
                         integrate_ball, mean_value)
from .solver import Annulus, SolveProblem, SolveSolution, assemble, residual_check, \
    solve_dirichlet
from .analysis import (FlatnessCertificate, HarmonicityVerdict, classify_harmonicity,
                       eta_flatness, growth_envelope_check, subharmonicity_certificate)

__all__ = [
    "AmbientField", "AmbientPoint", "GrushinParams", "dilate", "fundamental_solution",
    "gauge_derivatives", "grushin_operator", "rho",
    "Ball", "Box", "GraphSurface", "Normal", "SurfacePoints", "alpha_normal", "area_element",
    "euler_residual", "integrate_surface", "make_surface", "mean_curvature",
    "SurfaceField", "adjoint_tangential", "kernel", "q_sigma", "radial_surface_laplacian",
    "restrict", "surface_laplacian", "tangential_gradient",
    "BallRegion", "MeanValueReport", "check_mvf", "constant_profile", "integrate_ball",
    "mean_value",
    "Annulus", "SolveProblem", "SolveSolution", "assemble", "residual_check", "solve_dirichlet",
    "FlatnessCertificate", "HarmonicityVerdict", "classify_harmonicity", "eta_flatness",
    "growth_envelope_check", "subharmonicity_certificate",
]
