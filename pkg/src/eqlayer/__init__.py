"""Solver and verification suite for the degenerate equatorial
boundary-layer system of rotating fluids."""

from .domain import (BoundaryData, DomainCase, Grid, LambdaChoice, ProblemSpec,
                     scaling_exponents, validate)
from .fields import Field, StatePair, hardy_ratio, norm_E0, norm_E00, norm_E0tilde
from .linsolve import (ManufacturedSolution, SolveResult, manufactured_spec,
                       solve, solve_periodic, trace_recovery, weak_residual)
from .operators import DiscreteOperator, Lifting, assemble, lambda_case2, lift
from .spectral import (SpectralSolution, halfplane_solve, lambda_exact,
                       mode_evolve, transparent_multiplier)
from .transparent import (LambdaMatrix, build_lambda, build_lambda_no_transport,
                          exact_lambda_matrix, split_solve, upper_spec)
from .diagnostics import caccioppoli_check, energy_profile, q_profile

__version__ = "0.1.0"

__all__ = [
    "BoundaryData", "DomainCase", "Grid", "LambdaChoice", "ProblemSpec",
    "scaling_exponents", "validate",
    "Field", "StatePair", "hardy_ratio", "norm_E0", "norm_E00", "norm_E0tilde",
    "ManufacturedSolution", "SolveResult", "manufactured_spec", "solve",
    "solve_periodic", "trace_recovery", "weak_residual",
    "DiscreteOperator", "Lifting", "assemble", "lambda_case2", "lift",
    "SpectralSolution", "halfplane_solve", "lambda_exact", "mode_evolve",
    "transparent_multiplier",
    "LambdaMatrix", "build_lambda", "build_lambda_no_transport",
    "exact_lambda_matrix", "split_solve", "upper_spec",
    "caccioppoli_check", "energy_profile", "q_profile",
]
