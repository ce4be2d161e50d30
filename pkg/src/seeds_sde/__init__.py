"""Stochastic exponential derivative-free solvers for diffusion SDEs."""

from .errors import ConfigError, DegenerateGridError, DomainError, GridError
from .grids import StepGrid, edm_grid, linear_lambda_grid
from .harness import (
    GaussianFlowOracle,
    OrderEstimate,
    per_step_compare,
    strong_order,
    terminal_distribution_check,
    weak_order,
)
from .models import DataDistribution, ScoreModel, ZeroModel, zero_model
from .noise import RngStream, ZeroStream
from .phi import phi, sqrt_exp_diff, stable_expm1_combination, weighted_poly_integral
from .schedules import Edm, PrecondValues, Ve, VpCosine, VpLinear, make_schedule
from .solvers import ChurnParams, SampleResult, SolverSpec, sample

__all__ = [
    "ChurnParams",
    "ConfigError",
    "DataDistribution",
    "DegenerateGridError",
    "DomainError",
    "Edm",
    "GaussianFlowOracle",
    "GridError",
    "OrderEstimate",
    "PrecondValues",
    "RngStream",
    "SampleResult",
    "ScoreModel",
    "SolverSpec",
    "StepGrid",
    "Ve",
    "VpCosine",
    "VpLinear",
    "ZeroModel",
    "ZeroStream",
    "edm_grid",
    "linear_lambda_grid",
    "make_schedule",
    "per_step_compare",
    "phi",
    "sample",
    "sqrt_exp_diff",
    "stable_expm1_combination",
    "strong_order",
    "terminal_distribution_check",
    "weak_order",
    "weighted_poly_integral",
    "zero_model",
]

__version__ = "0.1.0"
