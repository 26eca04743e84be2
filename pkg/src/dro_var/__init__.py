"""Variance regularization through chi-square distributionally robust risk."""

from .chi2_ball import (
    FastPath,
    WorstCaseSolution,
    expansion_condition_holds,
    variance_expansion_value,
    worst_case_distribution,
)
from .data import Dataset, Example, parse_sparse, serialize_sparse
from .geometry import ConstraintSet, parse_constraint, project
from .losses import LossModel
from .optimizer import FitResult, SolverConfig, minimize, minimize_erm
from .risk import (
    RobustObjective,
    bias_term,
    certificate,
    rho_for_coverage,
    robust_gradient,
    robust_objective_value,
)

__all__ = [
    "ConstraintSet", "Dataset", "Example", "FastPath", "FitResult", "LossModel",
    "RobustObjective", "SolverConfig", "WorstCaseSolution", "bias_term", "certificate",
    "expansion_condition_holds", "minimize", "minimize_erm", "parse_constraint",
    "parse_sparse", "project", "rho_for_coverage", "robust_gradient",
    "robust_objective_value", "serialize_sparse", "variance_expansion_value",
    "worst_case_distribution",
]
