"""Constrained Stein variational gradient descent.

Particle approximations of ``exp(-alpha f(x))`` restricted to a feasible set,
with penalty, augmented Lagrangian and barrier treatments of the constraints.
"""

from .constraints import Constraint, ConstraintSet, SoftFormulation, soft_grad, soft_value, update_params, violation
from .errors import (
    BarrierDomainError,
    ContractError,
    DegenerateInputError,
    GeometryError,
    InfeasibleTargetError,
    InvalidStateError,
    ParameterError,
    UnsupportedCombinationError,
)
from .evaluation import emd, grad_check, rejection_sample, run_trial, trial_matrix
from .solvers import Problem, SolveConfig, SolveReport, plain_svgd, solve_p, solve_q
from .svgd import StepControl, median_bandwidth, rbf_kernel, se3_kernel, svgd_direction

__version__ = "0.1.0"

__all__ = [
    "BarrierDomainError", "Constraint", "ConstraintSet", "ContractError", "DegenerateInputError", "GeometryError",
    "InfeasibleTargetError", "InvalidStateError", "ParameterError", "Problem", "SoftFormulation", "SolveConfig",
    "SolveReport", "StepControl", "UnsupportedCombinationError", "emd", "grad_check", "median_bandwidth",
    "plain_svgd", "rbf_kernel", "rejection_sample", "run_trial", "se3_kernel", "soft_grad", "soft_value",
    "solve_p", "solve_q", "svgd_direction", "trial_matrix", "update_params", "violation",
]
