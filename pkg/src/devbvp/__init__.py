"""Extremal solutions of first-order boundary value problems with a deviated argument.

    x'(t) = f(t, x(t), x(tau(t)), x),   B(x(c), x) = 0,

with c = a for a delayed and c = b for an advanced argument, computed by
monotone iteration between a lower solution alpha and an upper solution beta.
"""

from importlib import resources

from .bounds import BoundsSpec, check_feasibility, comparison_solution, construct, nagumo_probe
from .errors import (
    BracketError,
    DevbvpError,
    DeviationError,
    DomainError,
    EvaluationError,
    HypothesisViolation,
    InfeasibleBoundsError,
    MeshMismatchError,
    NonConvergenceError,
    PreconditionError,
    ProblemFileError,
)
from .ivp import IterationTrace, IvpSpec, solve_ivp
from .monotone import (
    CheckReport,
    DeviatedProblem,
    SolutionPair,
    check_one_sided_lipschitz,
    extremal_solutions,
    operator_g,
    verify_lower,
    verify_upper,
)
from .quadrature import ConditionReport, advance_condition, contraction_constant, delay_condition
from .rootfind import greatest_zero, least_zero
from .trajectory import Deviation, Mesh, Trajectory

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path of a shipped problem file, e.g. ``fixture_path("ex2")``."""
    if not name.endswith(".problem"):
        name += ".problem"
    return resources.files(__name__).joinpath("problems", name)


__all__ = [
    "BoundsSpec", "BracketError", "CheckReport", "ConditionReport", "Deviation", "DeviatedProblem",
    "DevbvpError", "DeviationError", "DomainError", "EvaluationError", "HypothesisViolation",
    "InfeasibleBoundsError", "IterationTrace", "IvpSpec", "Mesh", "MeshMismatchError",
    "NonConvergenceError", "PreconditionError", "ProblemFileError", "SolutionPair", "Trajectory",
    "advance_condition", "check_feasibility", "check_one_sided_lipschitz", "comparison_solution",
    "construct", "contraction_constant", "delay_condition", "extremal_solutions", "fixture_path",
    "greatest_zero", "least_zero", "nagumo_probe", "operator_g", "solve_ivp", "verify_lower",
    "verify_upper",
]
