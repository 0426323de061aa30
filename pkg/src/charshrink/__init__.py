"""Precision matrix estimation that shrinks a user-chosen affine characteristic."""
__version__ = "0.1.0"

from .admm import ProblemSpec, Solution, SolverConfig, SolverState, solve
from .exceptions import (
    DegeneratePortfolioError,
    DivergenceError,
    InvalidArgumentError,
    NotPositiveDefiniteError,
    UndefinedRateError,
)

__all__ = [
    "ProblemSpec",
    "Solution",
    "SolverConfig",
    "SolverState",
    "solve",
    "DegeneratePortfolioError",
    "DivergenceError",
    "InvalidArgumentError",
    "NotPositiveDefiniteError",
    "UndefinedRateError",
]
