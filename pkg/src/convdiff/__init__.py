"""Finite elements for -eps u'' + u' = f on (0, 1) with u(0) = u(1) = 0."""

from .exact import NAMED_FORCINGS, ExactSolution, Forcing, exact_solution
from .linalg import BandMatrix, SingularMatrixError
from .mesh import Mesh, P1Function, P2Function, interpolate_p1
from .norms import (
    ExclusionSpec,
    NormKind,
    balanced,
    best_approx,
    h1_semi,
    l2,
    norm_error,
    opt_continuous,
    opt_delta,
    opt_discrete,
    opt_pg,
    sd_norm,
)
from .solvers import METHODS, Solution, solve

__version__ = "0.1.0"

__all__ = [
    "NAMED_FORCINGS",
    "BandMatrix",
    "ExactSolution",
    "ExclusionSpec",
    "Forcing",
    "METHODS",
    "Mesh",
    "NormKind",
    "P1Function",
    "P2Function",
    "SingularMatrixError",
    "Solution",
    "balanced",
    "best_approx",
    "h1_semi",
    "l2",
    "opt_continuous",
    "opt_delta",
    "opt_discrete",
    "opt_pg",
    "sd_norm",
    "exact_solution",
    "interpolate_p1",
    "norm_error",
    "solve",
]
