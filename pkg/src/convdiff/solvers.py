"""One entry point for the four discretizations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import assembly
from .linalg import band_solve, saddle_solve
from .mesh import Mesh, P1Function, P2Function
from .quadrature import CompositePolicy

METHODS = ("linear", "spls", "pg", "sd")
SD_LOADS = ("consistent", "galerkin")


@dataclass(frozen=True)
class Solution:
    method: str
    u: P1Function
    residual: float
    w: Optional[P2Function] = None  # SPLS residual representative


def _p2_from_dofs(mesh: Mesh, x: np.ndarray) -> P2Function:
    n = mesh.n
    return P2Function(mesh, x[assembly.vertex_dof(np.arange(1, n))], x[assembly.bubble_dof(np.arange(1, n + 1))])


def solve(
    method: str,
    f: Callable,
    mesh: Mesh,
    eps: float,
    delta: Optional[float] = None,
    sd_load: str = "consistent",
    policy: Optional[CompositePolicy] = None,
) -> Solution:
    """Discrete solution of -eps u'' + u' = f with homogeneous Dirichlet data.

    ``delta`` (default 2h/3) is used by ``pg`` and ``sd``.  ``sd_load``
    selects the streamline-diffusion right-hand side: ``consistent`` adds
    delta (f, phi_i'), ``galerkin`` keeps the plain (f, phi_i).

    Raises ``SingularMatrixError`` when the system is numerically singular,
    e.g. the linear method with eps = 0 on an even mesh.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if sd_load not in SD_LOADS:
        raise ValueError(f"unknown SD load {sd_load!r}; choose from {', '.join(SD_LOADS)}")
    if method == "spls":
        sol = saddle_solve(assembly.system_spls(mesh, eps, f, policy))
        return Solution(method, P1Function(mesh, sol.u), max(sol.residual_first, sol.residual_second), _p2_from_dofs(mesh, sol.w))
    if method == "linear":
        A = assembly.system_standard(mesh, eps)
        rhs = assembly.rhs_standard(f, mesh, policy)
    else:
        A = assembly.system_pg_sd(mesh, eps, delta)
        if method == "pg":
            rhs = assembly.rhs_pg(f, mesh, policy)
        else:
            rhs = assembly.rhs_sd(f, mesh, delta, policy, streamline=sd_load == "consistent")
    out = band_solve(A, rhs)
    return Solution(method, P1Function(mesh, out.x), out.residual)
