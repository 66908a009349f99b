"""Matrices and load vectors for the four discretizations.

All trial spaces are C0-P1 on a uniform mesh, so every square system is a
combination of

    S = tridiag(-1, 2, -1)        (h times the stiffness matrix)
    C = 1/2 tridiag(-1, 0, 1)     (the convection matrix (phi_j', phi_i))

The SPLS test space is hierarchical C0-P2 with degrees of freedom ordered
left to right: b_1, v_1, b_2, v_2, ..., v_{n-1}, b_n.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
import scipy.sparse

from .linalg import BandMatrix, SaddleSystem
from .mesh import Mesh
from .quadrature import CompositePolicy, load_bubble, load_p1, load_p1_deriv

__all__ = [
    "BandMatrix",
    "SaddleSystem",
    "default_delta",
    "matrix_S",
    "matrix_C",
    "system_standard",
    "system_pg_sd",
    "rhs_standard",
    "rhs_pg",
    "rhs_sd",
    "system_spls",
    "bubble_dof",
    "vertex_dof",
]


def _dim(n: int) -> int:
    if int(n) != n or n < 2:
        raise ValueError(f"need n >= 2 elements, got {n}")
    return int(n) - 1


def default_delta(mesh: Mesh) -> float:
    """Streamline weight 2h/3, the value the bubble test space produces."""
    return 2.0 * mesh.h / 3.0


def matrix_S(n: int) -> BandMatrix:
    return BandMatrix.from_diagonals({-1: -1.0, 0: 2.0, 1: -1.0}, _dim(n))


def matrix_C(n: int) -> BandMatrix:
    return BandMatrix.from_diagonals({-1: -0.5, 0: 0.0, 1: 0.5}, _dim(n))


def system_standard(mesh: Mesh, eps: float) -> BandMatrix:
    """(eps/h) S + C; eps = 0 gives the reduced matrix C."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return (eps / mesh.h) * matrix_S(mesh.n) + matrix_C(mesh.n)


def system_pg_sd(mesh: Mesh, eps: float, delta: Optional[float] = None) -> BandMatrix:
    """((eps + delta)/h) S + C, shared by upwind Petrov-Galerkin and streamline diffusion."""
    delta = default_delta(mesh) if delta is None else delta
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return system_standard(mesh, eps + delta)


def rhs_standard(f: Callable, mesh: Mesh, policy: Optional[CompositePolicy] = None) -> np.ndarray:
    return load_p1(f, mesh, policy)


def rhs_pg(f: Callable, mesh: Mesh, policy: Optional[CompositePolicy] = None) -> np.ndarray:
    """(f, phi_i) + (f, B_i - B_{i+1})."""
    bub = load_bubble(f, mesh, policy)
    return load_p1(f, mesh, policy) + (bub[:-1] - bub[1:])


def rhs_sd(
    f: Callable,
    mesh: Mesh,
    delta: Optional[float] = None,
    policy: Optional[CompositePolicy] = None,
    streamline: bool = True,
) -> np.ndarray:
    """(f, phi_i) + delta (f, phi_i').

    ``streamline=False`` drops the delta (f, phi_i') term, leaving plain
    artificial diffusion with the Galerkin load.
    """
    delta = default_delta(mesh) if delta is None else delta
    base = load_p1(f, mesh, policy)
    if not streamline:
        return base
    return base + delta * load_p1_deriv(f, mesh, policy)


def bubble_dof(i):
    """Position of bubble B_i (1-based element index) in the P2 ordering."""
    return 2 * (np.asarray(i) - 1)


def vertex_dof(j):
    """Position of hat phi_j (1-based interior node) in the P2 ordering."""
    return 2 * np.asarray(j) - 1


def p2_stiffness(mesh: Mesh) -> BandMatrix:
    """a0 on C0-P2: S/h on vertices, 16/(3h) on bubbles, no vertex-bubble coupling."""
    n, h = mesh.n, mesh.h
    N = 2 * n - 1
    diag = np.empty(N)
    diag[0::2] = 16.0 / (3.0 * h)
    diag[1::2] = 2.0 / h
    off2 = np.zeros(N - 2)
    off2[1::2] = -1.0 / h
    return BandMatrix.from_diagonals({-2: off2, -1: 0.0, 0: diag, 1: 0.0, 2: off2}, N)


def p2_convection_block(mesh: Mesh, eps: float) -> scipy.sparse.csr_matrix:
    """B[v, j] = b(v, phi_j) = eps (phi_j', v') + (phi_j', v) for v in the P2 basis."""
    n, h = mesh.n, mesh.h
    rows, cols, vals = [], [], []
    lin = system_standard(mesh, eps)
    for off in (-1, 0, 1):
        d = lin.diagonal(off)
        i = np.arange(max(0, -off), min(n - 1, n - 1 - off))
        j = i + off
        rows.append(vertex_dof(i + 1))
        cols.append(j)
        vals.append(d)
    # (phi_j', B_k) = slope * 2h/3; eps (phi_j', B_k') = 0
    k = np.arange(1, n + 1)
    for node, slope in ((k - 1, -1.0 / h), (k, 1.0 / h)):
        keep = (node >= 1) & (node <= n - 1)
        rows.append(bubble_dof(k[keep]))
        cols.append(node[keep] - 1)
        vals.append(np.full(keep.sum(), slope * 2.0 * h / 3.0))
    return scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * n - 1, n - 1)
    )


def p2_load(f: Callable, mesh: Mesh, policy: Optional[CompositePolicy] = None) -> np.ndarray:
    n = mesh.n
    out = np.empty(2 * n - 1)
    out[vertex_dof(np.arange(1, n))] = load_p1(f, mesh, policy)
    out[bubble_dof(np.arange(1, n + 1))] = load_bubble(f, mesh, policy)
    return out


def system_spls(mesh: Mesh, eps: float, f: Callable, policy: Optional[CompositePolicy] = None) -> SaddleSystem:
    """Blocks of: a0(w, v) + b(v, u) = (f, v) on C0-P2,  b(w, q) = 0 on C0-P1."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return SaddleSystem(p2_stiffness(mesh), p2_convection_block(mesh, eps), p2_load(f, mesh, policy))
