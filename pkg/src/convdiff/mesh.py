"""Uniform mesh on [0, 1] with hat and bubble bases.

Trial functions are continuous piecewise linears vanishing at both ends;
the quadratic space is stored hierarchically as vertex coefficients plus
one bubble coefficient per element.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

BOUNDARY_TOL = 1e-12


class DomainError(ValueError):
    """Raised when a point lies outside [0, 1] or an index is out of range."""


@dataclass(frozen=True)
class Mesh:
    n: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"mesh needs n >= 2 elements, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", 1.0 / self.n)
        nodes = np.arange(self.n + 1) / self.n
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def element_of(self, x) -> np.ndarray:
        """Element index (0-based) containing x; right-limit at interior nodes, last element at x=1."""
        x = _check_domain(x)
        k = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(k, 0, self.n - 1)


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)) or np.any(~np.isfinite(x)):
        raise DomainError("evaluation point outside [0, 1]")
    return x


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class P1Function:
    """Continuous piecewise linear function with zero boundary values."""

    mesh: Mesh
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.shape != (self.mesh.n - 1,):
            raise ValueError(f"expected {self.mesh.n - 1} interior coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, mesh: Mesh) -> "P1Function":
        return cls(mesh, np.zeros(mesh.n - 1))

    @classmethod
    def hat(cls, mesh: Mesh, j: int) -> "P1Function":
        if not 1 <= j <= mesh.n - 1:
            raise DomainError(f"hat index {j} outside 1..{mesh.n - 1}")
        c = np.zeros(mesh.n - 1)
        c[j - 1] = 1.0
        return cls(mesh, c)

    @property
    def nodal_values(self) -> np.ndarray:
        """Values at all n+1 nodes, boundary zeros included."""
        return np.concatenate(([0.0], self.coeffs, [0.0]))

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.nodal_values) / self.mesh.h

    def __call__(self, x):
        return eval_p1(self, x)

    def deriv(self, x):
        return eval_p1_deriv(self, x)


@dataclass(frozen=True)
class P2Function:
    """Hierarchical C0-P2 function: hats plus one bubble per element."""

    mesh: Mesh
    vertex_coeffs: np.ndarray
    bubble_coeffs: np.ndarray

    def __post_init__(self):
        v = _frozen(self.vertex_coeffs)
        b = _frozen(self.bubble_coeffs)
        if v.shape != (self.mesh.n - 1,) or b.shape != (self.mesh.n,):
            raise ValueError("P2Function needs n-1 vertex and n bubble coefficients")
        object.__setattr__(self, "vertex_coeffs", v)
        object.__setattr__(self, "bubble_coeffs", b)

    @property
    def linear_part(self) -> P1Function:
        return P1Function(self.mesh, self.vertex_coeffs)

    def __call__(self, x):
        x = _check_domain(x)
        k = self.mesh.element_of(x)
        return eval_p1(self.linear_part, x) + self.bubble_coeffs[k] * _bubble_on(self.mesh, k, x)

    def deriv(self, x):
        x = _check_domain(x)
        k = self.mesh.element_of(x)
        return eval_p1_deriv(self.linear_part, x) + self.bubble_coeffs[k] * _bubble_deriv_on(self.mesh, k, x)


def eval_p1(u: P1Function, x):
    """Evaluate sum_i u_i phi_i(x)."""
    x = _check_domain(x)
    return np.interp(x, u.mesh.nodes, u.nodal_values)


def eval_p1_deriv(u: P1Function, x):
    """Elementwise-constant derivative (right limit at interior nodes, left limit at x=1)."""
    return u.slopes[u.mesh.element_of(x)]


def _bubble_on(mesh: Mesh, k, x):
    a = mesh.nodes[k]
    t = (x - a) / mesh.h
    return 4.0 * t * (1.0 - t)


def _bubble_deriv_on(mesh: Mesh, k, x):
    a = mesh.nodes[k]
    t = (x - a) / mesh.h
    return 4.0 * (1.0 - 2.0 * t) / mesh.h


def eval_bubble(mesh: Mesh, i: int, x):
    """B_i = 4 phi_{i-1} phi_i on element i = [x_{i-1}, x_i] (1-based), zero elsewhere."""
    if not 1 <= i <= mesh.n:
        raise DomainError(f"bubble index {i} outside 1..{mesh.n}")
    x = _check_domain(x)
    a, b = mesh.nodes[i - 1], mesh.nodes[i]
    inside = (x >= a) & (x <= b)
    return np.where(inside, _bubble_on(mesh, i - 1, x), 0.0)


def eval_bubble_deriv(mesh: Mesh, i: int, x):
    if not 1 <= i <= mesh.n:
        raise DomainError(f"bubble index {i} outside 1..{mesh.n}")
    x = _check_domain(x)
    a, b = mesh.nodes[i - 1], mesh.nodes[i]
    inside = (x >= a) & (x <= b)
    return np.where(inside, _bubble_deriv_on(mesh, i - 1, x), 0.0)


def eval_hat(mesh: Mesh, j: int, x):
    """Nodal hat phi_j for any node j = 0..n (boundary hats included)."""
    if not 0 <= j <= mesh.n:
        raise DomainError(f"hat index {j} outside 0..{mesh.n}")
    x = _check_domain(x)
    return np.maximum(0.0, 1.0 - np.abs(x - mesh.nodes[j]) / mesh.h)


def interpolate_p1(u: Callable, mesh: Mesh) -> P1Function:
    """Nodal interpolant; boundary values are forced to zero."""
    ends = np.asarray(u(np.array([0.0, 1.0])), dtype=float)
    if np.any(np.abs(ends) > BOUNDARY_TOL):
        warnings.warn(
            f"interpolated function is nonzero at the boundary ({ends[0]:.3e}, {ends[1]:.3e}); forcing zeros",
            stacklevel=2,
        )
    return P1Function(mesh, np.asarray(u(mesh.interior), dtype=float))
