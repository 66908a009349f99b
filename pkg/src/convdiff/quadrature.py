"""Gauss-Legendre element quadrature and load functionals.

Integrands that carry the boundary layer at x = 1 get geometrically graded
subintervals; everything else uses one Gauss rule per element.  Element
sums are always accumulated left to right so results are bit-reproducible.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .mesh import Mesh

DEFAULT_POINTS = 5
MACHINE_EPS = np.finfo(float).eps


class NonFiniteIntegrandError(FloatingPointError):
    pass


@lru_cache(maxsize=None)
def _leggauss(npoints: int):
    x, w = np.polynomial.legendre.leggauss(npoints)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on [-1, 1]."""

    npoints: int = DEFAULT_POINTS

    @property
    def points(self) -> np.ndarray:
        return _leggauss(self.npoints)[0]

    @property
    def weights(self) -> np.ndarray:
        return _leggauss(self.npoints)[1]

    @property
    def degree(self) -> int:
        return 2 * self.npoints - 1

    def on(self, a, b):
        """Points and weights mapped to [a, b]; a and b may be arrays of intervals."""
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        half = 0.5 * (b - a)
        return 0.5 * (a + b) + half * self.points, half * self.weights


def default_rule() -> QuadratureRule:
    """Base rule, overridable through CONVDIFF_QUAD_POINTS."""
    return QuadratureRule(int(os.environ.get("CONVDIFF_QUAD_POINTS", DEFAULT_POINTS)))


@dataclass(frozen=True)
class CompositePolicy:
    """How to split an interval before applying the Gauss rule.

    With ``layer_split`` on and ``eps`` given, intervals within
    ``10 * layer_width`` of x = 1 are graded geometrically toward their right
    end, down to pieces of width ``eps / 2``; graded pieces use the richer
    ``layer_points`` rule.
    """

    base_rule: QuadratureRule = field(default_factory=default_rule)
    layer_split: bool = False
    eps: Optional[float] = None
    layer_width: Optional[float] = None
    geometric_ratio: float = 0.5
    max_subdivisions: int = 60
    layer_points: int = 10

    def __post_init__(self):
        if not 0.0 < self.geometric_ratio < 1.0:
            raise ValueError("geometric_ratio must lie in (0, 1)")

    @classmethod
    def for_layer(cls, eps: float, **kw) -> "CompositePolicy":
        return cls(layer_split=eps > 0, eps=eps if eps > 0 else None, **kw)

    def width(self, h: float = 1.0) -> float:
        if self.layer_width is not None:
            return self.layer_width
        if not self.eps:
            return 0.0
        w = self.eps * abs(math.log(self.eps))
        return min(max(w, 10 * MACHINE_EPS), h)

    def zone_start(self, h: float = 1.0) -> float:
        """Left end of the region treated as layer-bearing."""
        if not self.layer_split or not self.eps:
            return math.inf
        return 1.0 - 10.0 * self.width(h)

    def describe(self) -> dict:
        return {
            "rule_points": self.base_rule.npoints,
            "layer_split": self.layer_split,
            "eps": self.eps,
            "layer_width": self.layer_width,
            "geometric_ratio": self.geometric_ratio,
            "max_subdivisions": self.max_subdivisions,
            "layer_points": self.layer_points,
        }


def graded_breakpoints(a: float, b: float, finest: float, ratio: float = 0.5, max_subdivisions: int = 60) -> np.ndarray:
    """a = p_0 < p_1 < ... < p_K = b with b - p_k shrinking geometrically."""
    pts = [a]
    d = (b - a) * ratio
    k = 0
    while d > finest and k < max_subdivisions:
        pts.append(b - d)
        d *= ratio
        k += 1
    pts.append(b)
    return np.asarray(pts)


def _pieces(a: float, b: float, policy: CompositePolicy, h: float):
    """Subintervals of [a, b] and the rule to use on them."""
    if policy.layer_split and policy.eps and b > policy.zone_start(h):
        bp = graded_breakpoints(a, b, 0.5 * policy.eps, policy.geometric_ratio, policy.max_subdivisions)
        return bp[:-1], bp[1:], QuadratureRule(max(policy.layer_points, policy.base_rule.npoints))
    return np.array([a]), np.array([b]), policy.base_rule


def _checked(values, x):
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        where = np.broadcast_to(x, values.shape)[bad].flat[0]
        raise NonFiniteIntegrandError(f"integrand is not finite at x = {where!r}")
    return values


def integrate(g: Callable, a: float, b: float, policy: Optional[CompositePolicy] = None) -> float:
    """Composite Gauss approximation of the integral of g over [a, b]."""
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    policy = policy or CompositePolicy()
    lo, hi, rule = _pieces(a, b, policy, b - a)
    x, w = rule.on(lo, hi)
    vals = _checked(g(x), x)
    total = 0.0
    for piece in (vals * w):
        total += float(np.sum(piece))
    return total


@dataclass(frozen=True)
class ElementQuadrature:
    """Flattened quadrature points over a run of mesh elements.

    ``elem[q]`` is the 0-based element owning point ``x[q]``; points are
    ordered element by element.
    """

    mesh: Mesh
    x: np.ndarray
    w: np.ndarray
    elem: np.ndarray
    nelem: int

    def local(self) -> np.ndarray:
        """Position of each point inside its element, in [0, 1]."""
        return (self.x - self.mesh.nodes[self.elem]) / self.mesh.h

    def sum_by_element(self, values) -> np.ndarray:
        return np.bincount(self.elem, weights=self.w * values, minlength=self.nelem)


def element_quadrature(mesh: Mesh, policy: Optional[CompositePolicy] = None, nelem: Optional[int] = None) -> ElementQuadrature:
    """Quadrature over elements 0..nelem-1 (all by default)."""
    policy = policy or CompositePolicy()
    nelem = mesh.n if nelem is None else nelem
    nodes = mesh.nodes
    start = policy.zone_start(mesh.h)
    plain = np.flatnonzero(nodes[1 : nelem + 1] <= start)
    layer = np.flatnonzero(nodes[1 : nelem + 1] > start)
    xs, ws, es = [], [], []
    if plain.size:
        x, w = policy.base_rule.on(nodes[plain], nodes[plain + 1])
        xs.append(x.ravel())
        ws.append(w.ravel())
        es.append(np.repeat(plain, policy.base_rule.npoints))
    for k in layer:
        lo, hi, rule = _pieces(nodes[k], nodes[k + 1], policy, mesh.h)
        x, w = rule.on(lo, hi)
        xs.append(x.ravel())
        ws.append(w.ravel())
        es.append(np.full(x.size, k))
    # plain elements precede layer elements and both lists are sorted
    return ElementQuadrature(mesh, np.concatenate(xs), np.concatenate(ws), np.concatenate(es), nelem)


def _forcing_on(f, eq: ElementQuadrature):
    return _checked(f(eq.x), eq.x)


def load_p1(f: Callable, mesh: Mesh, policy: Optional[CompositePolicy] = None) -> np.ndarray:
    """(f, phi_i) for i = 1..n-1."""
    eq = element_quadrature(mesh, policy)
    fx = _forcing_on(f, eq)
    t = eq.local()
    right = eq.sum_by_element(fx * t)  # element k against phi_{k+1}
    left = eq.sum_by_element(fx * (1.0 - t))  # element k against phi_k
    return right[:-1] + left[1:]


def load_bubble(f: Callable, mesh: Mesh, policy: Optional[CompositePolicy] = None) -> np.ndarray:
    """(f, B_i) for i = 1..n."""
    eq = element_quadrature(mesh, policy)
    t = eq.local()
    return eq.sum_by_element(_forcing_on(f, eq) * 4.0 * t * (1.0 - t))


def element_integrals(f: Callable, mesh: Mesh, policy: Optional[CompositePolicy] = None) -> np.ndarray:
    eq = element_quadrature(mesh, policy)
    return eq.sum_by_element(_forcing_on(f, eq))


def load_p1_deriv(f: Callable, mesh: Mesh, policy: Optional[CompositePolicy] = None) -> np.ndarray:
    """(f, phi_i') = (integral over left element - integral over right element) / h."""
    cell = element_integrals(f, mesh, policy)
    return (cell[:-1] - cell[1:]) / mesh.h
