"""Error norms, the operator T, and best-approximation oracles.

Every norm used here is the square root of a non-negative combination of
four quadratic functionals of e on the (possibly truncated) domain [0, L]:

    grad      |e|^2 = integral of e'^2
    l2        ||e||^2
    centered  ||e - mean(e)||^2                      (= ||e||^2 - L mean(e)^2)
    cell      h sum_K (mean_K(e) - mean(e))^2         (= |P_h T e|^2 on [0, 1])

``centered`` and ``cell`` are accumulated around the mean rather than as a
difference of squares, so they are non-negative by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .linalg import dense_spd_solve
from .mesh import Mesh, P1Function
from .quadrature import CompositePolicy, QuadratureRule, element_integrals, element_quadrature, load_p1

log = logging.getLogger(__name__)

C_P = 1.0 / math.pi  # best Poincare constant on an element, scaled by h
PG_SCALE = 3.0 / 19.0

NORM_NAMES = ("l2", "h1", "opt", "opt-h", "opt-pg", "sd", "balanced", "opt-delta")


class DegenerateNormError(np.linalg.LinAlgError):
    """The quadratic form is only a seminorm on the trial space."""


@dataclass(frozen=True)
class ExclusionSpec:
    """Drop a fraction of the mesh next to x = 1 from every error integral.

    The integration domain becomes [0, x_m].  ``cutoff`` removes
    ceil(fraction * n) nodes strictly inside the layer side plus the element
    touching the boundary, so 1% of n = 2048 nodes gives m = 2026.
    """

    fraction_right: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.fraction_right < 1.0:
            raise ValueError("fraction_right must lie in [0, 1)")

    def cutoff(self, n: int) -> int:
        if self.fraction_right == 0.0:
            return n
        # the 1e-9 guard keeps 0.01 * 1000 from rounding up to 11
        m = n - math.ceil(self.fraction_right * n - 1e-9) - 1
        if m < 1:
            raise ValueError(f"exclusion of {self.fraction_right} leaves no elements for n = {n}")
        return m


FULL_DOMAIN = ExclusionSpec()


@dataclass(frozen=True)
class NormKind:
    """A named error norm.

    ``delta=None`` means the mesh-bound default 2h/3.
    """

    name: str
    eps: float = 0.0
    delta: Optional[float] = None
    exclusion: ExclusionSpec = field(default=FULL_DOMAIN)

    def __post_init__(self):
        if self.name not in NORM_NAMES:
            raise ValueError(f"unknown norm {self.name!r}; choose from {', '.join(NORM_NAMES)}")
        if self.eps < 0 or (self.delta is not None and self.delta < 0):
            raise ValueError("eps and delta must be non-negative")

    def delta_for(self, h: float) -> float:
        return 2.0 * h / 3.0 if self.delta is None else self.delta

    def weights(self, h: float) -> dict:
        """Coefficients of grad, l2, centered and cell in the squared norm."""
        e, d = self.eps, self.delta_for(h)
        w = {
            "l2": {"l2": 1.0},
            "h1": {"grad": 1.0},
            "opt": {"grad": e * e, "centered": 1.0},
            "opt-delta": {"grad": (e + d) ** 2, "centered": 1.0},
            "opt-h": {"grad": e * e, "cell": 1.0},
            "opt-pg": {"grad": PG_SCALE * (e + d) ** 2, "cell": PG_SCALE},
            "sd": {"grad": e + d},
            "balanced": {"grad": (e + d) ** 2, "l2": 1.0},
        }[self.name]
        return {k: w.get(k, 0.0) for k in ("grad", "l2", "centered", "cell")}

    def with_exclusion(self, fraction_right: float) -> "NormKind":
        return replace(self, exclusion=ExclusionSpec(fraction_right))

    def label(self) -> str:
        return self.name


def l2() -> NormKind:
    return NormKind("l2")


def h1_semi() -> NormKind:
    return NormKind("h1")


def opt_continuous(eps: float) -> NormKind:
    return NormKind("opt", eps)


def opt_discrete(eps: float) -> NormKind:
    return NormKind("opt-h", eps)


def opt_pg(eps: float, delta: Optional[float] = None) -> NormKind:
    return NormKind("opt-pg", eps, delta)


def opt_delta(eps: float, delta: Optional[float] = None) -> NormKind:
    """Continuous optimal norm with diffusion eps + delta."""
    return NormKind("opt-delta", eps, delta)


def sd_norm(eps: float, delta: Optional[float] = None) -> NormKind:
    return NormKind("sd", eps, delta)


def balanced(eps: float, delta: Optional[float] = None) -> NormKind:
    return NormKind("balanced", eps, delta)


# ---------------------------------------------------------------------------
# function plumbing


def as_pair(u):
    """(value, derivative) callables for an ExactSolution, P1Function, TFunction or (u, du) tuple."""
    if isinstance(u, tuple):
        return u
    if hasattr(u, "du"):
        return u.u, u.du
    if hasattr(u, "deriv"):
        return u, u.deriv
    raise TypeError("need an object with a derivative (ExactSolution, P1Function) or a (u, du) pair")


class Moments(NamedTuple):
    grad: float
    l2: float
    centered: float
    cell: float
    integral: float
    length: float

    def combine(self, weights: dict) -> float:
        return sum(weights[k] * getattr(self, k) for k in ("grad", "l2", "centered", "cell"))


def error_moments(
    u,
    u_h: Optional[P1Function],
    mesh: Mesh,
    policy: Optional[CompositePolicy] = None,
    exclusion: ExclusionSpec = FULL_DOMAIN,
) -> Moments:
    """The four quadratic functionals of e = u - u_h on [0, x_m]."""
    f, df = as_pair(u)
    m = exclusion.cutoff(mesh.n)
    eq = element_quadrature(mesh, policy, nelem=m)
    e = np.asarray(f(eq.x), dtype=float)
    de = np.asarray(df(eq.x), dtype=float)
    if u_h is not None:
        if u_h.mesh.n != mesh.n:
            raise ValueError("u_h lives on a different mesh")
        vals, slopes = u_h.nodal_values, u_h.slopes
        e = e - (vals[eq.elem] + slopes[eq.elem] * (eq.x - mesh.nodes[eq.elem]))
        de = de - slopes[eq.elem]
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(de))):
        raise FloatingPointError("error function is not finite at some quadrature point")
    L = m * mesh.h
    cells = eq.sum_by_element(e)
    total = float(np.sum(cells))
    mean = total / L
    cell_means = cells / mesh.h
    return Moments(
        grad=float(np.sum(eq.sum_by_element(de * de))),
        l2=float(np.sum(eq.sum_by_element(e * e))),
        centered=float(np.sum(eq.sum_by_element((e - mean) ** 2))),
        cell=float(mesh.h * np.sum((cell_means - mean) ** 2)),
        integral=total,
        length=L,
    )


def layer_policy(eps: float) -> CompositePolicy:
    return CompositePolicy.for_layer(eps) if eps > 0 else CompositePolicy()


def norm_error(u, u_h: Optional[P1Function], kind: NormKind, mesh: Optional[Mesh] = None, policy=None) -> float:
    """||u - u_h|| in the norm ``kind``; pass ``u_h=None`` (with ``mesh``) for ||u||.

    The default quadrature grades elements toward x = 1 when ``u`` carries a
    boundary layer (anything with an ``eps`` attribute).
    """
    mesh = mesh if mesh is not None else u_h.mesh
    if policy is None:
        policy = layer_policy(getattr(u, "eps", 0.0))
    mom = error_moments(u, u_h, mesh, policy, kind.exclusion)
    return math.sqrt(max(mom.combine(kind.weights(mesh.h)), 0.0))


# ---------------------------------------------------------------------------
# the operator T


class TFunction:
    """Tu(x) = x * mean(u) - integral of u over [0, x]; (Tu)' = mean(u) - u."""

    def __init__(self, u: Callable, mean: Optional[float] = None, rule: QuadratureRule = QuadratureRule(20), panels: int = 16):
        self.base = u
        self.rule = rule
        self.panels = panels
        self.mean = self._primitive(np.array([1.0]))[0] if mean is None else float(mean)

    def _primitive(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        edges = flat[:, None] * (np.arange(self.panels + 1) / self.panels)
        q, w = self.rule.on(edges[:, :-1], edges[:, 1:])
        vals = np.asarray(self.base(q), dtype=float)
        return np.sum(vals * w, axis=(1, 2)).reshape(x.shape)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x * self.mean - self._primitive(x)

    def deriv(self, x):
        return self.mean - np.asarray(self.base(np.asarray(x, dtype=float)), dtype=float)


def T_apply(u: Callable, mean: Optional[float] = None) -> TFunction:
    return TFunction(u, mean)


def opt_seminorm_h(e: Callable, mesh: Mesh, policy: Optional[CompositePolicy] = None, exclusion: ExclusionSpec = FULL_DOMAIN) -> float:
    """|P_h T e| = sqrt(h sum_K (mean_K e - mean e)^2)."""
    m = exclusion.cutoff(mesh.n)
    cells = element_integrals(e, mesh, policy)[:m]
    mean = float(np.sum(cells)) / (m * mesh.h)
    return math.sqrt(mesh.h * float(np.sum((cells / mesh.h - mean) ** 2)))


# ---------------------------------------------------------------------------
# best approximation


def _gram(mesh: Mesh, w: dict) -> np.ndarray:
    n, h = mesh.n, mesh.h
    N = n - 1
    eye = np.eye(N)
    off = np.eye(N, k=1) + np.eye(N, k=-1)
    stiff = (2.0 * eye - off) / h
    mass = h / 6.0 * (4.0 * eye + off)
    ones = np.ones((N, N))
    P = np.zeros((n, N))  # integral of phi_j over element K
    P[np.arange(N), np.arange(N)] = h / 2
    P[np.arange(1, n), np.arange(N)] = h / 2
    G = w["grad"] * stiff + w["l2"] * mass
    G = G + w["centered"] * (mass - h * h * ones)
    G = G + w["cell"] * (P.T @ P / h - h * h * ones)
    return G, P


def best_approx(u, mesh: Mesh, kind: NormKind, policy: Optional[CompositePolicy] = None) -> P1Function:
    """argmin over P1 functions p of ||u - p|| in the norm ``kind`` (full domain only)."""
    if kind.exclusion.fraction_right:
        raise ValueError("best_approx works on the full domain")
    f, _ = as_pair(u)
    w = kind.weights(mesh.h)
    if w["grad"] == 0.0 and w["l2"] == 0.0 and w["centered"] == 0.0 and mesh.n % 2 == 0:
        raise DegenerateNormError(
            "the discrete optimal seminorm vanishes on the alternating mode sum of phi_(2i-1) "
            f"for even n = {mesh.n}; the best approximation is not unique"
        )
    if policy is None:
        policy = layer_policy(getattr(u, "eps", 0.0))
    h = mesh.h
    G, P = _gram(mesh, w)
    nodal = np.asarray(f(mesh.nodes), dtype=float)
    cells = element_integrals(f, mesh, policy)
    total = float(np.sum(cells))
    load = load_p1(f, mesh, policy)
    # (u', phi_i') is exact from nodal values
    rhs = w["grad"] * (2.0 * nodal[1:-1] - nodal[:-2] - nodal[2:]) / h
    rhs = rhs + w["l2"] * load
    rhs = rhs + w["centered"] * (load - h * total)
    rhs = rhs + w["cell"] * (P.T @ cells / h - h * total)
    coeffs = dense_spd_solve(G, rhs)
    scale = np.max(np.abs(rhs)) + np.max(np.abs(G)) * np.max(np.abs(coeffs))
    grad_norm = float(np.max(np.abs(G @ coeffs - rhs)))
    if grad_norm > 1e-8 * scale:
        raise np.linalg.LinAlgError(f"normal equations not satisfied: residual {grad_norm:.3e}")
    return P1Function(mesh, coeffs)


def infsup_sandwich_check(u, mesh: Mesh, eps: float, policy: Optional[CompositePolicy] = None):
    """(||u||_{*,h}^2, ||u||_*^2, ||u||_{*,h}^2 + (h/pi)^2 |u|^2); the first two bound the middle one."""
    mom = error_moments(u, None, mesh, policy)
    lhs = eps * eps * mom.grad + mom.cell
    mid = eps * eps * mom.grad + mom.centered
    return lhs, mid, lhs + (C_P * mesh.h) ** 2 * mom.grad
