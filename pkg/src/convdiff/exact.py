"""Forcing terms and closed-form solutions of -eps u'' + u' = f, u(0) = u(1) = 0.

Every exact solution has the form

    u(x) = s(x) - s(0) - (s(1) - s(0)) * r(x; eps)

with ``s`` a smooth particular solution and ``r`` the boundary-layer ratio.
Formulas are written against a small math backend so the same expressions
can be evaluated in float64 (numpy) or in extended precision (mpmath).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import mpmath
import numpy as np

OMEGA = 3.5 * math.pi  # cos(7 pi x / 2)


class UnsupportedForcingError(ValueError):
    """No closed form is available for this forcing."""


class _NumpyLib:
    exp = staticmethod(np.exp)
    expm1 = staticmethod(np.expm1)
    sin = staticmethod(np.sin)
    cos = staticmethod(np.cos)
    num = staticmethod(float)


class _MpLib:
    exp = staticmethod(mpmath.exp)
    expm1 = staticmethod(mpmath.expm1)
    sin = staticmethod(mpmath.sin)
    cos = staticmethod(mpmath.cos)
    num = staticmethod(mpmath.mpf)


NP = _NumpyLib()
MP = _MpLib()

# Smooth pieces of each named forcing: f, its primitive from 0, and its mean.
_NAMED = {
    "1": (lambda x, m: 1.0 + 0.0 * x, lambda x, m: x, 1.0),
    "1-2x": (lambda x, m: 1.0 - 2.0 * x, lambda x, m: x - x * x, 0.0),
    "2x": (lambda x, m: 2.0 * x, lambda x, m: x * x, 1.0),
    "cos7pi2": (
        lambda x, m: m.cos(OMEGA * x),
        lambda x, m: m.sin(OMEGA * x) / OMEGA,
        -2.0 / (7.0 * math.pi),
    ),
}

_ALIASES = {
    "one": "1",
    "1": "1",
    "1-2x": "1-2x",
    "one_minus_two_x": "1-2x",
    "2x": "2x",
    "two_x": "2x",
    "cos7pi2": "cos7pi2",
    "cos": "cos7pi2",
}


@dataclass(frozen=True)
class Forcing:
    tag: str
    func: Callable = field(repr=False, compare=False)
    mean: Optional[float] = None

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    @property
    def named(self) -> bool:
        return self.tag in _NAMED

    @classmethod
    def from_name(cls, name: str) -> "Forcing":
        key = _ALIASES.get(name.strip().lower())
        if key is None:
            raise KeyError(f"unknown forcing {name!r}; choose from 1, 1-2x, 2x, cos7pi2")
        f, _, mean = _NAMED[key]
        return cls(key, lambda x: f(x, NP), mean)

    @classmethod
    def custom(cls, func: Callable, mean: Optional[float] = None) -> "Forcing":
        return cls("custom", func, mean)


ONE = Forcing.from_name("1")
ONE_MINUS_TWO_X = Forcing.from_name("1-2x")
TWO_X = Forcing.from_name("2x")
COS_SEVEN_PI_HALF = Forcing.from_name("cos7pi2")
NAMED_FORCINGS = (ONE, ONE_MINUS_TWO_X, TWO_X, COS_SEVEN_PI_HALF)


def _check_eps(eps):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")


def _ratio(x, eps, m):
    # all exponents non-positive; expm1 keeps the large-eps branch accurate
    if 1.0 / eps < 30.0:
        return m.expm1(x / eps) / m.expm1(1.0 / eps)
    tail = m.exp(-1.0 / eps)  # below 1e-13 here, so 1 - tail loses nothing
    return (m.exp((x - 1.0) / eps) - tail) / (1.0 - tail)


def _ratio_d1(x, eps, m):
    """eps * r'(x)."""
    if 1.0 / eps < 30.0:
        return m.exp(x / eps) / m.expm1(1.0 / eps)
    return m.exp((x - 1.0) / eps) / (1.0 - m.exp(-1.0 / eps))


def layer_ratio(x, eps: float):
    """r(x) = (e^{x/eps} - 1) / (e^{1/eps} - 1), evaluated without overflow."""
    _check_eps(eps)
    return _ratio(np.asarray(x, dtype=float), eps, NP)


class ExactSolution:
    """u, u', u'' for a named forcing at diffusion eps."""

    def __init__(self, forcing: Forcing, eps: float):
        if not forcing.named:
            raise UnsupportedForcingError(
                "no closed-form solution for custom forcings; an ODE fallback is not provided"
            )
        _check_eps(eps)
        self.forcing = forcing
        self.eps = float(eps)
        tag = forcing.tag
        e = self.eps
        # particular solution s = c2 x^2 + c1 x + a sin(wx) + b cos(wx)
        c2 = c1 = a = b = 0.0
        if tag == "1":
            c1 = 1.0
        elif tag == "2x":
            c2, c1 = 1.0, 2.0 * e
        elif tag == "1-2x":
            c2, c1 = -1.0, 1.0 - 2.0 * e
        else:
            # -eps s'' + s' = cos(wx):  sin: eps w^2 a - w b = 0,  cos: w a + eps w^2 b = 1
            w = OMEGA
            a, b = np.linalg.solve([[e * w * w, -w], [w, e * w * w]], [0.0, 1.0])
        self._coef = (float(c2), float(c1), float(a), float(b))
        s0 = self._smooth(0.0, 0, NP)
        s1 = self._smooth(1.0, 0, NP)
        self._shift = float(s0)
        self._jump = float(s1 - s0)

    def _smooth(self, x, order, m):
        c2, c1, a, b = self._coef
        w = OMEGA
        if order == 0:
            return c2 * x * x + c1 * x + a * m.sin(w * x) + b * m.cos(w * x)
        if order == 1:
            return 2 * c2 * x + c1 + w * (a * m.cos(w * x) - b * m.sin(w * x))
        return 2 * c2 - w * w * (a * m.sin(w * x) + b * m.cos(w * x))

    def evaluate(self, x, order: int = 0, lib=NP):
        """Derivative of the given order at x using backend ``lib`` (NP or MP)."""
        # lift eps into the backend so eps**2 is not rounded to float64 first
        e = lib.num(self.eps)
        s = self._smooth(x, order, lib)
        if order == 0:
            return s - self._shift - self._jump * _ratio(x, e, lib)
        d1 = _ratio_d1(x, e, lib)
        if order == 1:
            return s - self._jump * d1 / e
        return s - self._jump * d1 / (e * e)

    def u(self, x):
        return self.evaluate(np.asarray(x, dtype=float), 0)

    def du(self, x):
        return self.evaluate(np.asarray(x, dtype=float), 1)

    def d2u(self, x):
        return self.evaluate(np.asarray(x, dtype=float), 2)

    __call__ = u

    def residual(self, x, lib=NP):
        """-eps u'' + u' - f at x."""
        f, _, _ = _NAMED[self.forcing.tag]
        return -lib.num(self.eps) * self.evaluate(x, 2, lib) + self.evaluate(x, 1, lib) - f(x, lib)


def exact_solution(forcing: Forcing, eps: float) -> ExactSolution:
    return ExactSolution(forcing, eps)


def reduced_w(forcing: Forcing) -> Callable:
    """w(x) = integral of f over [0, x]; the eps -> 0 limit with inflow condition."""
    if not forcing.named:
        raise UnsupportedForcingError("reduced solutions need a named forcing")
    _, prim, _ = _NAMED[forcing.tag]
    return lambda x: np.asarray(prim(np.asarray(x, dtype=float), NP), dtype=float)


def reduced_theta(forcing: Forcing) -> Callable:
    """theta(x) = -integral of f over [x, 1] = w(x) - mean(f)."""
    w = reduced_w(forcing)
    mean = forcing.mean
    return lambda x: w(x) - mean


def layer_graded_samples(eps: float, count: int = 1000) -> np.ndarray:
    """Sample points on [0, 1] with half of them clustered geometrically toward x = 1."""
    half = count // 2
    uniform = np.linspace(0.0, 1.0, count - half)
    depth = min(1.0, 50.0 * eps)
    graded = 1.0 - np.geomspace(depth, max(eps * 1e-3, 1e-300), half)
    return np.unique(np.concatenate((uniform, graded)))


def verify_residual(sol, samples=None, dps: int = 40) -> float:
    """Max |-eps u'' + u' - f| over ``samples``, evaluated in extended precision.

    ``sol`` is anything exposing ``eps`` and ``residual(x, lib)``.  In float64
    the two layer terms cancel at the scale 1/eps, so the check runs in mpmath.
    """
    if samples is None:
        samples = layer_graded_samples(sol.eps)
    worst = 0.0
    with mpmath.workdps(dps):
        for x in np.asarray(samples, dtype=float):
            worst = max(worst, abs(float(sol.residual(mpmath.mpf(float(x)), MP))))
    return worst
