import math

import mpmath
import numpy as np
import pytest
from scipy.optimize import minimize, minimize_scalar

from convdiff.exact import ONE_MINUS_TWO_X, TWO_X, ExactSolution
from convdiff.mesh import Mesh, P1Function, interpolate_p1
from convdiff.norms import (
    NORM_NAMES,
    DegenerateNormError,
    ExclusionSpec,
    NormKind,
    balanced,
    best_approx,
    error_moments,
    h1_semi,
    infsup_sandwich_check,
    l2,
    norm_error,
    opt_continuous,
    opt_delta,
    opt_discrete,
    opt_pg,
    opt_seminorm_h,
    sd_norm,
    T_apply,
)
from convdiff.quadrature import CompositePolicy, QuadratureRule
from convdiff.solvers import solve
from tests.helpers import refined_integral

FINE = CompositePolicy(QuadratureRule(12))

poly = (lambda x: x * (1 - x), lambda x: 1 - 2 * x)
sine = (lambda x: np.sin(np.pi * x), lambda x: np.pi * np.cos(np.pi * x))


def test_exclusion_cutoff():
    assert ExclusionSpec().cutoff(64) == 64
    assert ExclusionSpec(0.01).cutoff(2048) == 2048 - 21 - 1
    assert ExclusionSpec(0.01).cutoff(100) == 98
    assert ExclusionSpec(0.01).cutoff(64) == 62
    with pytest.raises(ValueError):
        ExclusionSpec(1.0)
    with pytest.raises(ValueError):
        ExclusionSpec(0.9).cutoff(4)


def test_norm_kind_validation():
    with pytest.raises(ValueError):
        NormKind("energy")
    with pytest.raises(ValueError):
        NormKind("sd", -1.0)
    assert NormKind("sd", 0.0).delta_for(0.3) == pytest.approx(0.2)


@pytest.mark.parametrize("u,value", [(poly, 1 / 180), (sine, 0.5 - 4 / math.pi**2)])
def test_T_norm_identity(u, value):
    Tu = T_apply(u[0])
    m = Mesh(16)
    mom = error_moments((Tu, Tu.deriv), None, m, FINE)
    assert mom.grad == pytest.approx(value, rel=1e-12)
    assert abs(Tu(0.0)) < 1e-15 and abs(Tu(1.0)) < 1e-14


def test_T_weak_definition():
    # a0(Tu, q) = (u', q) for hats q
    m = Mesh(8)
    Tu = T_apply(sine[0])
    for j in (1, 4, 7):
        q = P1Function.hat(m, j)
        xj = m.nodes[j]
        brk = [xj - m.h, xj, xj + m.h]
        lhs = refined_integral(lambda s: Tu.deriv(s) * q.deriv(min(max(s, 0.0), 1.0)), brk)
        rhs = refined_integral(lambda s: sine[1](s) * q(s), brk)
        assert lhs == pytest.approx(rhs, abs=1e-12)
    # values of Tu itself against the closed form x*mean - (1 - cos(pi x))/pi
    x = np.linspace(0, 1, 7)
    assert np.allclose(Tu(x), x * 2 / math.pi - (1 - np.cos(math.pi * x)) / math.pi, atol=1e-14)


def test_opt_seminorm_examples():
    m2 = Mesh(2)
    assert opt_seminorm_h(P1Function.hat(m2, 1), m2) == pytest.approx(0.0, abs=1e-15)
    m = Mesh(4)
    assert opt_seminorm_h(lambda x: 3.0 + 0 * x, m) == pytest.approx(0.0, abs=1e-14)
    assert opt_seminorm_h(lambda x: x - 0.5, m) ** 2 == pytest.approx(5 / 64, rel=1e-14)
    # brute force: (1/h) sum (int_K e)^2 - (int e)^2 with refined integrals
    e = lambda x: np.exp(x) * np.sin(3 * x)
    cells = [refined_integral(e, [a, a + m.h]) for a in m.nodes[:-1]]
    ref = sum(c * c for c in cells) / m.h - sum(cells) ** 2
    assert opt_seminorm_h(e, m) ** 2 == pytest.approx(ref, rel=1e-12)


def _brute_norm_sq(kind, e, de, m, L):
    """Squared norm from its defining formula with high-precision integrals on [0, L]."""
    eps = kind.eps
    d = kind.delta_for(m.h)
    grad = refined_integral(lambda s: de(s) ** 2, np.linspace(0, L, 5))
    l2sq = refined_integral(lambda s: e(s) ** 2, np.linspace(0, L, 5))
    tot = refined_integral(e, np.linspace(0, L, 5))
    ncell = round(L / m.h)
    cells = [refined_integral(e, [k * m.h, (k + 1) * m.h]) for k in range(ncell)]
    semi_h = sum(c * c for c in cells) / m.h - tot**2 / L
    star = l2sq - tot**2 / L
    return {
        "l2": l2sq,
        "h1": grad,
        "opt": eps**2 * grad + star,
        "opt-delta": (eps + d) ** 2 * grad + star,
        "opt-h": eps**2 * grad + semi_h,
        "opt-pg": 3 / 19 * ((eps + d) ** 2 * grad + semi_h),
        "sd": (eps + d) * grad,
        "balanced": (eps + d) ** 2 * grad + l2sq,
    }[kind.name]


@pytest.mark.parametrize("name", NORM_NAMES)
@pytest.mark.parametrize("fraction", [0.0, 0.1])
def test_norms_match_definitions(name, fraction):
    m = Mesh(10)
    e = lambda s: np.exp(s) * np.sin(2 * s) + 0.3
    de = lambda s: np.exp(s) * (np.sin(2 * s) + 2 * np.cos(2 * s))
    kind = NormKind(name, 0.05, exclusion=ExclusionSpec(fraction))
    L = kind.exclusion.cutoff(m.n) * m.h
    got = norm_error((e, de), None, kind, m, FINE)
    assert got**2 == pytest.approx(_brute_norm_sq(kind, e, de, m, L), rel=1e-11)


def test_zero_error_every_kind():
    m = Mesh(8)
    u = P1Function(m, np.random.default_rng(0).normal(size=7))
    for name in NORM_NAMES:
        assert norm_error(u, u, NormKind(name, 1e-3)) == 0.0


def test_interpolation_orders():
    u = (lambda x: np.sin(np.pi * x) * np.exp(x), lambda x: np.exp(x) * (np.sin(np.pi * x) + np.pi * np.cos(np.pi * x)))
    e0, e1 = [], []
    for n in (16, 32, 64):
        m = Mesh(n)
        uI = interpolate_p1(u[0], m)
        e0.append(norm_error(u, uI, l2()))
        e1.append(norm_error(u, uI, h1_semi()))
    assert math.log2(e0[-2] / e0[-1]) == pytest.approx(2.0, abs=0.05)
    assert math.log2(e1[-2] / e1[-1]) == pytest.approx(1.0, abs=0.05)


def test_spls_table1_first_row():
    # Table 1 indexes its meshes so that level 1 has four elements
    u = ExactSolution(ONE_MINUS_TWO_X, 1e-6)
    uh = solve("spls", ONE_MINUS_TWO_X, Mesh(4), 1e-6).u
    assert round(norm_error(u, uh, h1_semi()), 3) == 0.144
    assert round(norm_error(u, uh, l2()), 3) == 0.011


def test_layer_resolution_matters():
    u = ExactSolution(TWO_X, 1e-10)
    m = Mesh(64)
    uh = solve("spls", TWO_X, m, 1e-10).u
    graded = norm_error(u, uh, h1_semi())
    plain = norm_error(u, uh, h1_semi(), policy=CompositePolicy())
    assert graded == pytest.approx(math.sqrt(1 / (2 * 1e-10)), rel=1e-3)  # layer carries |u|^2 ~ 1/(2 eps)
    assert abs(plain - graded) / graded > 0.5


def test_best_approx_l2_scalar():
    m = Mesh(2)
    u = poly
    got = best_approx(u, m, l2()).coeffs[0]
    f = lambda c: refined_integral(lambda s: (u[0](s) - c * max(0.0, 1 - abs(s - 0.5) / 0.5)) ** 2, [0, 0.5, 1])
    ref = minimize_scalar(f, bracket=(0.0, 0.5), method="golden", tol=1e-12).x
    assert got == pytest.approx(ref, abs=1e-6)
    assert got == pytest.approx(5 / 16, abs=1e-12)  # (u, phi)/(phi, phi) = (5/96)/(1/6)


def test_best_approx_degenerate():
    with pytest.raises(DegenerateNormError, match="alternating"):
        best_approx(poly, Mesh(6), opt_discrete(0.0))
    best_approx(poly, Mesh(7), opt_discrete(0.0))


def test_best_approx_matches_numerical_minimization():
    m = Mesh(8)
    u = sine
    kind = opt_discrete(0.05)
    got = best_approx(u, m, kind)
    obj = lambda c: norm_error(u, P1Function(m, c), kind, policy=FINE) ** 2
    ref = minimize(obj, interpolate_p1(u[0], m).coeffs, method="BFGS", options={"gtol": 1e-12}).x
    assert np.allclose(got.coeffs, ref, atol=1e-6)


@pytest.mark.parametrize("kind", [l2(), h1_semi(), opt_continuous(1e-3), opt_discrete(1e-3), opt_pg(1e-3), balanced(1e-3), sd_norm(1e-3), opt_delta(1e-3)], ids=lambda k: k.name)
def test_best_approx_beats_interpolant(kind):
    u = ExactSolution(TWO_X, 1e-3)
    m = Mesh(32)
    best = norm_error(u, best_approx(u, m, kind), kind)
    interp = norm_error(u, interpolate_p1(u, m), kind)
    assert best <= interp * (1 + 1e-12)


def test_best_approx_rejects_exclusion():
    with pytest.raises(ValueError):
        best_approx(poly, Mesh(4), l2().with_exclusion(0.1))


@pytest.mark.parametrize(
    "u,n,eps",
    [(sine, 8, 1e-2), (poly, 4, 0.0)],
)
def test_sandwich_examples(u, n, eps):
    lo, mid, hi = infsup_sandwich_check(u, Mesh(n), eps, FINE)
    assert lo <= mid * (1 + 1e-10) and mid <= hi * (1 + 1e-10)


def test_sandwich_poly_lhs():
    # eps = 0: lhs = ||u||^2 - mean^2 - sum_K ||u - mean_K u||^2
    m = Mesh(4)
    lo, mid, _ = infsup_sandwich_check(poly, m, 0.0, FINE)
    assert mid == pytest.approx(1 / 30 - 1 / 36, rel=1e-13)
    within = sum(
        refined_integral(lambda s: (poly[0](s) - refined_integral(poly[0], [a, a + m.h]) / m.h) ** 2, [a, a + m.h])
        for a in m.nodes[:-1]
    )
    assert lo == pytest.approx(mid - within, rel=1e-12)


def test_sandwich_random_p1():
    rng = np.random.default_rng(11)
    for _ in range(20):
        m = Mesh(int(rng.integers(2, 20)))
        u = P1Function(m, rng.normal(size=m.n - 1))
        lo, mid, hi = infsup_sandwich_check(u, m, float(rng.uniform(0, 0.1)))
        assert lo <= mid * (1 + 1e-10) and mid <= hi * (1 + 1e-10)
