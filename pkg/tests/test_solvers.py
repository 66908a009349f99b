import numpy as np
import pytest

from convdiff.exact import ONE, TWO_X, Forcing
from convdiff.experiments import oscillation_report
from convdiff.linalg import SingularMatrixError
from convdiff.mesh import Mesh
from convdiff.solvers import solve


def test_reduced_oscillation_pattern():
    sol = solve("linear", ONE, Mesh(101), 0.0)
    rep = oscillation_report(sol.u.nodal_values, lambda x: x, lambda x: x - 1)
    assert rep.even_deviation < 1e-13 and rep.odd_deviation < 1e-13
    assert rep.oscillates


@pytest.mark.parametrize("eps", [1e-6, 1e-8])
def test_linear_oscillation_deviation_scales_with_eps(eps):
    # the diffusion term shifts the reduced pattern by 2 eps n (n - 1)
    n = 101
    sol = solve("linear", ONE, Mesh(n), eps)
    rep = oscillation_report(sol.u.nodal_values, lambda x: x, lambda x: x - 1)
    worst = max(rep.even_deviation, rep.odd_deviation)
    assert worst == pytest.approx(2 * eps * n * (n - 1), rel=1e-3)


def test_linear_reduced_even_singular():
    with pytest.raises(SingularMatrixError):
        solve("linear", ONE, Mesh(102), 0.0)


@pytest.mark.parametrize("eps", [0.0, 1e-6])
def test_spls_close_to_shifted_solution(eps):
    m = Mesh(101)
    sol = solve("spls", ONE, m, eps)
    x = m.nodes
    inner = (x >= 3 * m.h) & (x <= 1 - 3 * m.h)
    assert np.max(np.abs(sol.u.nodal_values[inner] - (x[inner] - 0.5))) < 5e-2
    assert sol.residual < 1e-8


def test_pg_monotone_for_f1():
    m = Mesh(101)
    sol = solve("pg", ONE, m, 1e-6)
    rep = oscillation_report(sol.u.nodal_values)
    assert not rep.oscillates
    assert rep.max_difference_jump <= m.h + 1e-12


def test_pg_equals_sd_for_f1():
    for n in (64, 101):
        m = Mesh(n)
        a = solve("pg", ONE, m, 1e-8).u.coeffs
        b = solve("sd", ONE, m, 1e-8).u.coeffs
        assert np.max(np.abs(a - b)) < 1e-13


def test_consistent_sd_equals_pg_for_linear_f():
    m = Mesh(64)
    a = solve("pg", TWO_X, m, 1e-8).u.coeffs
    b = solve("sd", TWO_X, m, 1e-8).u.coeffs
    c = solve("sd", TWO_X, m, 1e-8, sd_load="galerkin").u.coeffs
    assert np.max(np.abs(a - b)) < 1e-13
    assert np.max(np.abs(a - c)) > 1e-3


def test_large_eps_all_methods_converge_to_exact():
    f = Forcing.from_name("cos7pi2")
    from convdiff.exact import ExactSolution

    u = ExactSolution(f, 1.0)
    m = Mesh(256)
    for method in ("linear", "spls", "sd"):
        uh = solve(method, f, m, 1.0, delta=0.0 if method == "sd" else None).u
        assert np.max(np.abs(uh.coeffs - u(m.interior))) < 1e-6
    # PG keeps its O(h) streamline term
    uh = solve("pg", f, m, 1.0).u
    assert np.max(np.abs(uh.coeffs - u(m.interior))) < 1e-3


def test_unknown_method():
    with pytest.raises(ValueError):
        solve("upwind", ONE, Mesh(4), 1e-3)
    with pytest.raises(ValueError):
        solve("sd", ONE, Mesh(4), 1e-3, sd_load="x")
