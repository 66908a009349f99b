"""Invariant suite: algebraic identities, theorem bounds and the exact-solution residual.

Each check returns ``CheckResult`` records instead of raising, so the suite
can run end to end from the command line (``convdiff verify``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from . import assembly
from .exact import NAMED_FORCINGS, ONE, ExactSolution, layer_graded_samples, verify_residual
from .mesh import Mesh, P1Function, P2Function, eval_hat, interpolate_p1
from .norms import (
    C_P,
    best_approx,
    error_moments,
    infsup_sandwich_check,
    norm_error,
    opt_continuous,
    opt_discrete,
    opt_pg,
    opt_seminorm_h,
    T_apply,
)
from .quadrature import CompositePolicy, QuadratureRule, element_quadrature
from .solvers import solve

IDENTITY_TOL = 1e-10
BOUND_SLACK = 1e-8
SEED = 20240611


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}: {self.detail}"


def _rng(seed=SEED):
    return np.random.default_rng(seed)


def random_smooth(rng, terms: int = 4):
    """u(x) = sum_k a_k sin(k pi x) + b x(1 - x) with its derivative; vanishes at 0 and 1."""
    a = rng.normal(size=terms) / np.arange(1, terms + 1)
    b = rng.normal()
    k = np.arange(1, terms + 1) * math.pi

    def u(x):
        x = np.asarray(x, dtype=float)
        return np.sin(np.multiply.outer(x, k)) @ a + b * x * (1.0 - x)

    def du(x):
        x = np.asarray(x, dtype=float)
        return np.cos(np.multiply.outer(x, k)) @ (a * k) + b * (1.0 - 2.0 * x)

    return u, du


def _fine_policy() -> CompositePolicy:
    return CompositePolicy(QuadratureRule(12))


# ---------------------------------------------------------------------------
# identities


def check_stencils(n: int = 8) -> CheckResult:
    """S and C against integrals of hat functions computed by quadrature."""
    mesh = Mesh(n)
    eq = element_quadrature(mesh, _fine_policy())
    N = n - 1
    vals = np.array([eval_hat(mesh, j, eq.x) for j in range(1, n)])
    # hat slopes are +-1/h on the support
    slopes = np.array([np.where(v > 0, np.where(eq.x < mesh.nodes[j], 1.0, -1.0) / mesh.h, 0.0) for j, v in zip(range(1, n), vals)])
    stiff = (slopes * eq.w) @ slopes.T
    conv = (vals * eq.w) @ slopes.T  # conv[i, j] = (phi_j', phi_i)
    err_s = np.max(np.abs(mesh.h * stiff - assembly.matrix_S(n).todense()))
    err_c = np.max(np.abs(conv - assembly.matrix_C(n).todense()))
    ok = max(err_s, err_c) <= IDENTITY_TOL and N == assembly.matrix_S(n).dim
    return CheckResult("S and C stencils", ok, f"max deviation S {err_s:.1e}, C {err_c:.1e}")


def _pg_test_function(mesh: Mesh, beta: np.ndarray):
    """w_h = sum beta_i phi_i and v_h = sum beta_i (phi_i + B_i - B_{i+1})."""
    b = np.concatenate(([0.0], beta, [0.0]))
    w = P1Function(mesh, beta)
    v = P2Function(mesh, beta, b[1:] - b[:-1])
    return w, v


def _a0(eq, f, g=None) -> float:
    g = f if g is None else g
    return float(np.sum(eq.w * f.deriv(eq.x) * g.deriv(eq.x)))


def check_bubble_energy(samples: int = 100, rng=None) -> CheckResult:
    """a0(v_h, v_h) = (19/3) a0(w_h, w_h) and (w_h', B_h') = 0."""
    rng = rng or _rng()
    worst_ratio = worst_orth = 0.0
    for _ in range(samples):
        mesh = Mesh(int(rng.integers(2, 40)))
        eq = element_quadrature(mesh, _fine_policy())
        w, v = _pg_test_function(mesh, rng.normal(size=mesh.n - 1))
        aw = _a0(eq, w)
        worst_ratio = max(worst_ratio, abs(_a0(eq, v) - 19.0 / 3.0 * aw) / aw)
        bub = P2Function(mesh, np.zeros(mesh.n - 1), rng.normal(size=mesh.n))
        u = P1Function(mesh, rng.normal(size=mesh.n - 1))
        scale = math.sqrt(_a0(eq, u) * _a0(eq, bub))
        worst_orth = max(worst_orth, abs(_a0(eq, u, bub)) / scale)
    ok = worst_ratio <= IDENTITY_TOL and worst_orth <= IDENTITY_TOL
    return CheckResult(
        "bubble energy identity",
        ok,
        f"{samples} samples: max rel. deviation from 19/3 {worst_ratio:.1e}, max |(u_h', B_h')| rel. {worst_orth:.1e}",
    )


def check_T_identities(samples: int = 100, rng=None) -> List[CheckResult]:
    """|Tu|^2 = ||u||^2 - mean^2 and a0(Tu, u) = 0."""
    rng = rng or _rng()
    worst_norm = worst_orth = 0.0
    for _ in range(samples):
        mesh = Mesh(int(rng.integers(2, 30)))
        u = P1Function(mesh, rng.normal(size=mesh.n - 1))
        eq = element_quadrature(mesh, _fine_policy())
        mom = error_moments(u, None, mesh, _fine_policy())
        Tu = T_apply(u, mom.integral)
        lhs = float(np.sum(eq.w * Tu.deriv(eq.x) ** 2))
        rhs = mom.l2 - mom.integral**2
        worst_norm = max(worst_norm, abs(lhs - rhs) / max(mom.l2, 1e-300))
        worst_orth = max(worst_orth, abs(float(np.sum(eq.w * Tu.deriv(eq.x) * u.deriv(eq.x)))) / math.sqrt(lhs * mom.grad))
    return [
        CheckResult("|Tu|^2 = ||u||^2 - mean^2", worst_norm <= IDENTITY_TOL, f"max rel. deviation {worst_norm:.1e}"),
        CheckResult("a0(Tu, u) = 0", worst_orth <= IDENTITY_TOL, f"max rel. value {worst_orth:.1e}"),
    ]


def check_norm_inequalities(samples: int = 100, rng=None) -> List[CheckResult]:
    """Seminorm bound, the optimal-norm sandwich and the PG-norm inequality."""
    rng = rng or _rng()
    worst_semi = worst_sandwich = worst_pg = -math.inf
    policy = _fine_policy()
    for _ in range(samples):
        mesh = Mesh(int(rng.integers(2, 64)))
        eps = float(10.0 ** rng.uniform(-8, 0))
        u = random_smooth(rng)
        l2n = math.sqrt(error_moments(u, None, mesh, policy).l2)
        worst_semi = max(worst_semi, (opt_seminorm_h(u[0], mesh, policy) - l2n) / l2n)
        lo, mid, hi = infsup_sandwich_check(u, mesh, eps, policy)
        worst_sandwich = max(worst_sandwich, (lo - mid) / mid, (mid - hi) / mid)
        star = norm_error(u, None, opt_continuous(eps), mesh, policy)
        pgn = norm_error(u, None, opt_pg(eps), mesh, policy)
        worst_pg = max(worst_pg, (star**2 - 19.0 / 3.0 * pgn**2) / star**2)
    tol = IDENTITY_TOL
    return [
        CheckResult("|P_h T u| <= ||u||", worst_semi <= tol, f"max rel. excess {worst_semi:.1e}"),
        CheckResult("optimal-norm sandwich", worst_sandwich <= tol, f"max rel. violation {worst_sandwich:.1e}"),
        CheckResult("||u||_*^2 <= (19/3) ||u||_PG^2", worst_pg <= tol, f"max rel. violation {worst_pg:.1e}"),
    ]


def check_pg_equals_sd(ns: Iterable[int] = (2, 7, 64), epss: Iterable[float] = (1e-2, 1e-8)) -> CheckResult:
    """Identical matrices; identical loads for f = 1."""
    worst_m = worst_r = 0.0
    for n in ns:
        mesh = Mesh(n)
        for eps in epss:
            pg = assembly.system_pg_sd(mesh, eps).todense()
            d = 2.0 * mesh.h / 3.0
            sd = ((eps + d) / mesh.h) * assembly.matrix_S(n).todense() + assembly.matrix_C(n).todense()
            worst_m = max(worst_m, np.max(np.abs(pg - sd)))
        r_pg = assembly.rhs_pg(ONE, mesh)
        r_sd = assembly.rhs_sd(ONE, mesh)
        worst_r = max(worst_r, np.max(np.abs(r_pg - r_sd)))
    ok = worst_m <= IDENTITY_TOL and worst_r <= IDENTITY_TOL
    return CheckResult("PG = SD systems (f = 1)", ok, f"matrix {worst_m:.1e}, rhs {worst_r:.1e}")


def identity_suite(samples: int = 100) -> List[CheckResult]:
    rng = _rng()
    return [
        check_stencils(),
        check_bubble_energy(samples, rng),
        *check_T_identities(samples, rng),
        *check_norm_inequalities(samples, rng),
        check_pg_equals_sd(),
    ]


# ---------------------------------------------------------------------------
# theorem bounds


def _slack_ok(lhs: float, rhs: float) -> bool:
    return lhs <= rhs * (1.0 + BOUND_SLACK)


def theorem_bounds(forcings=NAMED_FORCINGS, epss=(1e-4, 1e-6), levels=range(1, 5), level_offset: int = 5) -> List[CheckResult]:
    """Error of each method against the bound its theorem proves."""
    spls_worst = pg_worst = lin_worst = 0.0
    failures = []
    count = 0
    for f in forcings:
        for eps in epss:
            u = ExactSolution(f, eps)
            for level in levels:
                mesh = Mesh(2 ** (level + level_offset))
                h = mesh.h
                count += 1
                tag = f"f={f.tag} eps={eps:g} n={mesh.n}"
                # SPLS: ||u - u_h||_* <= ||u - u_I||_*
                star = opt_continuous(eps)
                e_s = norm_error(u, solve("spls", f, mesh, eps).u, star)
                e_i = norm_error(u, interpolate_p1(u, mesh), star)
                spls_worst = max(spls_worst, e_s / e_i)
                if not _slack_ok(e_s, e_i):
                    failures.append(f"SPLS {tag}: {e_s:.6e} > {e_i:.6e}")
                # PG: ||u - u_h||_{PG} <= sqrt(19/3) inf ||u - p_h||_{PG}
                pgk = opt_pg(eps)
                e_pg = norm_error(u, solve("pg", f, mesh, eps).u, pgk)
                best = norm_error(u, best_approx(u, mesh, pgk), pgk)
                bound = math.sqrt(19.0 / 3.0) * best
                pg_worst = max(pg_worst, e_pg / bound)
                if not _slack_ok(e_pg, bound):
                    failures.append(f"PG {tag}: {e_pg:.6e} > {bound:.6e}")
                # linear: ||u - u_h||_{*,h} <= c(h, eps) inf ||u - p_h||_{*,h}
                hk = opt_discrete(eps)
                e_l = norm_error(u, solve("linear", f, mesh, eps).u, hk)
                best = norm_error(u, best_approx(u, mesh, hk), hk)
                bound = math.sqrt(1.0 + (C_P * h / eps) ** 2) * best
                lin_worst = max(lin_worst, e_l / bound)
                if not _slack_ok(e_l, bound):
                    failures.append(f"linear {tag}: {e_l:.6e} > {bound:.6e}")
    results = []
    for name, worst, key in (
        ("SPLS error <= interpolant error (||.||_*)", spls_worst, "SPLS"),
        ("PG error <= sqrt(19/3) best approximation", pg_worst, "PG"),
        ("linear error <= c(h, eps) best approximation", lin_worst, "linear"),
    ):
        mine = [m for m in failures if m.startswith(key + " ")]
        detail = f"{count} cases, max ratio {worst:.6f}" + (f"; {mine[0]}" if mine else "")
        results.append(CheckResult(name, not mine, detail))
    return results


# ---------------------------------------------------------------------------
# exact solutions


def residual_gate(forcings=NAMED_FORCINGS, epss=(1e-4, 1e-6, 1e-8, 1e-10), count: int = 400) -> List[CheckResult]:
    out = []
    for f in forcings:
        fmax = float(np.max(np.abs(f(np.linspace(0.0, 1.0, 2001)))))
        for eps in epss:
            sol = ExactSolution(f, eps)
            res = verify_residual(sol, layer_graded_samples(eps, count))
            tol = 1e-9 * (1.0 + fmax)
            out.append(CheckResult(f"residual f={f.tag} eps={eps:g}", res <= tol, f"max |-eps u'' + u' - f| = {res:.1e} (tol {tol:.1e})"))
    return out


def full_suite(samples: int = 100) -> List[CheckResult]:
    return identity_suite(samples) + theorem_bounds() + residual_gate()
