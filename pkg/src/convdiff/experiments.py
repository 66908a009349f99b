"""Convergence studies, oscillation diagnostics and figure-data export."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .exact import ExactSolution, Forcing, reduced_theta, reduced_w
from .linalg import RankDeficientError, SingularMatrixError
from .mesh import Mesh
from .norms import NORM_NAMES, ExclusionSpec, NormKind, layer_policy, norm_error
from .quadrature import default_rule
from .solvers import METHODS, SD_LOADS, solve

FORMATS = ("csv", "json", "markdown")
DEFAULT_LEVEL_OFFSET = 5  # level i -> n = 2^(i + 5), h = 2^(-i-5)

# numerical failures that become a failure entry instead of aborting a study
NUMERICAL_ERRORS = (SingularMatrixError, RankDeficientError, np.linalg.LinAlgError, FloatingPointError)


def mesh_size(level: int, level_offset: int = DEFAULT_LEVEL_OFFSET) -> int:
    if level < 0 or level + level_offset < 1:
        raise ValueError(f"level {level} gives no mesh")
    return 2 ** (level + level_offset)


def build_hash() -> str:
    """Digest of the package sources, so a report names the code that produced it."""
    digest = hashlib.sha256()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    forcing: str
    eps: Sequence[float]
    levels: Sequence[int] = (1, 2, 3, 4, 5, 6)
    norms: Sequence[str] = ("l2",)
    exclude_right: float = 0.0
    delta: Optional[float] = None  # None -> 2h/3
    sd_load: str = "consistent"
    level_offset: int = DEFAULT_LEVEL_OFFSET
    fmt: str = "csv"

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        object.__setattr__(self, "levels", tuple(int(l) for l in self.levels))
        object.__setattr__(self, "norms", tuple(self.norms))
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        Forcing.from_name(self.forcing)
        if not self.eps or any(e <= 0 for e in self.eps):
            raise ValueError("convergence studies need eps > 0 (the error needs an exact solution)")
        if not self.levels:
            raise ValueError("no levels")
        for name in self.norms:
            NormKind(name)
        if self.sd_load not in SD_LOADS:
            raise ValueError(f"unknown SD load {self.sd_load!r}")
        if self.fmt not in FORMATS:
            raise ValueError(f"unknown format {self.fmt!r}")
        ExclusionSpec(self.exclude_right)
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be non-negative")
        for level in self.levels:
            ExclusionSpec(self.exclude_right).cutoff(mesh_size(level, self.level_offset))

    def echo(self) -> dict:
        d = asdict(self)
        d["eps"] = list(self.eps)
        d["levels"] = list(self.levels)
        d["norms"] = list(self.norms)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.echo(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Series:
    """Errors of one norm at one eps across the levels."""

    eps: float
    norm: str
    levels: List[int]
    h: List[float]
    errors: List[Optional[float]]
    failures: List[Optional[str]] = field(default_factory=list)

    @property
    def orders(self) -> List[Optional[float]]:
        return orders_with_gaps(self.errors)


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    series: List[Series]
    meta: dict

    def find(self, eps: float, norm: str) -> Series:
        for s in self.series:
            if s.norm == norm and math.isclose(s.eps, eps, rel_tol=1e-12):
                return s
        raise KeyError((eps, norm))

    @property
    def failed(self) -> bool:
        return any(f for s in self.series for f in s.failures)

    def _rows(self):
        multi = len(self.series) > 1
        for s in self.series:
            for lv, h, e, o, fail in zip(s.levels, s.h, s.errors, s.orders, s.failures):
                yield multi, s, lv, h, e, o, fail

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        multi = len(self.series) > 1
        w.writerow((["eps", "norm"] if multi else []) + ["level", "h", "error", "order"])
        for multi, s, lv, h, e, o, fail in self._rows():
            row = [f"{s.eps:g}", s.norm] if multi else []
            row += [lv, _fmt(h), "failed" if e is None else _fmt(e), "-" if o is None else f"{o:.2f}"]
            w.writerow(row)
        return buf.getvalue()

    def to_json(self) -> str:
        rows = []
        for multi, s, lv, h, e, o, fail in self._rows():
            row = {"eps": s.eps, "norm": s.norm, "level": lv, "h": h, "error": e, "order": o}
            if fail:
                row["failure"] = fail
            rows.append(row)
        return json.dumps({"meta": self.meta, "rows": rows}, indent=2, sort_keys=True) + "\n"

    def to_markdown(self) -> str:
        cfg = self.config
        lines = [f"method {cfg.method}, f = {cfg.forcing}", ""]
        for s in self.series:
            lines.append(f"eps = {s.eps:g}, norm = {s.norm}")
            lines.append("")
            lines.append("| level | h | error | order |")
            lines.append("|---:|---:|---:|---:|")
            for lv, h, e, o, fail in zip(s.levels, s.h, s.errors, s.orders, s.failures):
                err = f"failed: {fail}" if e is None else f"{e:.2e}"
                lines.append(f"| {lv} | {_fmt(h)} | {err} | {'-' if o is None else f'{o:.2f}'} |")
            lines.append("")
        lines.append(f"build {self.meta['build']}, config {self.meta['config_hash']}")
        return "\n".join(lines) + "\n"

    def render(self, fmt: Optional[str] = None) -> str:
        fmt = fmt or self.config.fmt
        return {"csv": self.to_csv, "json": self.to_json, "markdown": self.to_markdown}[fmt]()


def _fmt(x: float) -> str:
    return repr(float(x))


def compute_order(errors: Sequence[float]) -> List[Optional[float]]:
    """[None, log2(E_0/E_1), log2(E_1/E_2), ...]; errors must be positive."""
    errors = [float(e) for e in errors]
    if any(not e > 0 for e in errors):
        raise ValueError("orders need positive errors")
    return [None] + [math.log2(a / b) for a, b in zip(errors, errors[1:])]


def orders_with_gaps(errors: Sequence[Optional[float]]) -> List[Optional[float]]:
    """Like compute_order, with None wherever either neighbour is missing or zero."""
    out: List[Optional[float]] = [None]
    for a, b in zip(errors, errors[1:]):
        out.append(math.log2(a / b) if a and b and a > 0 and b > 0 else None)
    return out


def _cell(cfg: ExperimentConfig, eps: float, level: int):
    """Errors (or one failure message) for every norm at one (eps, level)."""
    forcing = Forcing.from_name(cfg.forcing)
    mesh = Mesh(mesh_size(level, cfg.level_offset))
    try:
        sol = solve(cfg.method, forcing, mesh, eps, cfg.delta, cfg.sd_load)
        exact = ExactSolution(forcing, eps)
        errs = []
        for name in cfg.norms:
            kind = NormKind(name, eps, cfg.delta, ExclusionSpec(cfg.exclude_right))
            errs.append(norm_error(exact, sol.u, kind))
        return errs, None
    except NUMERICAL_ERRORS as exc:
        return [None] * len(cfg.norms), f"{type(exc).__name__}: {exc}"


def report_meta(cfg: ExperimentConfig) -> dict:
    return {
        "config": cfg.echo(),
        "config_hash": cfg.digest(),
        "version": __version__,
        "build": build_hash(),
        "quadrature": {
            "base_rule_points": default_rule().npoints,
            "layer": {k: v for k, v in layer_policy(1e-8).describe().items() if k not in ("eps", "rule_points")},
            "layer_zone": "elements meeting [1 - 10 eps |ln eps|, 1]",
        },
        "delta": "2h/3" if cfg.delta is None else cfg.delta,
        "exclusion_cutoff": {str(l): ExclusionSpec(cfg.exclude_right).cutoff(mesh_size(l, cfg.level_offset)) for l in cfg.levels},
    }


def run_convergence(cfg: ExperimentConfig, jobs: int = 1) -> ConvergenceReport:
    """Solve on every (eps, level) cell and collect one series per (eps, norm).

    Cells are independent; with ``jobs > 1`` they run in worker processes
    and are joined back in grid order, so the report does not depend on
    ``jobs``.
    """
    grid = [(eps, lv) for eps in cfg.eps for lv in cfg.levels]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell, [cfg] * len(grid), *zip(*grid)))
    else:
        results = [_cell(cfg, eps, lv) for eps, lv in grid]
    by_cell = dict(zip(grid, results))
    series = []
    for eps in cfg.eps:
        for k, name in enumerate(cfg.norms):
            errs, fails = [], []
            for lv in cfg.levels:
                values, fail = by_cell[(eps, lv)]
                errs.append(values[k])
                fails.append(fail)
            hs = [1.0 / mesh_size(lv, cfg.level_offset) for lv in cfg.levels]
            series.append(Series(eps, name, list(cfg.levels), hs, errs, fails))
    return ConvergenceReport(cfg, series, report_meta(cfg))


# ---------------------------------------------------------------------------
# figure data and oscillation diagnostics


@dataclass
class FigureData:
    """Nodal values and samples of a discrete solution with overlays.

    ``rows`` holds (x, u_h, u, w, theta), or just (x, u_h) without
    overlays; ``u`` is NaN when eps = 0.  When the discrete system is
    singular, ``rows`` is empty and ``diagnosis`` explains why.
    """

    method: str
    forcing: str
    eps: float
    n: int
    rows: List[tuple]
    nodal: Optional[np.ndarray] = None
    diagnosis: Optional[str] = None
    columns: tuple = ("x", "u_h", "u", "w", "theta")

    @property
    def ok(self) -> bool:
        return self.diagnosis is None

    def to_csv(self) -> str:
        buf = io.StringIO()
        if not self.ok:
            buf.write(f"# {self.diagnosis}\n")
            return buf.getvalue()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        meta = {"method": self.method, "forcing": self.forcing, "eps": self.eps, "n": self.n, "version": __version__}
        if not self.ok:
            return json.dumps({"meta": meta, "diagnosis": self.diagnosis}, indent=2) + "\n"
        rows = [dict(zip(self.columns, (None if math.isnan(v) else v for v in r))) for r in self.rows]
        return json.dumps({"meta": meta, "rows": rows}, indent=2) + "\n"

    def to_markdown(self) -> str:
        if not self.ok:
            return f"**singular system**: {self.diagnosis}\n"
        lines = ["| " + " | ".join(self.columns) + " |", "|" + "---:|" * len(self.columns)]
        lines += ["| " + " | ".join(f"{v:.6g}" for v in r) + " |" for r in self.rows]
        return "\n".join(lines) + "\n"

    def render(self, fmt: str = "csv") -> str:
        return {"csv": self.to_csv, "json": self.to_json, "markdown": self.to_markdown}[fmt]()


def singular_diagnosis(method: str, n: int, eps: float, exc: Exception) -> str:
    msg = f"{method} system with n = {n}, eps = {eps:g} has no unique solution ({exc})"
    if method == "linear" and eps == 0 and n % 2 == 0:
        msg += (
            "; with eps = 0 the matrix is C = 1/2 tridiag(-1, 0, 1) of odd order n - 1, "
            "whose determinant vanishes, so the simplified system might not have a solution"
        )
    return msg


def dump_solution(
    method: str,
    forcing: str,
    eps: float,
    n: int,
    sample_count: int = 0,
    exact_overlay: bool = True,
    delta: Optional[float] = None,
    sd_load: str = "consistent",
) -> FigureData:
    """Nodal values (and ``sample_count`` extra points per element) of the discrete solution."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    f = Forcing.from_name(forcing)
    mesh = Mesh(n)
    try:
        sol = solve(method, f, mesh, eps, delta, sd_load)
    except (SingularMatrixError, RankDeficientError) as exc:
        return FigureData(method, f.tag, eps, n, [], None, singular_diagnosis(method, n, eps, exc))
    if sample_count:
        t = np.arange(sample_count + 1) / (sample_count + 1)
        x = (mesh.nodes[:-1, None] + mesh.h * t[None, :]).ravel()
        x = np.append(x, 1.0)
    else:
        x = mesh.nodes.copy()
    cols = [x, sol.u(x)]
    if exact_overlay:
        cols.append(ExactSolution(f, eps).u(x) if eps > 0 else np.full_like(x, np.nan))
        cols += [reduced_w(f)(x), reduced_theta(f)(x)]
    rows = [tuple(float(v) for v in r) for r in zip(*cols)]
    names = FigureData.columns if exact_overlay else ("x", "u_h")
    return FigureData(method, f.tag, eps, n, rows, sol.u.nodal_values, columns=names)


@dataclass(frozen=True)
class OscillationReport:
    """Even/odd behaviour of nodal values v_0..v_n."""

    even_deviation: float  # max |v_j - target_even(x_j)| over even j
    odd_deviation: float
    max_difference_jump: float  # max_j (d_{j+1} - d_j) with d = diff(v)
    sign_changes: int  # sign changes along d; 0 or 1 means no oscillation

    @property
    def oscillates(self) -> bool:
        return self.sign_changes > 1


def oscillation_report(nodal: np.ndarray, target_even=None, target_odd=None, interior: bool = True) -> OscillationReport:
    """Compare even and odd nodes against separate targets and count oscillations.

    With ``interior`` the boundary nodes are ignored in the even/odd
    comparison (they carry the boundary conditions).
    """
    v = np.asarray(nodal, dtype=float)
    n = v.size - 1
    x = np.arange(n + 1) / n
    idx = np.arange(1, n) if interior else np.arange(n + 1)
    even, odd = idx[idx % 2 == 0], idx[idx % 2 == 1]
    ev = float(np.max(np.abs(v[even] - target_even(x[even])))) if target_even and even.size else math.nan
    od = float(np.max(np.abs(v[odd] - target_odd(x[odd])))) if target_odd and odd.size else math.nan
    d = np.diff(v)
    jump = float(np.max(np.diff(d))) if d.size > 1 else 0.0
    signs = np.sign(d[d != 0])
    changes = int(np.count_nonzero(signs[1:] != signs[:-1]))
    return OscillationReport(ev, od, jump, changes)
