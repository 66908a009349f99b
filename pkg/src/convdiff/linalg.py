"""Band storage, banded LU with partial pivoting, and the SPLS block solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg
import scipy.sparse

log = logging.getLogger(__name__)

MACHINE_EPS = np.finfo(float).eps


class SingularMatrixError(np.linalg.LinAlgError):
    """A pivot fell below the singularity threshold."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class RankDeficientError(np.linalg.LinAlgError):
    pass


class BandMatrix:
    """Square banded matrix stored by diagonals.

    ``data[upper + i - j, j] == A[i, j]`` for ``-upper <= i - j <= lower``
    (the LAPACK general-band layout).
    """

    def __init__(self, data, lower: int, upper: int):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[0] != lower + upper + 1:
            raise ValueError("band data must have lower + upper + 1 rows")
        self.data = data
        self.lower = int(lower)
        self.upper = int(upper)

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return (self.dim, self.dim)

    @classmethod
    def zeros(cls, dim: int, lower: int, upper: int) -> "BandMatrix":
        return cls(np.zeros((lower + upper + 1, dim)), lower, upper)

    @classmethod
    def from_diagonals(cls, diagonals: dict, dim: int) -> "BandMatrix":
        """Build from {offset: values}; offset k > 0 is above the main diagonal.

        Scalars broadcast along their diagonal.
        """
        lower = max([0] + [-k for k in diagonals])
        upper = max([0] + [k for k in diagonals])
        m = cls.zeros(dim, lower, upper)
        for k, vals in diagonals.items():
            length = dim - abs(k)
            vals = np.broadcast_to(np.asarray(vals, dtype=float), (length,))
            if k >= 0:
                m.data[upper - k, k:] = vals
            else:
                m.data[upper - k, : dim + k] = vals
        return m

    @classmethod
    def from_dense(cls, a, lower: int, upper: int) -> "BandMatrix":
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        m = cls.zeros(n, lower, upper)
        for k in range(-lower, upper + 1):
            d = np.diagonal(a, k)
            if k >= 0:
                m.data[upper - k, k:] = d
            else:
                m.data[upper - k, : n + k] = d
        return m

    def diagonal(self, k: int = 0) -> np.ndarray:
        if k > self.upper or -k > self.lower:
            return np.zeros(self.dim - abs(k))
        row = self.upper - k
        return self.data[row, k:].copy() if k >= 0 else self.data[row, : self.dim + k].copy()

    def get(self, i: int, j: int) -> float:
        if not (0 <= i < self.dim and 0 <= j < self.dim):
            raise IndexError((i, j))
        if -self.upper <= i - j <= self.lower:
            return float(self.data[self.upper + i - j, j])
        return 0.0

    def todense(self) -> np.ndarray:
        a = np.zeros(self.shape)
        for k in range(-self.lower, self.upper + 1):
            idx = np.arange(max(0, -k), min(self.dim, self.dim - k))
            a[idx, idx + k] = self.diagonal(k)
        return a

    def _widened(self, lower, upper):
        m = BandMatrix.zeros(self.dim, lower, upper)
        m.data[upper - self.upper : upper + self.lower + 1] = self.data
        return m

    def __add__(self, other: "BandMatrix") -> "BandMatrix":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        lo, up = max(self.lower, other.lower), max(self.upper, other.upper)
        a, b = self._widened(lo, up), other._widened(lo, up)
        return BandMatrix(a.data + b.data, lo, up)

    def __mul__(self, scalar) -> "BandMatrix":
        return BandMatrix(self.data * float(scalar), self.lower, self.upper)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __matmul__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k in range(-self.lower, self.upper + 1):
            d = self.diagonal(k)
            if k >= 0:
                out[: self.dim - k] += (d * x[k:].T).T
            else:
                out[-k:] += (d * x[: self.dim + k].T).T
        return out

    @property
    def T(self) -> "BandMatrix":
        return BandMatrix.from_diagonals({-k: self.diagonal(k) for k in range(-self.lower, self.upper + 1)}, self.dim)

    def norm_inf(self) -> float:
        return float(np.max(abs(self) @ np.ones(self.dim)))

    def __abs__(self):
        return BandMatrix(np.abs(self.data), self.lower, self.upper)

    def __repr__(self):
        return f"BandMatrix(dim={self.dim}, lower={self.lower}, upper={self.upper})"


class BandLU:
    """LU factors of a BandMatrix with partial (row) pivoting.

    U gets ``lower`` extra superdiagonals of fill, as in LAPACK ``gbtrf``.
    """

    def __init__(self, m: BandMatrix):
        n, kl, ku = m.dim, m.lower, m.upper
        kv = kl + ku
        ab = np.zeros((2 * kl + ku + 1, n))
        ab[kl:] = m.data
        scale = m.norm_inf()
        self.threshold = n * MACHINE_EPS * scale
        piv = np.arange(n)
        ju = 0
        for j in range(n):
            km = min(kl, n - 1 - j)
            col = ab[kv : kv + km + 1, j]
            jp = int(np.argmax(np.abs(col)))
            pivot = col[jp]
            if not abs(pivot) > self.threshold:
                raise SingularMatrixError(
                    f"matrix is singular to working precision: pivot {pivot:.3e} in column {j} "
                    f"below threshold {self.threshold:.3e}",
                    column=j,
                )
            piv[j] = j + jp
            ju = max(ju, min(j + ku + jp, n - 1))
            cols = np.arange(j, ju + 1)
            if jp:
                r1, r2 = kv + j - cols, kv + j + jp - cols
                tmp = ab[r1, cols].copy()
                ab[r1, cols] = ab[r2, cols]
                ab[r2, cols] = tmp
            if km:
                ab[kv + 1 : kv + km + 1, j] /= ab[kv, j]
                if ju > j:
                    c = cols[1:]
                    rows = np.arange(j + 1, j + km + 1)[:, None]
                    urow = ab[kv + j - c, c]
                    ab[kv + rows - c, c] -= ab[kv + 1 : kv + km + 1, j][:, None] * urow[None, :]
        self.ab = ab
        self.piv = piv
        self.lower, self.upper, self.dim = kl, ku, n

    @property
    def min_pivot(self) -> float:
        return float(np.min(np.abs(self.ab[self.lower + self.upper])))

    def solve(self, r) -> np.ndarray:
        n, kl, kv = self.dim, self.lower, self.lower + self.upper
        ab = self.ab
        x = np.array(r, dtype=float, copy=True)
        if x.shape[0] != n:
            raise ValueError(f"right-hand side has length {x.shape[0]}, expected {n}")
        if kl:
            for j in range(n - 1):
                p = self.piv[j]
                if p != j:
                    x[[j, p]] = x[[p, j]]
                km = min(kl, n - 1 - j)
                x[j + 1 : j + km + 1] -= np.multiply.outer(ab[kv + 1 : kv + km + 1, j], x[j])
        for j in range(n - 1, -1, -1):
            x[j] /= ab[kv, j]
            i0 = max(0, j - kv)
            if j > i0:
                u = ab[kv - (j - np.arange(i0, j)), j]
                x[i0:j] -= np.multiply.outer(u, x[j])
        return x


class Solve(NamedTuple):
    x: np.ndarray
    residual: float


def residual_inf(m, x, r) -> float:
    return float(np.max(np.abs(m @ x - r))) if np.size(r) else 0.0


def band_solve(m: BandMatrix, r) -> Solve:
    """Solve M x = r; raises SingularMatrixError for numerically singular M."""
    r = np.asarray(r, dtype=float)
    if r.shape[0] != m.dim:
        raise ValueError(f"dimension mismatch: matrix {m.dim}, rhs {r.shape[0]}")
    x = BandLU(m).solve(r)
    return Solve(x, residual_inf(m, x, r))


@dataclass
class SaddleSystem:
    """[[A, B], [B^T, 0]] [w; u] = [rhs; 0]."""

    A: BandMatrix
    B: scipy.sparse.csr_matrix
    rhs: np.ndarray


@dataclass
class SaddleSolution:
    w: np.ndarray
    u: np.ndarray
    residual_first: float
    residual_second: float


def saddle_solve(sys: SaddleSystem, block: int = 256) -> SaddleSolution:
    """Block elimination through the Schur complement B^T A^{-1} B."""
    lu = BandLU(sys.A)
    B = sys.B.tocsc()
    nu = B.shape[1]
    schur = np.empty((nu, nu))
    for start in range(0, nu, block):
        stop = min(nu, start + block)
        cols = lu.solve(B[:, start:stop].toarray())
        schur[:, start:stop] = B.T @ cols
    schur = 0.5 * (schur + schur.T)
    g = lu.solve(sys.rhs)
    try:
        u = scipy.linalg.cho_solve(scipy.linalg.cho_factor(schur), B.T @ g)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError(f"Schur complement is not positive definite: {exc}") from exc
    w = lu.solve(sys.rhs - B @ u)
    r1 = residual_inf(sys.A, w, sys.rhs - B @ u)
    r2 = float(np.max(np.abs(B.T @ w))) if nu else 0.0
    log.debug("saddle residuals %.3e %.3e", r1, r2)
    return SaddleSolution(w, u, r1, r2)


def dense_spd_solve(m, r, max_shifts: int = 3) -> np.ndarray:
    """Solve a symmetric positive (semi)definite system via Cholesky.

    When the factorization fails, a shift of 1e-14 * trace / dim is added
    (growing tenfold per retry).
    """
    m = np.asarray(m, dtype=float)
    m = 0.5 * (m + m.T)
    r = np.asarray(r, dtype=float)
    shift = 0.0
    base = 1e-14 * np.trace(m) / m.shape[0]
    for attempt in range(max_shifts + 1):
        try:
            c = scipy.linalg.cho_factor(m + shift * np.eye(m.shape[0]))
        except np.linalg.LinAlgError:
            shift = base * 10.0**attempt
            continue
        x = scipy.linalg.cho_solve(c, r)
        # one step of iterative refinement against the unshifted matrix
        return x + scipy.linalg.cho_solve(c, r - m @ x)
    raise np.linalg.LinAlgError("Cholesky failed even after regularization")
