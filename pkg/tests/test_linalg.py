import numpy as np
import pytest
import scipy.sparse

from convdiff.assembly import matrix_C, system_standard
from convdiff.linalg import (
    BandLU,
    BandMatrix,
    RankDeficientError,
    SaddleSystem,
    SingularMatrixError,
    band_solve,
    dense_spd_solve,
    saddle_solve,
)
from convdiff.mesh import Mesh


def random_band(rng, n, kl, ku, dominant=False):
    a = np.zeros((n, n))
    for k in range(-kl, ku + 1):
        a += np.diag(rng.normal(size=n - abs(k)), k)
    if dominant:
        a += np.diag(np.sum(np.abs(a), axis=1) + 1)
    return a


def test_band_storage_roundtrip():
    rng = np.random.default_rng(0)
    a = random_band(rng, 9, 2, 1)
    m = BandMatrix.from_dense(a, 2, 1)
    assert np.array_equal(m.todense(), a)
    assert m.get(0, 5) == 0.0 and m.get(3, 1) == a[3, 1]
    assert np.allclose(m @ np.arange(9.0), a @ np.arange(9.0))
    assert np.array_equal(m.T.todense(), a.T)
    assert np.allclose((m + m * 2.0 - m).todense(), 2 * a)
    assert m.norm_inf() == pytest.approx(np.max(np.sum(np.abs(a), axis=1)))
    with pytest.raises(IndexError):
        m.get(9, 0)


@pytest.mark.parametrize("n,kl,ku", [(1, 0, 0), (5, 1, 1), (40, 2, 2), (33, 3, 1), (17, 0, 2)])
def test_band_lu_matches_dense(n, kl, ku):
    rng = np.random.default_rng(n + kl + ku)
    a = random_band(rng, n, kl, ku)
    r = rng.normal(size=n)
    x = BandLU(BandMatrix.from_dense(a, kl, ku)).solve(r)
    assert np.allclose(x, np.linalg.solve(a, r), rtol=1e-9, atol=1e-11)
    R = rng.normal(size=(n, 3))
    X = BandLU(BandMatrix.from_dense(a, kl, ku)).solve(R)
    assert np.allclose(a @ X, R, atol=1e-9)


def test_pivoting_needed():
    # zero leading pivot forces a row swap
    a = np.array([[0.0, 1.0, 0.0], [2.0, 0.0, 1.0], [0.0, 3.0, 4.0]])
    x = band_solve(BandMatrix.from_dense(a, 1, 1), [1.0, 2.0, 3.0])
    assert np.allclose(a @ x.x, [1, 2, 3])
    assert x.residual < 1e-14


def test_identity_solve():
    r = np.array([3.0, -1.0, 2.0, 7.0])
    out = band_solve(BandMatrix.from_diagonals({0: 1.0}, 4), r)
    assert np.array_equal(out.x, r) and out.residual == 0.0


def test_reduced_system_odd_pattern():
    n = 101
    m = Mesh(n)
    h = m.h
    # C u = h (load of f = 1) has the solution x on even nodes and x - 1 on odd nodes
    x = band_solve(matrix_C(n), np.full(n - 1, h)).x
    nodes = m.interior
    j = np.arange(1, n)
    expect = np.where(j % 2 == 0, nodes, nodes - 1)
    assert np.allclose(x, expect, atol=1e-12)


def test_reduced_system_even_is_singular():
    with pytest.raises(SingularMatrixError) as info:
        band_solve(matrix_C(102), np.ones(101))
    assert info.value.column is not None


def test_residual_bound_on_method_systems():
    for n in (64, 2048):
        for eps in (1e-10, 1e-4, 1.0):
            A = system_standard(Mesh(n), eps)
            r = np.random.default_rng(n).normal(size=n - 1)
            out = band_solve(A, r)
            assert out.residual <= 1e-8 * (A.norm_inf() * np.max(np.abs(out.x)) + np.max(np.abs(r)))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        band_solve(BandMatrix.from_diagonals({0: 1.0}, 3), np.ones(4))


def test_dense_spd_examples():
    r = np.array([1.0, -2.0, 0.5])
    assert np.allclose(dense_spd_solve(np.eye(3), r), r)
    assert np.allclose(dense_spd_solve([[2.0, 1.0], [1.0, 2.0]], [1.0, 1.0]), [1 / 3, 1 / 3], atol=1e-15)
    # semidefinite: a consistent rhs still yields a minimizer
    M = np.array([[1.0, 1.0], [1.0, 1.0]])
    x = dense_spd_solve(M, [2.0, 2.0])
    assert np.allclose(M @ x, [2.0, 2.0], atol=1e-6)


def test_saddle_solve_small_against_dense():
    rng = np.random.default_rng(3)
    nA, nu = 9, 4
    a = random_band(rng, nA, 2, 2)
    a = a @ a.T + nA * np.eye(nA)
    A = BandMatrix.from_dense(a, nA - 1, nA - 1)
    B = rng.normal(size=(nA, nu))
    rhs = rng.normal(size=nA)
    sol = saddle_solve(SaddleSystem(A, scipy.sparse.csr_matrix(B), rhs), block=3)
    K = np.block([[a, B], [B.T, np.zeros((nu, nu))]])
    ref = np.linalg.solve(K, np.concatenate([rhs, np.zeros(nu)]))
    assert np.allclose(sol.w, ref[:nA]) and np.allclose(sol.u, ref[nA:])
    assert sol.residual_first < 1e-10 and sol.residual_second < 1e-10


def test_saddle_rank_deficient():
    A = BandMatrix.from_diagonals({0: 1.0}, 3)
    B = scipy.sparse.csr_matrix(np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(RankDeficientError):
        saddle_solve(SaddleSystem(A, B, np.ones(3)))
