"""Sparse kernels: dropping, block Thomas, ILU(0), Jacobi and MatrixMarket I/O."""

import numpy as np
import pytest
import scipy.sparse as sp

from contact_tlamg.exceptions import DimensionMismatch, FormatError, SingularPivot, ZeroDiagonal, ZeroPivot
from contact_tlamg.sparsela import (
    BlockTriDiagMatrix,
    as_csr,
    drop,
    ilu0_factor,
    ilu0_solve,
    jacobi_sweep,
    nnz_per_row,
    read_matrix_market,
    read_vector,
    spgemm,
    spmv,
    write_matrix_market,
)


def _random_block_tridiag(n, seed=0):
    rng = np.random.default_rng(seed)
    diag = rng.standard_normal((n, 2, 2)) + 6.0 * np.eye(2)
    lower = rng.standard_normal((n - 1, 2, 2))
    upper = rng.standard_normal((n - 1, 2, 2))
    return BlockTriDiagMatrix(diag=diag, lower=lower, upper=upper)


def _laplacian_1d(n):
    return as_csr(sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]))


def test_as_csr_canonical():
    A = sp.coo_matrix(([1.0, 2.0, 0.0, -1.0], ([0, 0, 1, 1], [1, 1, 0, 0])), shape=(2, 2))
    B = as_csr(A)
    assert B.has_sorted_indices
    assert B.nnz == 2
    assert B[0, 1] == 3.0
    assert B[1, 0] == -1.0


def test_spmv_and_spgemm_dimension_checks():
    A = _laplacian_1d(4)
    with pytest.raises(DimensionMismatch):
        spmv(A, np.ones(3))
    with pytest.raises(DimensionMismatch):
        spgemm(A, sp.identity(5, format="csr"))
    C = spgemm(A, A)
    assert np.allclose(C.toarray(), A.toarray() @ A.toarray())


def test_drop_keeps_strictly_larger_entries():
    A = sp.csr_matrix(np.array([[1.0, 1e-12, -1e-10], [2e-10, -3.0, 0.5]]))
    B = drop(A, 1e-10)
    assert B.nnz == 4
    assert B[0, 2] == 0.0
    assert B[1, 0] == 2e-10
    assert drop(A, 0.0).nnz == A.nnz
    with pytest.raises(ValueError):
        drop(A, -1.0)


def test_nnz_per_row():
    assert nnz_per_row(_laplacian_1d(5)) == pytest.approx(13 / 5)
    assert np.isnan(nnz_per_row(sp.csr_matrix((0, 3))))


def test_block_tridiag_matvec_matches_csr():
    Dt = _random_block_tridiag(7)
    x = np.random.default_rng(1).standard_normal(14)
    assert np.allclose(Dt.matvec(x), Dt.to_csr() @ x)


@pytest.mark.parametrize("transpose", [False, True])
def test_block_thomas_solve(transpose):
    Dt = _random_block_tridiag(9, seed=3)
    dense = Dt.to_csr().toarray()
    if transpose:
        dense = dense.T
    rhs = np.random.default_rng(4).standard_normal((18, 3))
    x = Dt.solve(rhs, transpose=transpose)
    assert np.allclose(dense @ x, rhs, atol=1e-12)
    x1 = Dt.solve(rhs[:, 0], transpose=transpose)
    assert x1.shape == (18,)
    assert np.allclose(x1, x[:, 0])


def test_block_thomas_single_block():
    Dt = BlockTriDiagMatrix(diag=np.array([[[2.0, 1.0], [0.0, 4.0]]]),
                            lower=np.zeros((0, 2, 2)), upper=np.zeros((0, 2, 2)))
    assert np.allclose(Dt.solve(np.array([3.0, 4.0])), [1.0, 1.0])


def test_block_thomas_singular_pivot():
    diag = np.stack([np.eye(2), np.array([[1.0, 2.0], [2.0, 4.0]]), np.eye(2)])
    Dt = BlockTriDiagMatrix(diag=diag, lower=np.zeros((2, 2, 2)), upper=np.zeros((2, 2, 2)))
    with pytest.raises(SingularPivot) as info:
        Dt.solve(np.ones(6))
    assert info.value.index == 1


def test_block_tridiag_shape_check():
    with pytest.raises(DimensionMismatch):
        BlockTriDiagMatrix(diag=np.zeros((3, 2, 2)), lower=np.zeros((3, 2, 2)), upper=np.zeros((2, 2, 2)))


def test_ilu0_exact_on_tridiagonal():
    """ILU(0) of a tridiagonal matrix creates no fill, so it is the exact LU."""
    A = _laplacian_1d(12)
    F = ilu0_factor(A)
    assert np.allclose((F.L @ F.U).toarray(), A.toarray())
    b = np.arange(12, dtype=float)
    assert np.allclose(A @ ilu0_solve(F, b), b)


def test_ilu0_keeps_pattern():
    A = as_csr(sp.random(30, 30, density=0.1, random_state=2) + 10.0 * sp.identity(30))
    F = ilu0_factor(A)
    assert F.nnz == A.nnz
    assert F.L.shape == F.U.shape == A.shape


def test_ilu0_zero_pivot():
    A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(ZeroPivot):
        ilu0_factor(A)


def test_jacobi_sweep():
    A = _laplacian_1d(6)
    b = np.ones(6)
    x = jacobi_sweep(A, np.zeros(6), b)
    assert np.allclose(x, 0.5)
    many = jacobi_sweep(A, np.zeros(6), b, sweeps=500)
    assert np.linalg.norm(A @ many - b) < 1e-8
    with pytest.raises(ZeroDiagonal):
        jacobi_sweep(sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 1.0]])), np.zeros(2), np.ones(2))


def test_matrix_market_round_trip(tmp_path):
    A = as_csr(sp.random(8, 5, density=0.4, random_state=0))
    write_matrix_market(tmp_path / "A.mtx", A)
    B = read_matrix_market(tmp_path / "A.mtx")
    assert B.shape == A.shape
    assert abs(A - B).max() == 0.0

    S = _laplacian_1d(5)
    write_matrix_market(tmp_path / "S.mtx", S, symmetric=True)
    assert abs(read_matrix_market(tmp_path / "S.mtx") - S).max() == 0.0

    v = np.array([1.0, -2.5, 1e-300])
    write_matrix_market(tmp_path / "v.mtx", v)
    assert np.array_equal(read_vector(tmp_path / "v.mtx"), v)


def test_matrix_market_errors_are_located(tmp_path):
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real general\n3 3 2\n1 1 1.0\n4 1 2.0\n", encoding="utf-8")
    with pytest.raises(FormatError) as info:
        read_matrix_market(bad)
    assert info.value.line == 4
    assert str(bad) in str(info.value)

    with pytest.raises(FormatError):
        read_matrix_market(tmp_path / "missing.mtx")
    with pytest.raises(FormatError):
        read_vector(tmp_path / "missing.mtx")
