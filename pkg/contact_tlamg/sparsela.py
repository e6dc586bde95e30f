"""Sparse and small-dense kernels used by every solver component.

CSR storage and products come from ``scipy.sparse``; this module adds the
pieces scipy does not ship in the shape we need: entry dropping, a 2x2
block-tridiagonal (block Thomas) solver, ILU(0) on the input pattern,
plain Jacobi sweeps and MatrixMarket I/O with located format errors.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from .exceptions import (
    DimensionMismatch,
    FormatError,
    SingularPivot,
    ZeroDiagonal,
    ZeroPivot,
)

logger = logging.getLogger(__name__)

CsrMatrix = sp.csr_matrix

# relative determinant floor for 2x2 pivot blocks
_PIVOT_RTOL = 1e-14


# ---------------------------------------------------------------------------
# CSR helpers
# ---------------------------------------------------------------------------
def as_csr(A) -> sp.csr_matrix:
    """Return a canonical CSR copy: sorted indices, no duplicates, no stored zeros."""
    B = sp.csr_matrix(A, dtype=float, copy=True)
    B.sum_duplicates()
    B.eliminate_zeros()
    B.sort_indices()
    return B


def spmv(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"spmv: matrix has {A.shape[1]} columns, vector has {x.shape[0]} entries")
    return A @ x


def spgemm(A: sp.csr_matrix, B: sp.csr_matrix) -> sp.csr_matrix:
    """Sparse product A @ B as sorted CSR. Entries are never thresholded."""
    if A.shape[1] != B.shape[0]:
        raise DimensionMismatch(f"spgemm: inner dimensions {A.shape[1]} and {B.shape[0]} differ")
    C = sp.csr_matrix(A @ B)
    C.sort_indices()
    return C


def drop(A: sp.csr_matrix, eps: float) -> sp.csr_matrix:
    """Keep entry a_ij iff |a_ij| > eps."""
    if eps < 0:
        raise ValueError(f"drop tolerance must be non-negative, got {eps}")
    B = sp.csr_matrix(A, dtype=float, copy=True)
    B.data[np.abs(B.data) <= eps] = 0.0
    B.eliminate_zeros()
    B.sort_indices()
    return B


def nnz_per_row(A) -> float:
    """Average stored entries per row."""
    if A is None or A.shape[0] == 0:
        return float("nan")
    return A.nnz / A.shape[0]


def to_dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.array(A, dtype=float)


# ---------------------------------------------------------------------------
# 2x2 block tridiagonal matrices
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class BlockThomasFactor:
    """Precomputed forward sweep of the block Thomas algorithm.

    ``inv_pivots[i]`` is the inverse of the i-th modified pivot block and
    ``sweep[i] = inv_pivots[i] @ upper[i]``. Applying the factor only does
    matrix-vector work, so one factor serves any number of solves.
    """

    inv_pivots: np.ndarray  # (n, 2, 2)
    sweep: np.ndarray  # (n-1, 2, 2)
    lower: np.ndarray  # (n-1, 2, 2)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        n = self.inv_pivots.shape[0]
        vector = rhs.ndim == 1
        if rhs.shape[0] != 2 * n:
            raise DimensionMismatch(f"block Thomas: expected {2 * n} rows, got {rhs.shape[0]}")
        d = rhs.reshape(n, 2, -1)
        y = np.empty_like(d)
        y[0] = self.inv_pivots[0] @ d[0]
        for i in range(1, n):
            y[i] = self.inv_pivots[i] @ (d[i] - self.lower[i - 1] @ y[i - 1])
        for i in range(n - 2, -1, -1):
            y[i] -= self.sweep[i] @ y[i + 1]
        out = y.reshape(2 * n, -1)
        return out[:, 0] if vector else out


def _factor_blocks(diag: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> BlockThomasFactor:
    n = diag.shape[0]
    inv_pivots = np.empty((n, 2, 2))
    sweep = np.empty((max(n - 1, 0), 2, 2))
    pivot = diag[0]
    for i in range(n):
        if i > 0:
            pivot = diag[i] - lower[i - 1] @ sweep[i - 1]
        scale = np.abs(pivot).max()
        det = pivot[0, 0] * pivot[1, 1] - pivot[0, 1] * pivot[1, 0]
        if scale == 0.0 or abs(det) <= _PIVOT_RTOL * scale * scale:
            raise SingularPivot(i)
        inv_pivots[i] = np.array([[pivot[1, 1], -pivot[0, 1]], [-pivot[1, 0], pivot[0, 0]]]) / det
        if i < n - 1:
            sweep[i] = inv_pivots[i] @ upper[i]
    return BlockThomasFactor(inv_pivots=inv_pivots, sweep=sweep, lower=lower.copy())


@dataclass(frozen=True, eq=False)
class BlockTriDiagMatrix:
    """Block tridiagonal matrix with 2x2 blocks.

    ``lower[i]`` is block (i+1, i) and ``upper[i]`` is block (i, i+1).
    """

    diag: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = self.diag.shape[0]
        if self.diag.shape != (n, 2, 2) or self.lower.shape != (max(n - 1, 0), 2, 2) \
                or self.upper.shape != (max(n - 1, 0), 2, 2):
            raise DimensionMismatch("BlockTriDiagMatrix: inconsistent block shapes")

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    @property
    def shape(self):
        return (2 * self.n, 2 * self.n)

    def is_symmetric(self, tol: float = 1e-14) -> bool:
        if not np.allclose(self.diag, self.diag.transpose(0, 2, 1), rtol=0.0, atol=tol):
            return False
        return np.allclose(self.lower, self.upper.transpose(0, 2, 1), rtol=0.0, atol=tol)

    def to_csr(self) -> sp.csr_matrix:
        n = self.n
        blocks: List[List[Optional[np.ndarray]]] = [[None] * n for _ in range(n)]
        for i in range(n):
            blocks[i][i] = self.diag[i]
            if i < n - 1:
                blocks[i][i + 1] = self.upper[i]
                blocks[i + 1][i] = self.lower[i]
        return as_csr(sp.bmat(blocks, format="csr"))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xb = x.reshape(self.n, 2, -1)
        y = np.einsum("nij,njk->nik", self.diag, xb)
        if self.n > 1:
            y[:-1] += np.einsum("nij,njk->nik", self.upper, xb[1:])
            y[1:] += np.einsum("nij,njk->nik", self.lower, xb[:-1])
        return y.reshape(x.shape)

    @cached_property
    def factor(self) -> BlockThomasFactor:
        return _factor_blocks(self.diag, self.lower, self.upper)

    @cached_property
    def factor_transposed(self) -> BlockThomasFactor:
        return _factor_blocks(
            self.diag.transpose(0, 2, 1),
            self.upper.transpose(0, 2, 1),
            self.lower.transpose(0, 2, 1),
        )

    def solve(self, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
        """Solve with this matrix (or its transpose); rhs may hold several columns."""
        fac = self.factor_transposed if transpose else self.factor
        return fac.solve(rhs)


def block_thomas_solve(Dt: BlockTriDiagMatrix, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
    return Dt.solve(rhs, transpose=transpose)


# ---------------------------------------------------------------------------
# ILU(0)
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class IluFactorization:
    """ILU(0) factors on the pattern of the input matrix.

    ``L`` is unit lower triangular with its unit diagonal stored, ``U`` upper
    triangular including the pivots.
    """

    L: sp.csr_matrix
    U: sp.csr_matrix

    @property
    def shape(self):
        return self.U.shape

    @property
    def nnz(self) -> int:
        return self.L.nnz - self.L.shape[0] + self.U.nnz


def ilu0_factor(A) -> IluFactorization:
    A = sp.csr_matrix(A, dtype=float, copy=True)
    A.sum_duplicates()
    A.sort_indices()
    n = A.shape[0]
    if A.shape[1] != n:
        raise DimensionMismatch(f"ILU(0) needs a square matrix, got {A.shape}")
    indptr, indices, data = A.indptr, A.indices, A.data

    diag_ptr = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        row = indices[indptr[i]:indptr[i + 1]]
        hit = np.searchsorted(row, i)
        if hit < row.size and row[hit] == i:
            diag_ptr[i] = indptr[i] + hit
        else:
            raise ZeroPivot(i)

    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        position = {int(indices[p]): p for p in range(start, end)}
        for p in range(start, diag_ptr[i]):
            k = int(indices[p])
            pivot = data[diag_ptr[k]]
            if pivot == 0.0:
                raise ZeroPivot(k)
            data[p] /= pivot
            factor = data[p]
            for q in range(diag_ptr[k] + 1, indptr[k + 1]):
                target = position.get(int(indices[q]))
                if target is not None:
                    data[target] -= factor * data[q]
        if data[diag_ptr[i]] == 0.0:
            raise ZeroPivot(i)

    L = sp.csr_matrix(sp.tril(A, k=-1, format="csr") + sp.identity(n, format="csr"))
    U = sp.csr_matrix(sp.triu(A, k=0, format="csr"))
    L.sort_indices()
    U.sort_indices()
    return IluFactorization(L=L, U=U)


def ilu0_solve(F: IluFactorization, rhs: np.ndarray) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != F.shape[0]:
        raise DimensionMismatch(f"ILU solve: expected {F.shape[0]} rows, got {rhs.shape[0]}")
    y = spsolve_triangular(F.L, rhs, lower=True, unit_diagonal=True)
    return spsolve_triangular(F.U, y, lower=False)


# ---------------------------------------------------------------------------
# Jacobi
# ---------------------------------------------------------------------------
def jacobi_sweep(A, x: np.ndarray, b: np.ndarray, sweeps: int = 1, weight: float = 1.0) -> np.ndarray:
    """``sweeps`` iterations of x <- x + weight * Dg^-1 (b - A x)."""
    diag = A.diagonal()
    zero = np.flatnonzero(diag == 0.0)
    if zero.size:
        raise ZeroDiagonal(int(zero[0]))
    x = np.array(x, dtype=float, copy=True)
    b = np.asarray(b, dtype=float)
    inv = weight / diag
    if b.ndim == 2:
        inv = inv[:, None]
    for _ in range(sweeps):
        x += inv * (b - A @ x)
    return x


# ---------------------------------------------------------------------------
# MatrixMarket I/O
# ---------------------------------------------------------------------------
PathLike = Union[str, Path]


def write_matrix_market(path: PathLike, A, symmetric: bool = False, comment: str = "") -> None:
    """Write a sparse matrix in coordinate format or a vector in array format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if sp.issparse(A):
        target = sp.coo_matrix(as_csr(A))
        if symmetric:
            target = sp.coo_matrix(sp.tril(target))
        scipy.io.mmwrite(str(path), target, comment=comment, field="real", precision=17,
                         symmetry="symmetric" if symmetric else "general")
    else:
        vec = np.asarray(A, dtype=float).reshape(-1, 1)
        scipy.io.mmwrite(str(path), vec, comment=comment, field="real", precision=17, symmetry="general")
    logger.debug(f"[MatrixMarket] wrote {path}")


def _locate_bad_line(path: Path) -> Optional[int]:
    """Best-effort line number of the first malformed line of a MatrixMarket file."""
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError):
        return None
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        return 1
    is_coordinate = "coordinate" in lines[0].lower()
    size = None
    for lineno, line in enumerate(lines[1:], start=2):
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        tokens = text.split()
        try:
            values = [float(t) for t in tokens]
        except ValueError:
            return lineno
        if size is None:
            if len(values) not in (2, 3):
                return lineno
            size = [int(v) for v in values]
            continue
        if is_coordinate:
            if len(values) != 3:
                return lineno
            i, j = int(values[0]), int(values[1])
            if not (1 <= i <= size[0] and 1 <= j <= size[1]):
                return lineno
        elif len(values) != 1:
            return lineno
    return None


def read_matrix_market(path: PathLike) -> sp.csr_matrix:
    path = Path(path)
    if not path.exists():
        raise FormatError(path, "file not found")
    try:
        data = scipy.io.mmread(str(path))
    except Exception as e:
        raise FormatError(path, f"unreadable MatrixMarket data ({e})", _locate_bad_line(path)) from e
    if not sp.issparse(data):
        data = sp.csr_matrix(np.atleast_2d(data))
    return as_csr(data)


def read_vector(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FormatError(path, "file not found")
    try:
        data = scipy.io.mmread(str(path))
    except Exception as e:
        raise FormatError(path, f"unreadable MatrixMarket data ({e})", _locate_bad_line(path)) from e
    arr = data.toarray() if sp.issparse(data) else np.asarray(data, dtype=float)
    if arr.ndim == 2 and 1 not in arr.shape:
        raise FormatError(path, f"expected a vector, got shape {arr.shape}")
    return arr.ravel().astype(float)
