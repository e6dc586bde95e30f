"""Classical (Ruge-Stueben style) algebraic multigrid used as the coarse solver.

Coarsening is nodal: the strength graph is built between node blocks of
``block_size`` unknowns from the row-sum norms of the blocks, and a C node
brings all of its unknowns to the coarse level. Interpolation is direct and
component-wise (each displacement component interpolates from the same
component of neighbouring C nodes). One application is a V(1,1) cycle with
damped Jacobi smoothing and a zero initial guess, i.e. a fixed linear
operator.
"""

import heapq
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .exceptions import ConfigError, SetupFailure
from .sparsela import as_csr

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AmgConfig:
    theta: float = 0.25
    omega: float = 2.0 / 3.0
    max_coarse: int = 200
    max_levels: int = 25
    block_size: int = 2
    presweeps: int = 1
    postsweeps: int = 1

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"strength threshold must lie in (0, 1), got {self.theta}")
        if not 0.0 < self.omega <= 1.0:
            raise ConfigError(f"Jacobi weight must lie in (0, 1], got {self.omega}")
        if self.block_size < 1 or self.max_coarse < 1 or self.max_levels < 1:
            raise ConfigError("block_size, max_coarse and max_levels must be positive")


# ---------------------------------------------------------------------------
# Hierarchy containers
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class AmgLevel:
    A: sp.csr_matrix
    P: sp.csr_matrix
    R: sp.csr_matrix
    smoother_diag: np.ndarray  # weight / diag(A)
    weight: float
    n_coarse_nodes: int


@dataclass(frozen=True, eq=False)
class CoarsestSolver:
    kind: str
    n: int
    factor: object = None

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.kind == "cholesky":
            return sla.cho_solve(self.factor, b)
        if self.kind == "lu":
            return sla.lu_solve(self.factor, b)
        if self.kind == "pinv":
            return self.factor @ b
        if self.kind == "diagonal":
            return b / self.factor if b.ndim == 1 else b / self.factor[:, None]
        return self.factor.solve(b)


@dataclass(frozen=True, eq=False)
class AmgHierarchy:
    levels: List[AmgLevel]
    coarsest_A: sp.csr_matrix
    coarsest: CoarsestSolver
    config: AmgConfig
    setup_time: float = 0.0
    sizes: List[int] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.levels[0].A.shape[0] if self.levels else self.coarsest_A.shape[0]

    @property
    def n_levels(self) -> int:
        return len(self.levels) + 1

    @property
    def operator_complexity(self) -> float:
        ops = [lev.A.nnz for lev in self.levels] + [self.coarsest_A.nnz]
        return sum(ops) / max(ops[0], 1)

    @property
    def grid_complexity(self) -> float:
        return sum(self.sizes) / max(self.sizes[0], 1)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return vcycle_apply(self, r)

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.n, self.n), matvec=self.apply, matmat=self.apply, dtype=float)


# ---------------------------------------------------------------------------
# Setup pieces
# ---------------------------------------------------------------------------
def nodal_strength(A: sp.csr_matrix, theta: float, block_size: int) -> sp.csr_matrix:
    """Symmetrized strong-connection graph between node blocks.

    Node coupling N_IJ is the row-sum (infinity) norm of block A_IJ; J is
    strong for I when N_IJ >= theta * max_{K != I} N_IK.
    """
    bs = block_size
    n_nodes = A.shape[0] // bs
    coo = A.tocoo()
    # sum |a| over the columns of each node block, keep unknown rows
    row_sums = sp.csr_matrix((np.abs(coo.data), (coo.row, coo.col // bs)), shape=(A.shape[0], n_nodes))
    N = None
    for a in range(bs):
        part = sp.csr_matrix(row_sums[a::bs, :])
        N = part if N is None else N.maximum(part)
    N = sp.csr_matrix(N)
    N.setdiag(0.0)
    N.eliminate_zeros()
    if N.nnz == 0:
        return N
    row_max = np.asarray(N.max(axis=1).todense()).ravel()
    rows = np.repeat(np.arange(n_nodes), np.diff(N.indptr))
    strong = N.data >= theta * row_max[rows]
    S = sp.csr_matrix((np.ones(int(strong.sum())), (rows[strong], N.indices[strong])), shape=(n_nodes, n_nodes))
    S = ((S + S.T) > 0).astype(float).tocsr()
    S.sort_indices()
    return S


def rs_coarsening(S: sp.csr_matrix) -> np.ndarray:
    """First-pass Ruge-Stueben splitting on a symmetric strength graph; True marks C nodes.

    Ties in the measure go to the smaller node index.
    """
    n = S.shape[0]
    indptr, indices = S.indptr, S.indices
    measure = np.diff(indptr).astype(np.int64)
    UNDECIDED, COARSE, FINE = 0, 1, 2
    state = np.zeros(n, dtype=np.int8)
    state[measure == 0] = FINE  # isolated nodes need no interpolation
    heap = [(-int(measure[i]), i) for i in range(n) if state[i] == UNDECIDED]
    heapq.heapify(heap)
    while heap:
        neg, i = heapq.heappop(heap)
        if state[i] != UNDECIDED or -neg != measure[i]:
            continue
        state[i] = COARSE
        for j in indices[indptr[i]:indptr[i + 1]]:
            if state[j] != UNDECIDED:
                continue
            state[j] = FINE
            for k in indices[indptr[j]:indptr[j + 1]]:
                if state[k] == UNDECIDED:
                    measure[k] += 1
                    heapq.heappush(heap, (-int(measure[k]), int(k)))
    return state == COARSE


def direct_interpolation(A: sp.csr_matrix, S: sp.csr_matrix, c_nodes: np.ndarray, block_size: int) -> sp.csr_matrix:
    """Classical direct interpolation, component by component.

    Negative and positive couplings are scaled separately; a sign class
    with no interpolatory coupling is lumped into the diagonal.
    """
    bs = block_size
    n = A.shape[0]
    n_nodes = n // bs
    c_unknown = np.repeat(c_nodes, bs)
    coarse_index = np.full(n, -1, dtype=np.int64)
    coarse_index[c_unknown] = np.arange(int(c_unknown.sum()))
    nc = int(c_unknown.sum())

    coo = A.tocoo()
    row, col, val = coo.row, coo.col, coo.data
    node_r, node_c = row // bs, col // bs
    same = (row % bs == col % bs) & (row != col)

    s_coo = S.tocoo()
    strong_keys = np.sort(s_coo.row.astype(np.int64) * n_nodes + s_coo.col)
    keys = node_r.astype(np.int64) * n_nodes + node_c
    pos = np.searchsorted(strong_keys, keys)
    pos = np.minimum(pos, max(strong_keys.size - 1, 0))
    strong = (strong_keys.size > 0) & (strong_keys[pos] == keys) if strong_keys.size else np.zeros_like(same)

    interp = same & strong & c_unknown[col] & ~c_unknown[row]
    neg = val < 0
    total_neg = np.bincount(row, weights=np.where(same & neg, val, 0.0), minlength=n)
    total_pos = np.bincount(row, weights=np.where(same & ~neg, val, 0.0), minlength=n)
    interp_neg = np.bincount(row, weights=np.where(interp & neg, val, 0.0), minlength=n)
    interp_pos = np.bincount(row, weights=np.where(interp & ~neg, val, 0.0), minlength=n)

    diag = A.diagonal().copy()
    eff = diag + np.where(interp_neg == 0.0, total_neg, 0.0) + np.where(interp_pos == 0.0, total_pos, 0.0)
    eff = np.where(eff > 0.0, eff, diag)
    alpha = np.divide(total_neg, interp_neg, out=np.zeros(n), where=interp_neg != 0.0)
    beta = np.divide(total_pos, interp_pos, out=np.zeros(n), where=interp_pos != 0.0)

    r_i, c_i, v_i = row[interp], col[interp], val[interp]
    scale = np.where(v_i < 0, alpha[r_i], beta[r_i])
    weights = -scale * v_i / eff[r_i]

    c_rows = np.flatnonzero(c_unknown)
    P = sp.coo_matrix(
        (np.concatenate([weights, np.ones(nc)]),
         (np.concatenate([r_i, c_rows]), np.concatenate([coarse_index[c_i], coarse_index[c_rows]]))),
        shape=(n, nc),
    )
    return as_csr(P)


def _spectral_radius(A: sp.csr_matrix) -> float:
    """rho(D^-1 A), via the symmetric scaling D^-1/2 A D^-1/2."""
    d = A.diagonal()
    scale = 1.0 / np.sqrt(np.abs(d))
    B = sp.diags(scale) @ A @ sp.diags(scale)
    n = A.shape[0]
    if n <= 400:
        return float(np.max(np.abs(np.linalg.eigvalsh(B.toarray()))))
    try:
        vals = eigsh(B, k=1, which="LM", v0=np.ones(n), tol=1e-3, maxiter=max(200, n // 10),
                     return_eigenvectors=False)
        return float(np.abs(vals).max())
    except ArpackNoConvergence:
        # Gershgorin bound
        return float(np.asarray(abs(B).sum(axis=1)).max())


def _smoother_weight(A: sp.csr_matrix, omega: float) -> float:
    rho = _spectral_radius(A)
    return omega if rho <= 2.0 else omega * 2.0 / rho


def _coarsest_solver(A: sp.csr_matrix, max_dense: int) -> CoarsestSolver:
    n = A.shape[0]
    if n > max_dense:
        logger.warning(f"[AMG] coarsest level has {n} unknowns; using a sparse LU factorization")
        return CoarsestSolver("splu", n, splu(sp.csc_matrix(A)))
    dense = A.toarray()
    try:
        return CoarsestSolver("cholesky", n, sla.cho_factor(dense))
    except sla.LinAlgError:
        pass
    lu, piv = sla.lu_factor(dense, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() > 1e-12 * max(pivots.max(), 1e-300):
        return CoarsestSolver("lu", n, (lu, piv))
    logger.warning(f"[AMG] coarsest operator ({n} unknowns) is singular; using its pseudo-inverse")
    return CoarsestSolver("pinv", n, np.linalg.pinv(dense))


def _is_diagonal(A: sp.csr_matrix) -> bool:
    coo = A.tocoo()
    return bool(np.all(coo.row == coo.col))


# ---------------------------------------------------------------------------
# Setup and cycle
# ---------------------------------------------------------------------------
def amg_setup(A, theta: Optional[float] = None, config: Optional[AmgConfig] = None) -> AmgHierarchy:
    start = time.perf_counter()
    config = config or AmgConfig()
    if theta is not None:
        config = AmgConfig(theta=theta, omega=config.omega, max_coarse=config.max_coarse,
                           max_levels=config.max_levels, block_size=config.block_size,
                           presweeps=config.presweeps, postsweeps=config.postsweeps)
    A = as_csr(A)
    if A.shape[0] != A.shape[1]:
        raise SetupFailure(f"AMG needs a square matrix, got {A.shape}")
    if np.any(A.diagonal() <= 0):
        raise SetupFailure("AMG needs a positive diagonal")

    levels: List[AmgLevel] = []
    sizes = [A.shape[0]]
    bs = config.block_size if A.shape[0] % config.block_size == 0 else 1
    while True:
        n = A.shape[0]
        if n <= config.max_coarse or len(levels) + 1 >= config.max_levels:
            coarsest = _coarsest_solver(A, max_dense=max(config.max_coarse, 1000))
            break
        S = nodal_strength(A, config.theta, bs)
        c_nodes = rs_coarsening(S) if S.nnz else np.zeros(n // bs, dtype=bool)
        n_coarse = int(c_nodes.sum()) * bs
        if n_coarse == 0 or n_coarse >= n:
            if _is_diagonal(A):
                coarsest = CoarsestSolver("diagonal", n, A.diagonal().copy())
                break
            raise SetupFailure(f"coarsening stalled at level {len(levels)} with {n} unknowns "
                               f"({'no strong connections' if S.nnz == 0 else 'no reduction'})")
        P = direct_interpolation(A, S, c_nodes, bs)
        R = as_csr(P.T)
        weight = _smoother_weight(A, config.omega)
        levels.append(AmgLevel(A=A, P=P, R=R, smoother_diag=weight / A.diagonal(), weight=weight,
                               n_coarse_nodes=int(c_nodes.sum())))
        A = as_csr(R @ A @ P)
        sizes.append(A.shape[0])
        if A.shape[0] % bs:
            bs = 1

    h = AmgHierarchy(levels=levels, coarsest_A=A, coarsest=coarsest, config=config,
                     setup_time=time.perf_counter() - start, sizes=sizes)
    logger.info(f"[AMG] {h.n_levels} levels, sizes {sizes}, operator complexity "
                f"{h.operator_complexity:.2f}, grid complexity {h.grid_complexity:.2f}, "
                f"coarsest solve {coarsest.kind}, setup {h.setup_time:.2f}s")
    return h


def _cycle(h: AmgHierarchy, level: int, b: np.ndarray) -> np.ndarray:
    if level == len(h.levels):
        return h.coarsest.solve(b)
    lev = h.levels[level]
    inv = lev.smoother_diag if b.ndim == 1 else lev.smoother_diag[:, None]
    x = inv * b
    for _ in range(h.config.presweeps - 1):
        x += inv * (b - lev.A @ x)
    x += lev.P @ _cycle(h, level + 1, lev.R @ (b - lev.A @ x))
    for _ in range(h.config.postsweeps):
        x += inv * (b - lev.A @ x)
    return x


def vcycle_apply(h: AmgHierarchy, r: np.ndarray) -> np.ndarray:
    """One V-cycle from a zero initial guess."""
    r = np.asarray(r, dtype=float)
    return _cycle(h, 0, r)
