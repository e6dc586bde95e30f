"""Two-level preconditioner for the tied-contact saddle system.

The CF splitting is physical: interior and master displacements are coarse
(C), slave displacements and multipliers are fine (F). Because the F block
[[K_SS, D^T], [D, 0]] is inverted exactly through the mortar matrix D, the
Galerkin coarse operator is the Schur complement

    A_H = [[K_NN,               K_NM + K_NS P      ],
           [K_MN + P^T K_SN,    K_MM + P^T K_SS P  ]],   P = D^-1 M,

which is SPD and handed to one AMG V-cycle (or a direct solve). D^-1 is only
ever applied through a block Thomas factorization of its block tridiagonal
reordering D~ = D T^-1.

One preconditioner application is: pre-smooth, restrict the residual,
coarse solve, interpolate and correct. There is no post-smoothing.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, splu

from .coarse_amg import AmgConfig, AmgHierarchy, amg_setup
from .exceptions import ConfigError
from .mortar import BlockPermutation, factor_block_tridiag
from .saddle import SaddleSystem
from .sparsela import (
    BlockTriDiagMatrix,
    IluFactorization,
    as_csr,
    drop,
    ilu0_factor,
    ilu0_solve,
    jacobi_sweep,
    nnz_per_row,
    write_matrix_market,
)

logger = logging.getLogger(__name__)

_P_COLUMN_CHUNK = 256


class InterpolationKind(str, Enum):
    IDEAL = "ideal"
    SIMPLIFIED = "simplified"


class RestrictionKind(str, Enum):
    IDEAL = "ideal"
    SIMPLIFIED = "simplified"


class SmootherKind(str, Enum):
    NONE = "none"
    JACOBI = "jac"
    EXACT_F = "exactf"
    SSIMPLE = "ssimple"


class CoarseSolverKind(str, Enum):
    AMG = "amg"
    DIRECT = "direct"


_SMOOTHER_LABELS = {
    SmootherKind.NONE: "none",
    SmootherKind.JACOBI: "JAC",
    SmootherKind.EXACT_F: "B_F",
    SmootherKind.SSIMPLE: "B_s",
}


def _parse_enum(enum_cls, value, what: str):
    try:
        return enum_cls(value.value if isinstance(value, Enum) else str(value).lower())
    except ValueError:
        choices = ", ".join(m.value for m in enum_cls)
        raise ConfigError(f"unknown {what} {value!r} (choose from {choices})") from None


@dataclass(frozen=True)
class TwoLevelConfig:
    """Choices of one two-level preconditioner.

    ``restriction=None`` picks the ideal restriction for the exact
    variants (eps == 0) and the simplified one for the dropped variants.
    """

    interpolation: InterpolationKind = InterpolationKind.SIMPLIFIED
    restriction: Optional[RestrictionKind] = None
    approx_eps: float = 1e-10
    smoother: SmootherKind = SmootherKind.EXACT_F
    coarse: CoarseSolverKind = CoarseSolverKind.AMG
    amg: AmgConfig = field(default_factory=AmgConfig)
    jacobi_sweeps: int = 1
    ssimple_sweeps: int = 1

    def __post_init__(self):
        object.__setattr__(self, "interpolation", _parse_enum(InterpolationKind, self.interpolation, "interpolation"))
        if self.restriction is not None:
            object.__setattr__(self, "restriction", _parse_enum(RestrictionKind, self.restriction, "restriction"))
        object.__setattr__(self, "smoother", _parse_enum(SmootherKind, self.smoother, "smoother"))
        object.__setattr__(self, "coarse", _parse_enum(CoarseSolverKind, self.coarse, "coarse solver"))
        if not self.approx_eps >= 0.0:
            raise ConfigError(f"drop tolerance must be >= 0, got {self.approx_eps}")
        if self.jacobi_sweeps < 1 or self.ssimple_sweeps < 1:
            raise ConfigError("smoother sweep counts must be >= 1")

    @property
    def resolved_restriction(self) -> RestrictionKind:
        if self.restriction is not None:
            return self.restriction
        return RestrictionKind.IDEAL if self.approx_eps == 0.0 else RestrictionKind.SIMPLIFIED

    @property
    def label(self) -> str:
        p = "P^" if self.interpolation is InterpolationKind.IDEAL else "P~"
        if self.approx_eps > 0.0:
            p += "d"
        r = "R^" if self.resolved_restriction is RestrictionKind.IDEAL else "R~"
        coarse = "" if self.coarse is CoarseSolverKind.AMG else ",direct"
        return f"TLAMG:{p}/{r}({_SMOOTHER_LABELS[self.smoother]}{coarse})"


# ---------------------------------------------------------------------------
# CF splitting
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CfSplit:
    n_interior: int
    n_master: int
    n_slave: int
    n_lambda: int

    @property
    def n(self) -> int:
        return self.n_interior + self.n_master + self.n_slave + self.n_lambda

    @property
    def N(self) -> slice:
        return slice(0, self.n_interior)

    @property
    def M(self) -> slice:
        return slice(self.n_interior, self.n_interior + self.n_master)

    @property
    def S(self) -> slice:
        start = self.n_interior + self.n_master
        return slice(start, start + self.n_slave)

    @property
    def L(self) -> slice:
        return slice(self.n - self.n_lambda, self.n)

    @property
    def C(self) -> slice:
        return slice(0, self.n_interior + self.n_master)

    @property
    def F(self) -> slice:
        return slice(self.n_interior + self.n_master, self.n)

    @property
    def n_coarse(self) -> int:
        return self.n_interior + self.n_master

    @property
    def n_fine(self) -> int:
        return self.n_slave + self.n_lambda


def build_cf_split(sys: SaddleSystem) -> CfSplit:
    return CfSplit(sys.n_interior, sys.n_master, sys.n_slave, sys.n_lambda)


# ---------------------------------------------------------------------------
# Transfer operators
# ---------------------------------------------------------------------------
def build_P_matrix(Dtilde: BlockTriDiagMatrix, T: BlockPermutation, M: sp.spmatrix, eps: float = 0.0) -> sp.csr_matrix:
    """P = D^-1 M = T^-1 D~^-1 M, solved a chunk of columns at a time, then dropped at ``eps``."""
    M = sp.csc_matrix(M)
    n_rows, n_cols = M.shape
    blocks = []
    for start in range(0, n_cols, _P_COLUMN_CHUNK):
        stop = min(start + _P_COLUMN_CHUNK, n_cols)
        rhs = M[:, start:stop].toarray()
        cols = T.apply_inverse(Dtilde.solve(rhs))
        chunk = sp.csc_matrix(cols.reshape(n_rows, stop - start))
        blocks.append(drop(chunk, eps) if eps > 0.0 else as_csr(chunk))
    if not blocks:
        return sp.csr_matrix((n_rows, n_cols))
    return as_csr(sp.hstack(blocks, format="csr"))


@dataclass(frozen=True, eq=False)
class TransferOperators:
    """P (possibly dropped), the D = D~ T handles, and the explicit P~ when it is stored."""

    interpolation: InterpolationKind
    restriction: RestrictionKind
    eps: float
    P: sp.csr_matrix
    Dtilde: BlockTriDiagMatrix
    T: BlockPermutation
    displacement_prolongation: sp.csr_matrix  # [[I_N, 0], [0, I_M], [0, P]]
    explicit: Optional[sp.csr_matrix] = None  # P~ = [..; 0] over the full saddle system

    @property
    def variant(self) -> str:
        base = "IdealImplicit" if self.interpolation is InterpolationKind.IDEAL else "SimplifiedExplicit"
        return f"Approx{base}" if self.eps > 0.0 else base

    def d_inv(self, x: np.ndarray) -> np.ndarray:
        """D^-1 x = T^-1 (D~^-1 x)."""
        return self.T.apply_inverse(self.Dtilde.solve(x))

    def d_inv_t(self, x: np.ndarray) -> np.ndarray:
        """D^-T x = D~^-T (T x)."""
        return self.Dtilde.solve(self.T.apply(x), transpose=True)


def _displacement_prolongation(split: CfSplit, P: sp.csr_matrix) -> sp.csr_matrix:
    eye_n = sp.identity(split.n_interior, format="csr")
    eye_m = sp.identity(split.n_master, format="csr")
    return as_csr(sp.bmat([
        [eye_n, None],
        [None, eye_m],
        [sp.csr_matrix((split.n_slave, split.n_interior)), P],
    ], format="csr"))


def build_transfers(sys: SaddleSystem, config: TwoLevelConfig, split: Optional[CfSplit] = None) -> TransferOperators:
    split = split or build_cf_split(sys)
    Dtilde, T = factor_block_tridiag(sys.D)
    P = build_P_matrix(Dtilde, T, sys.M, config.approx_eps)
    Pu = _displacement_prolongation(split, P)
    explicit = None
    if config.interpolation is InterpolationKind.SIMPLIFIED:
        explicit = as_csr(sp.vstack([Pu, sp.csr_matrix((split.n_lambda, split.n_coarse))], format="csr"))
    return TransferOperators(
        interpolation=config.interpolation,
        restriction=config.resolved_restriction,
        eps=config.approx_eps,
        P=P,
        Dtilde=Dtilde,
        T=T,
        displacement_prolongation=Pu,
        explicit=explicit,
    )


def assemble_coarse(sys: SaddleSystem, transfers: TransferOperators) -> sp.csr_matrix:
    """Schur complement A_H = Pu^T K Pu (K_MS vanishes)."""
    Pu = transfers.displacement_prolongation
    A_H = as_csr(Pu.T @ sys.K @ Pu)
    # the triple product is symmetric up to summation order
    return as_csr(0.5 * (A_H + A_H.T))


# ---------------------------------------------------------------------------
# Smoothers
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SmootherSpec:
    kind: SmootherKind
    sweeps: int = 1
    jacobi_matrix: Optional[sp.csr_matrix] = None  # saddle matrix with the lambda diagonal set to 1
    A_CC: Optional[sp.csr_matrix] = None
    A_CF: Optional[sp.csr_matrix] = None
    A_FC: Optional[sp.csr_matrix] = None
    s_tilde: Optional[sp.csr_matrix] = None
    ilu: Optional[IluFactorization] = None


def build_smoother(sys: SaddleSystem, config: TwoLevelConfig) -> SmootherSpec:
    kind = config.smoother
    if kind is SmootherKind.JACOBI:
        patch = np.zeros(sys.n)
        patch[sys.ranges["L"]] = 1.0
        return SmootherSpec(kind, sweeps=config.jacobi_sweeps, jacobi_matrix=as_csr(sys.A + sp.diags(patch)))
    if kind is SmootherKind.SSIMPLE:
        A_CC, A_CF = sys.block("C", "C"), sys.block("C", "F")
        A_FC, A_FF = sys.block("F", "C"), sys.block("F", "F")
        s_tilde = as_csr(A_FF - A_FC @ sp.diags(1.0 / A_CC.diagonal()) @ A_CF)
        ilu = ilu0_factor(s_tilde)
        logger.info(f"[Setup] sSIMPLE: S~ {s_tilde.shape[0]} rows, nnz {s_tilde.nnz}, ILU(0) nnz {ilu.nnz}")
        return SmootherSpec(kind, sweeps=config.ssimple_sweeps, A_CC=A_CC, A_CF=A_CF, A_FC=A_FC,
                            s_tilde=s_tilde, ilu=ilu)
    return SmootherSpec(kind)


def smoother_exactF_apply(pc: "TwoLevelPreconditioner", b: np.ndarray) -> np.ndarray:
    """Exact F-relaxation: solve A_FF x_F = b_F with x_C = 0."""
    r = pc.system.ranges
    tr = pc.transfers
    x = np.zeros_like(b, dtype=float)
    x_s = tr.d_inv(b[r["L"]])
    x[r["S"]] = x_s
    x[r["L"]] = tr.d_inv_t(b[r["S"]] - pc.K_SS @ x_s)
    return x


def smoother_ssimple_apply(pc: "TwoLevelPreconditioner", b: np.ndarray) -> np.ndarray:
    """Simplified SIMPLE: p = D_CC^-1 b_C, S~ q ~= b_F - A_FC p, x_C = p - D_CC^-1 A_CF q."""
    sm = pc.smoother
    split = pc.split
    b_c, b_f = b[split.C], b[split.F]
    p = jacobi_sweep(sm.A_CC, np.zeros_like(b_c), b_c)
    rhs = b_f - sm.A_FC @ p
    q = np.zeros_like(rhs)
    for _ in range(sm.sweeps):
        q += ilu0_solve(sm.ilu, rhs - sm.s_tilde @ q)
    x = np.empty_like(b, dtype=float)
    x[split.C] = p - jacobi_sweep(sm.A_CC, np.zeros_like(b_c), sm.A_CF @ q)
    x[split.F] = q
    return x


def smoother_jacobi_apply(pc: "TwoLevelPreconditioner", b: np.ndarray) -> np.ndarray:
    sm = pc.smoother
    return jacobi_sweep(sm.jacobi_matrix, np.zeros_like(b, dtype=float), b, sweeps=sm.sweeps)


def smoother_apply(pc: "TwoLevelPreconditioner", b: np.ndarray) -> np.ndarray:
    kind = pc.smoother.kind
    if kind is SmootherKind.EXACT_F:
        return smoother_exactF_apply(pc, b)
    if kind is SmootherKind.SSIMPLE:
        return smoother_ssimple_apply(pc, b)
    if kind is SmootherKind.JACOBI:
        return smoother_jacobi_apply(pc, b)
    return np.zeros_like(b, dtype=float)


# ---------------------------------------------------------------------------
# Restriction / interpolation
# ---------------------------------------------------------------------------
def apply_restriction(pc: "TwoLevelPreconditioner", f: np.ndarray) -> np.ndarray:
    """Restrict a fine residual to the coarse space.

    Ideal: f_H = R~ (f - A v~) with v~ = D^-1 f_lambda in the S slot.
    Simplified: f_H = P~^T f = [f_N; f_M + P^T f_S].
    """
    r = pc.system.ranges
    tr = pc.transfers
    f = np.asarray(f, dtype=float)
    if tr.restriction is RestrictionKind.IDEAL:
        v_s = tr.d_inv(f[r["L"]])
        g_c = f[r["C"]] - pc.A_CS @ v_s
        g_s = f[r["S"]] - pc.K_SS @ v_s
    else:
        g_c = f[r["C"]].copy()
        g_s = f[r["S"]]
    g_c[pc.split.M] += tr.P.T @ g_s
    return g_c


def apply_interpolation(pc: "TwoLevelPreconditioner", e_H: np.ndarray) -> np.ndarray:
    """e = P~ e_H; the ideal variant also fills the multiplier slot with -D^-T (A P~ e_H)_S."""
    r = pc.system.ranges
    tr = pc.transfers
    e_H = np.asarray(e_H, dtype=float)
    e = np.zeros(pc.system.n)
    e[r["U"]] = tr.displacement_prolongation @ e_H
    if tr.interpolation is InterpolationKind.IDEAL:
        t1 = pc.K_SU @ e[r["U"]]
        e[r["L"]] = -tr.d_inv_t(t1)
    return e


# ---------------------------------------------------------------------------
# The preconditioner
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class OperatorStats:
    nnz_row_P: float
    nnz_P: int
    nnz_row_interp: float
    nnz_interp: int
    nnz_row_AH: float
    nnz_AH: int
    n_coarse: int
    setup_time: float
    amg_levels: int = 0
    operator_complexity: float = float("nan")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class TwoLevelPreconditioner:
    """Set-up two-level preconditioner; ``apply`` is reentrant."""

    system: SaddleSystem
    split: CfSplit
    config: TwoLevelConfig
    transfers: TransferOperators
    smoother: SmootherSpec
    A_H: sp.csr_matrix
    coarse_solve: Callable[[np.ndarray], np.ndarray]
    stats: OperatorStats
    amg: Optional[AmgHierarchy] = None
    K_SS: sp.csr_matrix = None
    K_SU: sp.csr_matrix = None
    A_CS: sp.csr_matrix = None

    @classmethod
    def setup(cls, sys: SaddleSystem, config: Optional[TwoLevelConfig] = None) -> "TwoLevelPreconditioner":
        config = config or TwoLevelConfig()
        start = time.perf_counter()
        split = build_cf_split(sys)
        transfers = build_transfers(sys, config, split)
        A_H = assemble_coarse(sys, transfers)
        smoother = build_smoother(sys, config)

        amg = None
        if config.coarse is CoarseSolverKind.AMG:
            amg = amg_setup(A_H, config=config.amg)
            coarse_solve = amg.apply
        else:
            coarse_solve = splu(sp.csc_matrix(A_H)).solve

        elapsed = time.perf_counter() - start
        explicit = transfers.explicit
        stats = OperatorStats(
            nnz_row_P=nnz_per_row(transfers.P),
            nnz_P=int(transfers.P.nnz),
            nnz_row_interp=nnz_per_row(explicit) if explicit is not None else float("nan"),
            nnz_interp=int(explicit.nnz) if explicit is not None else -1,
            nnz_row_AH=nnz_per_row(A_H),
            nnz_AH=int(A_H.nnz),
            n_coarse=split.n_coarse,
            setup_time=elapsed,
            amg_levels=amg.n_levels if amg is not None else 0,
            operator_complexity=amg.operator_complexity if amg is not None else float("nan"),
        )
        logger.info(f"[Setup] {config.label}: |C|={split.n_coarse} |F|={split.n_fine}, "
                    f"nnz/row P={stats.nnz_row_P:.1f}, A_H={stats.nnz_row_AH:.1f}, {elapsed:.2f}s")
        return cls(
            system=sys,
            split=split,
            config=config,
            transfers=transfers,
            smoother=smoother,
            A_H=A_H,
            coarse_solve=coarse_solve,
            stats=stats,
            amg=amg,
            K_SS=sys.block("S", "S"),
            K_SU=sys.block("S", "U"),
            A_CS=sys.block("C", "S"),
        )

    @property
    def label(self) -> str:
        return self.config.label

    @property
    def setup_time(self) -> float:
        return self.stats.setup_time

    def with_coarse_solver(self, solve: Callable[[np.ndarray], np.ndarray]) -> "TwoLevelPreconditioner":
        """Same preconditioner with another (fixed, linear) coarse solve."""
        return replace(self, coarse_solve=solve, amg=None)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return precond_apply(self, r)

    def as_linear_operator(self) -> LinearOperator:
        n = self.system.n
        return LinearOperator((n, n), matvec=self.apply, dtype=float)

    def export_coarse(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        write_matrix_market(path, self.A_H, symmetric=True, comment=f"coarse operator of {self.label}")
        return path


def precond_apply(pc: TwoLevelPreconditioner, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    z = smoother_apply(pc, r)
    f = r - pc.system.A @ z
    e_H = pc.coarse_solve(apply_restriction(pc, f))
    return z + apply_interpolation(pc, e_H)
