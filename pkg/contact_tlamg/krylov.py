"""Krylov solvers: right-preconditioned GCR for the saddle system, PCG for SPD blocks.

Both solvers stop when ||b - A x||_2 <= tol * ||b||_2 and record the
relative residual history ||r_k|| / ||r_0|| (history[0] = 1 for b != 0).
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .exceptions import Breakdown, ConfigError, DimensionMismatch, IndefiniteDetected

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100
    rel_tolerance: float = 1e-8
    restart: Optional[int] = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.rel_tolerance > 0:
            raise ConfigError(f"rel_tolerance must be positive, got {self.rel_tolerance}")
        if self.restart is not None and self.restart < 1:
            raise ConfigError(f"restart must be >= 1, got {self.restart}")

    @property
    def directions(self) -> int:
        return self.restart if self.restart is not None else self.max_iterations


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    residual_history: List[float] = field(default_factory=list)
    setup_time: float = 0.0
    solve_time: float = 0.0
    failure: Optional[str] = None
    # ||b - A x|| / ||b|| at exit; the history is normalized by ||r_0|| instead
    relative_residual: Optional[float] = None

    @property
    def final_residual(self) -> float:
        if self.relative_residual is not None:
            return self.relative_residual
        return self.residual_history[-1] if self.residual_history else float("nan")

    @property
    def total_time(self) -> float:
        return self.setup_time + self.solve_time

    def to_dict(self) -> dict:
        out = asdict(self)
        out["final_residual"] = self.final_residual
        return out


def as_operator(op, n: Optional[int] = None) -> LinearOperator:
    """Wrap a matrix, LinearOperator or callable as a LinearOperator (None -> identity)."""
    if op is None:
        if n is None:
            raise DimensionMismatch("identity operator needs a size")
        return LinearOperator((n, n), matvec=lambda x: np.array(x, dtype=float), dtype=float)
    if isinstance(op, LinearOperator):
        return op
    if sp.issparse(op) or isinstance(op, np.ndarray):
        return aslinearoperator(op)
    if callable(op):
        if n is None:
            raise DimensionMismatch("callable operator needs a size")
        return LinearOperator((n, n), matvec=op, dtype=float)
    raise TypeError(f"cannot use {type(op).__name__} as a linear operator")


def _setup_problem(A, M, b, x0):
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    A = as_operator(A, n)
    if A.shape != (n, n):
        raise DimensionMismatch(f"operator shape {A.shape} does not match rhs length {n}")
    M = as_operator(M, n)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    return A, M, b, x


# ---------------------------------------------------------------------------
# GCR
# ---------------------------------------------------------------------------
def gcr_solve(A, M, b: np.ndarray, cfg: SolverConfig = SolverConfig(), x0: Optional[np.ndarray] = None,
              callback: Optional[Callable[[int, float], None]] = None) -> Tuple[np.ndarray, SolveReport]:
    """Right-preconditioned GCR.

    Search directions z_i = M r and their images q_i = A z_i are kept
    A-orthonormal in the q sense (q_i . q_j = delta_ij), modified
    Gram-Schmidt. With ``cfg.restart`` set, the stored directions are
    discarded every ``restart`` iterations.
    """
    A, M, b, x = _setup_problem(A, M, b, x0)
    report = SolveReport()
    start = time.perf_counter()

    r = b - A.matvec(x)
    bnorm = np.linalg.norm(b)
    r0 = np.linalg.norm(r)
    if bnorm == 0.0 or r0 == 0.0:
        report.residual_history = [1.0 if bnorm > 0.0 else 0.0]
        report.relative_residual = 0.0
        if bnorm == 0.0:
            x = np.zeros_like(b)
        report.converged = True
        report.solve_time = time.perf_counter() - start
        return x, report
    report.residual_history.append(1.0)
    target = cfg.rel_tolerance * bnorm

    Z: List[np.ndarray] = []
    Q: List[np.ndarray] = []
    rnorm = r0
    for k in range(1, cfg.max_iterations + 1):
        z = np.asarray(M.matvec(r), dtype=float).ravel()
        q = np.asarray(A.matvec(z), dtype=float).ravel()
        raw = np.linalg.norm(q)
        for zi, qi in zip(Z, Q):
            beta = qi @ q
            q -= beta * qi
            z -= beta * zi
        qnorm = np.linalg.norm(q)
        if not np.isfinite(qnorm) or qnorm <= 1e-15 * raw or qnorm == 0.0:
            report.iterations = k - 1
            report.failure = f"breakdown at iteration {k}"
            report.relative_residual = rnorm / bnorm
            report.solve_time = time.perf_counter() - start
            logger.warning(f"[GCR] search direction with zero A-image at iteration {k}")
            raise Breakdown(k, report)
        q /= qnorm
        z /= qnorm
        alpha = q @ r
        x += alpha * z
        r -= alpha * q
        rnorm = np.linalg.norm(r)
        rel = rnorm / r0
        report.residual_history.append(rel)
        report.iterations = k
        logger.debug(f"[GCR] it {k:4d}  r_rel={rel:.3e}")
        if callback is not None:
            callback(k, rel)
        if rnorm <= target:
            report.converged = True
            break
        if len(Z) + 1 >= cfg.directions:
            Z.clear()
            Q.clear()
        else:
            Z.append(z)
            Q.append(q)

    report.relative_residual = rnorm / bnorm
    report.solve_time = time.perf_counter() - start
    level = logging.INFO if report.converged else logging.WARNING
    logger.log(level, f"[GCR] {'converged' if report.converged else 'not converged'} after "
                      f"{report.iterations} iterations, r_rel={report.final_residual:.3e}")
    return x, report


# ---------------------------------------------------------------------------
# CG
# ---------------------------------------------------------------------------
def cg_solve(A, M, b: np.ndarray, cfg: SolverConfig = SolverConfig(), x0: Optional[np.ndarray] = None,
             callback: Optional[Callable[[int, float], None]] = None) -> Tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate gradients for SPD A and SPD M."""
    A, M, b, x = _setup_problem(A, M, b, x0)
    report = SolveReport()
    start = time.perf_counter()

    r = b - A.matvec(x)
    bnorm = np.linalg.norm(b)
    r0 = np.linalg.norm(r)
    if bnorm == 0.0 or r0 == 0.0:
        report.residual_history = [1.0 if bnorm > 0.0 else 0.0]
        report.relative_residual = 0.0
        if bnorm == 0.0:
            x = np.zeros_like(b)
        report.converged = True
        return x, report
    report.residual_history.append(1.0)
    target = cfg.rel_tolerance * bnorm

    z = np.asarray(M.matvec(r), dtype=float).ravel()
    p = z.copy()
    rz = r @ z
    rnorm = r0
    for k in range(1, cfg.max_iterations + 1):
        Ap = np.asarray(A.matvec(p), dtype=float).ravel()
        curvature = p @ Ap
        if curvature <= 0.0:
            report.iterations = k - 1
            report.failure = f"non-positive curvature at iteration {k}"
            report.relative_residual = rnorm / bnorm
            report.solve_time = time.perf_counter() - start
            raise IndefiniteDetected(k, report)
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        report.residual_history.append(rnorm / r0)
        report.iterations = k
        if callback is not None:
            callback(k, rnorm / r0)
        if rnorm <= target:
            report.converged = True
            break
        z = np.asarray(M.matvec(r), dtype=float).ravel()
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new

    report.relative_residual = rnorm / bnorm
    report.solve_time = time.perf_counter() - start
    logger.info(f"[CG] {'converged' if report.converged else 'not converged'} after "
                f"{report.iterations} iterations, r_rel={report.final_residual:.3e}")
    return x, report
