"""Comparison preconditioners for the saddle system: SIMPLE and plain AMG."""

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .coarse_amg import AmgConfig, AmgHierarchy, amg_setup
from .saddle import SaddleSystem
from .sparsela import IluFactorization, as_csr, ilu0_factor, ilu0_solve

logger = logging.getLogger(__name__)


class _PreconditionerMixin:
    def as_linear_operator(self) -> LinearOperator:
        n = self.system.n
        return LinearOperator((n, n), matvec=self.apply, dtype=float)


@dataclass(frozen=True, eq=False)
class SimplePreconditioner(_PreconditionerMixin):
    """SIMPLE block factorization.

    u* = AMG(K) r_u,  p = ILU(S_s)^-1 (r_lambda - G u*),  u = u* - D_K^-1 G^T p,
    with S_s = -G D_K^-1 G^T and D_K = diag(K).
    """

    system: SaddleSystem
    amg: AmgHierarchy
    inv_diag_K: np.ndarray
    schur: sp.csr_matrix
    ilu: IluFactorization
    setup_time: float
    label: str = "SIMPLE"

    @classmethod
    def setup(cls, sys: SaddleSystem, amg_config: Optional[AmgConfig] = None) -> "SimplePreconditioner":
        start = time.perf_counter()
        inv_diag = 1.0 / sys.K.diagonal()
        amg = amg_setup(sys.K, config=amg_config)
        schur = as_csr(-(sys.G @ sp.diags(inv_diag) @ sys.G.T))
        ilu = ilu0_factor(schur)
        elapsed = time.perf_counter() - start
        logger.info(f"[Setup] SIMPLE: multiplier Schur {schur.shape[0]} rows, nnz {schur.nnz}, {elapsed:.2f}s")
        return cls(system=sys, amg=amg, inv_diag_K=inv_diag, schur=schur, ilu=ilu, setup_time=elapsed)

    def apply(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        rng = self.system.ranges
        G = self.system.G
        u_star = self.amg.apply(r[rng["U"]])
        p = ilu0_solve(self.ilu, r[rng["L"]] - G @ u_star)
        z = np.empty_like(r)
        z[rng["U"]] = u_star - self.inv_diag_K * (G.T @ p)
        z[rng["L"]] = p
        return z


@dataclass(frozen=True, eq=False)
class PlainAmgPreconditioner(_PreconditionerMixin):
    """One V-cycle of AMG built on the whole saddle matrix, lambda diagonal set to 1."""

    system: SaddleSystem
    amg: AmgHierarchy
    setup_time: float
    label: str = "AMG"

    @classmethod
    def setup(cls, sys: SaddleSystem, amg_config: Optional[AmgConfig] = None) -> "PlainAmgPreconditioner":
        start = time.perf_counter()
        patch = np.zeros(sys.n)
        patch[sys.ranges["L"]] = 1.0
        amg = amg_setup(as_csr(sys.A + sp.diags(patch)), config=amg_config)
        elapsed = time.perf_counter() - start
        logger.info(f"[Setup] plain AMG on the saddle matrix: {amg.n_levels} levels, {elapsed:.2f}s")
        return cls(system=sys, amg=amg, setup_time=elapsed)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return self.amg.apply(np.asarray(r, dtype=float))
