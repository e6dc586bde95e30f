"""The tied-contact saddle system [[K, G^T], [G, 0]] and its index ranges.

Unknowns are ordered interior (N), master interface (M), slave interface
(S), multipliers (lambda). The coarse set is C = N + M, the fine set
F = S + lambda, both contiguous.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp

from .elasticity import AssembledElasticity, MaterialParams, assemble
from .exceptions import DimensionMismatch
from .meshgen import MultiBodyMesh
from .mortar import MortarMatrices, assemble_mortar, build_G, build_pairing
from .sparsela import as_csr

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    A: sp.csr_matrix
    rhs: np.ndarray
    n_interior: int
    n_master: int
    n_slave: int
    n_lambda: int
    name: str = ""
    n_pairs: int = 0
    dof_coords: Optional[np.ndarray] = None
    mortars: List[MortarMatrices] = field(default_factory=list)

    def __post_init__(self):
        n = self.n_interior + self.n_master + self.n_slave + self.n_lambda
        if self.A.shape != (n, n) or self.rhs.shape != (n,):
            raise DimensionMismatch(f"saddle system of size {n} got matrix {self.A.shape} and rhs {self.rhs.shape}")
        if self.n_slave != self.n_lambda:
            raise DimensionMismatch(f"|S| = {self.n_slave} differs from |lambda| = {self.n_lambda}; D is not square")

    # ---- sizes and ranges ----
    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_disp(self) -> int:
        return self.n_interior + self.n_master + self.n_slave

    @property
    def n_coarse(self) -> int:
        return self.n_interior + self.n_master

    @property
    def n_fine(self) -> int:
        return self.n_slave + self.n_lambda

    @property
    def ranges(self) -> Dict[str, slice]:
        a = self.n_interior
        b = a + self.n_master
        c = b + self.n_slave
        return {
            "N": slice(0, a),
            "M": slice(a, b),
            "S": slice(b, c),
            "L": slice(c, self.n),
            "C": slice(0, b),
            "F": slice(b, self.n),
            "U": slice(0, c),
        }

    def block(self, rows: str, cols: str) -> sp.csr_matrix:
        r = self.ranges
        return as_csr(self.A[r[rows], :][:, r[cols]])

    # ---- named blocks ----
    @cached_property
    def K(self) -> sp.csr_matrix:
        return self.block("U", "U")

    @cached_property
    def G(self) -> sp.csr_matrix:
        return self.block("L", "U")

    @cached_property
    def D(self) -> sp.csr_matrix:
        return self.block("L", "S")

    @cached_property
    def M(self) -> sp.csr_matrix:
        return -self.block("L", "M")

    @property
    def f(self) -> np.ndarray:
        return self.rhs[self.ranges["U"]]

    def summary(self) -> str:
        return (f"{self.name or 'system'}: n={self.n} (N={self.n_interior}, M={self.n_master}, "
                f"S={self.n_slave}, lambda={self.n_lambda}), nnz={self.A.nnz}, pairs={self.n_pairs}")


def from_blocks(K: sp.spmatrix, G: sp.spmatrix, f: np.ndarray, n_interior: int, n_master: int,
                n_slave: int, **kwargs) -> SaddleSystem:
    """Assemble [[K, G^T], [G, 0]] and rhs [f; 0] from its displacement and constraint blocks."""
    K, G = as_csr(K), as_csr(G)
    n_lambda = G.shape[0]
    if K.shape[0] != n_interior + n_master + n_slave or G.shape[1] != K.shape[0]:
        raise DimensionMismatch(f"K {K.shape} and G {G.shape} do not match the index ranges")
    A = as_csr(sp.bmat([[K, G.T], [G, None]], format="csr"))
    rhs = np.concatenate([np.asarray(f, dtype=float), np.zeros(n_lambda)])
    return SaddleSystem(A=A, rhs=rhs, n_interior=n_interior, n_master=n_master,
                        n_slave=n_slave, n_lambda=n_lambda, **kwargs)


def build_saddle_system(mesh: MultiBodyMesh, mat: Optional[MaterialParams] = None,
                        assembled: Optional[AssembledElasticity] = None) -> SaddleSystem:
    if mat is None:
        mat = mesh.spec.material if mesh.spec is not None else MaterialParams()
    if assembled is None:
        assembled = assemble(mesh, mat)
    mortars, rows = [], []
    for pair in mesh.pair_ids:
        mortar = assemble_mortar(build_pairing(mesh, pair))
        mortars.append(mortar)
        rows.append(build_G(mortar, assembled.dof_map, assembled.n_dofs))
    if rows:
        G = as_csr(sp.vstack(rows, format="csr"))
    else:
        G = sp.csr_matrix((0, assembled.n_dofs))

    system = from_blocks(
        assembled.K, G, assembled.f,
        assembled.n_interior, assembled.n_master, assembled.n_slave,
        name=mesh.name,
        n_pairs=len(mortars),
        dof_coords=assembled.dof_coords,
        mortars=mortars,
    )
    if system.block("M", "S").nnz:
        raise DimensionMismatch("master and slave interface DOFs share elements; K_MS must vanish")
    logger.info(f"[Assemble] saddle {system.summary()}")
    return system
