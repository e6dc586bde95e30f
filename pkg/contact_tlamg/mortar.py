"""Mortar coupling of non-matching interfaces.

For each contact pair the slave and master chains lie on one straight
line; the slave-to-master map is the identity in the arclength coordinate
of that line. Integration cells are the pieces between the merged slave
and master breakpoints, so every cell sees one slave and one master
segment and the linear x linear integrands are integrated exactly by a
3-point Gauss rule. Multipliers use the standard slave trace basis, which
makes D the 1D slave mass matrix (tridiagonal).
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionMismatch, GeometryMismatch, NotTridiagonalizable
from .meshgen import MultiBodyMesh, TagKind, interface_chain, interface_frame
from .sparsela import BlockTriDiagMatrix, as_csr, write_matrix_market

logger = logging.getLogger(__name__)

GEOMETRY_TOL = 1e-10

_GAUSS_POINTS = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GAUSS_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 9.0


# ---------------------------------------------------------------------------
# Pairing
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class InterfacePairing:
    """One contact pair in arclength coordinates.

    ``cells[i] = (a, b)`` is an integration cell; ``cell_slave[i]`` and
    ``cell_master[i]`` are the indices of the slave and master segments
    covering it (segment k joins chain nodes k and k+1).
    """

    pair_id: int
    slave_nodes: np.ndarray
    slave_params: np.ndarray
    master_nodes: np.ndarray
    master_params: np.ndarray
    breakpoints: np.ndarray
    cell_slave: np.ndarray
    cell_master: np.ndarray

    @property
    def cells(self) -> np.ndarray:
        return np.column_stack([self.breakpoints[:-1], self.breakpoints[1:]])

    @property
    def n_cells(self) -> int:
        return self.breakpoints.size - 1

    @property
    def cell_lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def length(self) -> float:
        return float(self.slave_params[-1] - self.slave_params[0])


def _merge_breakpoints(slave: np.ndarray, master: np.ndarray, tol: float) -> np.ndarray:
    merged = list(slave)
    for t in master:
        if np.min(np.abs(slave - t)) > tol:
            merged.append(t)
    merged = np.sort(np.asarray(merged))
    return merged[(merged >= slave[0]) & (merged <= slave[-1])]


def build_pairing(mesh: MultiBodyMesh, pair_id: int) -> InterfacePairing:
    frame = interface_frame(mesh, pair_id)
    origin, direction = frame
    s_nodes, s_par = interface_chain(mesh, TagKind.SLAVE_INTERFACE, pair_id, frame)
    m_nodes, m_par = interface_chain(mesh, TagKind.MASTER_INTERFACE, pair_id, frame)
    if s_nodes.size < 2 or m_nodes.size < 2:
        raise GeometryMismatch(f"pair {pair_id}: each side needs at least one interface edge")

    coords = mesh.coordinates
    normal = np.array([-direction[1], direction[0]])
    offset = np.abs((coords[np.concatenate([s_nodes, m_nodes])] - origin) @ normal)
    if offset.max() > GEOMETRY_TOL:
        raise GeometryMismatch(f"pair {pair_id}: interface chains are not collinear (offset {offset.max():.3e})")
    if abs(s_par[0] - m_par[0]) > GEOMETRY_TOL or abs(s_par[-1] - m_par[-1]) > GEOMETRY_TOL:
        raise GeometryMismatch(
            f"pair {pair_id}: slave extent [{s_par[0]:.6g}, {s_par[-1]:.6g}] differs from "
            f"master extent [{m_par[0]:.6g}, {m_par[-1]:.6g}]")

    length = s_par[-1] - s_par[0]
    bp = _merge_breakpoints(s_par, m_par, 1e-12 * length)
    mid = 0.5 * (bp[:-1] + bp[1:])
    cell_slave = np.clip(np.searchsorted(s_par, mid) - 1, 0, s_par.size - 2)
    cell_master = np.clip(np.searchsorted(m_par, mid) - 1, 0, m_par.size - 2)
    logger.debug(f"[Mortar] pair {pair_id}: {s_nodes.size} slave / {m_nodes.size} master nodes, {bp.size - 1} cells")
    return InterfacePairing(
        pair_id=pair_id,
        slave_nodes=s_nodes,
        slave_params=s_par,
        master_nodes=m_nodes,
        master_params=m_par,
        breakpoints=bp,
        cell_slave=cell_slave,
        cell_master=cell_master,
    )


# ---------------------------------------------------------------------------
# Mortar matrices
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class MortarMatrices:
    """Scalar mortar integrals of one pair; ``D``/``M`` lift them to 2x2 identity blocks."""

    pair_id: int
    slave_nodes: np.ndarray
    master_nodes: np.ndarray
    D_scalar: sp.csr_matrix
    M_scalar: sp.csr_matrix

    @property
    def D(self) -> sp.csr_matrix:
        return as_csr(sp.kron(self.D_scalar, sp.identity(2)))

    @property
    def M(self) -> sp.csr_matrix:
        return as_csr(sp.kron(self.M_scalar, sp.identity(2)))


def _hat_values(params: np.ndarray, segment: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Values of the two linear basis functions of ``segment`` at points ``s``."""
    left, right = params[segment], params[segment + 1]
    ratio = (s - left) / (right - left)
    return np.stack([1.0 - ratio, ratio], axis=-1)


def assemble_mortar(pairing: InterfacePairing) -> MortarMatrices:
    a, b = pairing.breakpoints[:-1], pairing.breakpoints[1:]
    half = 0.5 * (b - a)
    s = (0.5 * (a + b))[:, None] + half[:, None] * _GAUSS_POINTS[None, :]
    w = half[:, None] * _GAUSS_WEIGHTS[None, :]

    ks = np.repeat(pairing.cell_slave[:, None], 3, axis=1)
    km = np.repeat(pairing.cell_master[:, None], 3, axis=1)
    phi = _hat_values(pairing.slave_params, ks, s)
    psi = _hat_values(pairing.master_params, km, s)

    d_rows, d_cols, d_vals = [], [], []
    m_rows, m_cols, m_vals = [], [], []
    for i in range(2):
        for j in range(2):
            d_rows.append(ks + i)
            d_cols.append(ks + j)
            d_vals.append(w * phi[..., i] * phi[..., j])
            m_rows.append(ks + i)
            m_cols.append(km + j)
            m_vals.append(w * phi[..., i] * psi[..., j])

    n_s, n_m = pairing.slave_nodes.size, pairing.master_nodes.size
    D = sp.coo_matrix(
        (np.concatenate([v.ravel() for v in d_vals]),
         (np.concatenate([r.ravel() for r in d_rows]), np.concatenate([c.ravel() for c in d_cols]))),
        shape=(n_s, n_s),
    )
    M = sp.coo_matrix(
        (np.concatenate([v.ravel() for v in m_vals]),
         (np.concatenate([r.ravel() for r in m_rows]), np.concatenate([c.ravel() for c in m_cols]))),
        shape=(n_s, n_m),
    )
    return MortarMatrices(
        pair_id=pairing.pair_id,
        slave_nodes=pairing.slave_nodes,
        master_nodes=pairing.master_nodes,
        D_scalar=as_csr(D),
        M_scalar=as_csr(M),
    )


def kept_multipliers(mortar: MortarMatrices, dof_map: np.ndarray) -> np.ndarray:
    """Mask of multipliers that survive elimination (slave node not fully clamped)."""
    return np.any(dof_map[mortar.slave_nodes] >= 0, axis=1)


def build_G(mortar: MortarMatrices, dof_map: np.ndarray, n_dofs: int) -> sp.csr_matrix:
    """Constraint rows [D on slave columns, -M on master columns] of one pair.

    Multipliers of fully clamped slave nodes are dropped together with the
    node; columns of eliminated DOFs are dropped.
    """
    top = max(mortar.slave_nodes.max(), mortar.master_nodes.max())
    if top >= dof_map.shape[0]:
        raise IndexError(f"pair {mortar.pair_id}: node {top} is not covered by the DOF map")
    keep = kept_multipliers(mortar, dof_map)
    row_of = np.full(keep.size, -1, dtype=np.int64)
    row_of[keep] = np.arange(int(keep.sum()))

    rows, cols, vals = [], [], []
    for block, nodes, sign in ((mortar.D_scalar.tocoo(), mortar.slave_nodes, 1.0),
                               (mortar.M_scalar.tocoo(), mortar.master_nodes, -1.0)):
        for c in range(2):
            r = row_of[block.row]
            col = dof_map[nodes[block.col], c]
            ok = (r >= 0) & (col >= 0)
            rows.append(2 * r[ok] + c)
            cols.append(col[ok])
            vals.append(sign * block.data[ok])
    G = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * int(keep.sum()), n_dofs),
    )
    return as_csr(G)


# ---------------------------------------------------------------------------
# D = D~ T
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class BlockPermutation:
    """Node-block column permutation T with (T x)[block j] = x[block perm[j]]."""

    perm: np.ndarray

    @property
    def dof_perm(self) -> np.ndarray:
        return (2 * self.perm[:, None] + np.arange(2)[None, :]).ravel()

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.dof_perm]

    def apply_inverse(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        x = np.empty_like(y)
        x[self.dof_perm] = y
        return x

    def to_csr(self) -> sp.csr_matrix:
        n = self.dof_perm.size
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.dof_perm)), shape=(n, n))

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.perm, np.arange(self.perm.size)))


def factor_block_tridiag(D: sp.csr_matrix) -> Tuple[BlockTriDiagMatrix, BlockPermutation]:
    """Reorder the node columns of D so it becomes 2x2-block tridiagonal.

    Each multiplier row is matched with the column block of largest
    magnitude (the diagonal of the 1D mass matrix), giving D~ = D T^-1.
    """
    D = as_csr(D)
    if D.shape[0] != D.shape[1] or D.shape[0] % 2:
        raise DimensionMismatch(f"mortar D must be square with 2x2 blocks, got {D.shape}")
    m = D.shape[0] // 2
    coo = D.tocoo()
    nodal = as_csr(sp.coo_matrix((np.abs(coo.data), (coo.row // 2, coo.col // 2)), shape=(m, m)))

    counts = np.diff(nodal.indptr)
    if np.any(counts > 3):
        row = int(np.flatnonzero(counts > 3)[0])
        raise NotTridiagonalizable(f"multiplier node {row} couples to {counts[row]} slave nodes")
    if np.any(counts == 0):
        raise NotTridiagonalizable(f"multiplier node {int(np.flatnonzero(counts == 0)[0])} has an empty row")

    perm = np.array([
        nodal.indices[nodal.indptr[j] + np.argmax(nodal.data[nodal.indptr[j]:nodal.indptr[j + 1]])]
        for j in range(m)
    ], dtype=np.int64)
    if np.unique(perm).size != m:
        raise NotTridiagonalizable("diagonal matching of multiplier rows to slave nodes is not a permutation")
    position = np.empty(m, dtype=np.int64)
    position[perm] = np.arange(m)

    bi, bj = coo.row // 2, position[coo.col // 2]
    if np.any(np.abs(bi - bj) > 1):
        raise NotTridiagonalizable("reordered D is not block tridiagonal")
    ci, cj = coo.row % 2, coo.col % 2
    diag = np.zeros((m, 2, 2))
    lower = np.zeros((max(m - 1, 0), 2, 2))
    upper = np.zeros((max(m - 1, 0), 2, 2))
    on = bi == bj
    np.add.at(diag, (bi[on], ci[on], cj[on]), coo.data[on])
    up = bj == bi + 1
    np.add.at(upper, (bi[up], ci[up], cj[up]), coo.data[up])
    lo = bi == bj + 1
    np.add.at(lower, (bj[lo], ci[lo], cj[lo]), coo.data[lo])
    return BlockTriDiagMatrix(diag=diag, lower=lower, upper=upper), BlockPermutation(perm)


def export_matrix_market(D: sp.csr_matrix, M: sp.csr_matrix, G: sp.csr_matrix,
                         directory: Union[str, Path]) -> None:
    directory = Path(directory)
    write_matrix_market(directory / "D.mtx", D)
    write_matrix_market(directory / "M.mtx", M)
    write_matrix_market(directory / "G.mtx", G)
