"""Linear elastic stiffness assembly with constant-strain triangles (plane stress).

Dirichlet conditions are homogeneous and imposed by eliminating the fixed
DOFs. Free DOFs are numbered class by class: interior nodes first (body by
body), then master interface nodes, then slave interface nodes, each
interface class pair by pair along its chain. Within a node the (ux, uy)
components are interleaved. This makes the interior / master / slave
partition of the saddle system a plain index-range split.
"""

import logging
import warnings
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .exceptions import DegenerateElement, InvalidMaterial, NoConstraints, UnsupportedConstraint
from .meshgen import MultiBodyMesh, TagKind, interface_chain, interface_frame
from .sparsela import as_csr, write_matrix_market

logger = logging.getLogger(__name__)

_MIN_AREA = 1e-14

INTERIOR, MASTER, SLAVE = 0, 1, 2


@dataclass(frozen=True)
class MaterialParams:
    youngs_modulus: float = 20.0
    poisson_ratio: float = 0.3

    def __post_init__(self):
        if not self.youngs_modulus > 0:
            raise InvalidMaterial(f"Young's modulus must be positive, got {self.youngs_modulus}")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise InvalidMaterial(f"Poisson ratio must lie in [0, 0.5), got {self.poisson_ratio}")

    @property
    def E(self) -> float:
        return self.youngs_modulus

    @property
    def nu(self) -> float:
        return self.poisson_ratio


def plane_stress_matrix(mat: MaterialParams) -> np.ndarray:
    E, nu = mat.E, mat.nu
    return E / (1.0 - nu * nu) * np.array([
        [1.0, nu, 0.0],
        [nu, 1.0, 0.0],
        [0.0, 0.0, 0.5 * (1.0 - nu)],
    ])


def _strain_displacement(coords: np.ndarray):
    """B matrices (m, 3, 6) and areas (m,) for a batch of triangles (m, 3, 2)."""
    x, y = coords[..., 0], coords[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    m = coords.shape[0]
    B = np.zeros((m, 3, 6))
    B[:, 0, 0::2] = b
    B[:, 1, 1::2] = c
    B[:, 2, 0::2] = c
    B[:, 2, 1::2] = b
    safe = np.where(area > 0, area, 1.0)
    B /= (2.0 * safe)[:, None, None]
    return B, area


def _batch_stiffness(coords: np.ndarray, mat: MaterialParams, thickness: float = 1.0) -> np.ndarray:
    B, area = _strain_displacement(coords)
    bad = np.flatnonzero(area <= _MIN_AREA)
    if bad.size:
        raise DegenerateElement(f"triangle {int(bad[0])} has area {area[bad[0]]:.3e}")
    C = plane_stress_matrix(mat)
    Ke = np.einsum("mki,kl,mlj->mij", B, C, B) * (thickness * area)[:, None, None]
    return 0.5 * (Ke + Ke.transpose(0, 2, 1))


def element_stiffness(tri: np.ndarray, mat: MaterialParams, thickness: float = 1.0) -> np.ndarray:
    """6x6 CST plane-stress stiffness, DOFs ordered (u1x, u1y, u2x, u2y, u3x, u3y)."""
    tri = np.asarray(tri, dtype=float).reshape(1, 3, 2)
    return _batch_stiffness(tri, mat, thickness)[0]


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class AssembledElasticity:
    """Stiffness, load and DOF bookkeeping of a multi-body mesh.

    ``dof_map[node, c]`` is the global DOF of component ``c`` of ``node`` or
    -1 when that component is eliminated by a Dirichlet condition.
    ``slave_chains`` / ``master_chains`` map a pair id to its interface nodes
    in chain order (eliminated nodes included).
    """

    K: sp.csr_matrix
    f: np.ndarray
    dof_map: np.ndarray
    dof_class: np.ndarray
    dof_coords: np.ndarray
    n_interior: int
    n_master: int
    n_slave: int
    slave_chains: Dict[int, np.ndarray]
    master_chains: Dict[int, np.ndarray]
    n_blocks: int
    material: MaterialParams

    @property
    def n_dofs(self) -> int:
        return self.K.shape[0]


def _constrained_components(mesh: MultiBodyMesh) -> np.ndarray:
    fixed = np.zeros((mesh.n_nodes, 2), dtype=bool)
    offsets = mesh.node_offsets
    for b, body in enumerate(mesh.bodies):
        for e in body.edges_with(TagKind.DIRICHLET):
            comps = list(body.edge_tags[e].components)
            fixed[body.edges[e] + offsets[b], :] |= np.isin([0, 1], comps)
    return fixed


def _check_constraint_paths(mesh: MultiBodyMesh) -> None:
    clamped = [bool(body.edges_with(TagKind.DIRICHLET)) for body in mesh.bodies]
    neighbours = {b: set() for b in range(mesh.n_bodies)}
    for pair in mesh.pair_ids:
        sides = [
            b for b, body in enumerate(mesh.bodies)
            if body.edges_with(TagKind.SLAVE_INTERFACE, pair) or body.edges_with(TagKind.MASTER_INTERFACE, pair)
        ]
        for a in sides:
            neighbours[a].update(s for s in sides if s != a)
    reached = {b for b, c in enumerate(clamped) if c}
    queue = deque(reached)
    while queue:
        b = queue.popleft()
        for nb in neighbours[b] - reached:
            reached.add(nb)
            queue.append(nb)
    for b, body in enumerate(mesh.bodies):
        if b not in reached:
            msg = f"body {body.name!r} has no Dirichlet edge and no interface path to one"
            logger.warning(f"[Assemble] {msg}")
            warnings.warn(msg, NoConstraints, stacklevel=3)


def _neumann_load(mesh: MultiBodyMesh, dof_map: np.ndarray, n_dofs: int) -> np.ndarray:
    f = np.zeros(n_dofs)
    offsets = mesh.node_offsets
    for b, body in enumerate(mesh.bodies):
        for e in body.edges_with(TagKind.NEUMANN):
            traction = np.asarray(body.edge_tags[e].traction)
            a, c = body.edges[e]
            length = float(np.linalg.norm(body.nodes[c] - body.nodes[a]))
            # two-point Gauss on a linear edge puts half the resultant on each end
            for node in (a, c):
                for comp in range(2):
                    dof = dof_map[node + offsets[b], comp]
                    if dof >= 0:
                        f[dof] += 0.5 * length * traction[comp]
    return f


def assemble(mesh: MultiBodyMesh, mat: MaterialParams, thickness: float = 1.0) -> AssembledElasticity:
    coords = mesh.coordinates
    fixed = _constrained_components(mesh)

    node_class = np.full(mesh.n_nodes, INTERIOR, dtype=np.int8)
    slave_chains, master_chains = {}, {}
    for pair in mesh.pair_ids:
        frame = interface_frame(mesh, pair)
        slave_chains[pair], _ = interface_chain(mesh, TagKind.SLAVE_INTERFACE, pair, frame)
        master_chains[pair], _ = interface_chain(mesh, TagKind.MASTER_INTERFACE, pair, frame)
        if np.any(node_class[slave_chains[pair]] != INTERIOR) or np.any(node_class[master_chains[pair]] != INTERIOR):
            raise UnsupportedConstraint(f"pair {pair}: interface nodes shared with another interface side")
        node_class[master_chains[pair]] = MASTER
        node_class[slave_chains[pair]] = SLAVE

    partial = (node_class == SLAVE) & (fixed.sum(axis=1) == 1)
    if np.any(partial):
        raise UnsupportedConstraint(
            f"slave interface node {int(np.flatnonzero(partial)[0])} is only partially constrained")

    # interior, then master chains, then slave chains
    node_order = [np.flatnonzero(node_class == INTERIOR)]
    node_order += [master_chains[p] for p in mesh.pair_ids]
    node_order += [slave_chains[p] for p in mesh.pair_ids]
    node_order = np.concatenate(node_order).astype(np.int64)

    dof_map = np.full((mesh.n_nodes, 2), -1, dtype=np.int64)
    free = ~fixed[node_order]
    n_dofs = int(free.sum())
    node_idx, comp_idx = np.nonzero(free)
    owner = node_order[node_idx]
    dof_map[owner, comp_idx] = np.arange(n_dofs)
    dof_class = node_class[owner]
    counts = [int(np.sum(dof_class == k)) for k in (INTERIOR, MASTER, SLAVE)]

    # element contributions, body by body
    offsets = mesh.node_offsets
    rows, cols, vals = [], [], []
    for b, body in enumerate(mesh.bodies):
        try:
            Ke = _batch_stiffness(body.nodes[body.triangles], mat, thickness)
        except DegenerateElement as e:
            raise DegenerateElement(f"body {body.name!r}: {e}") from e
        tri_dofs = dof_map[body.triangles + offsets[b]].reshape(-1, 6)
        I = np.repeat(tri_dofs, 6, axis=1)
        J = np.tile(tri_dofs, (1, 6))
        V = Ke.reshape(-1, 36)
        keep = (I >= 0) & (J >= 0)
        rows.append(I[keep])
        cols.append(J[keep])
        vals.append(V[keep])
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_dofs, n_dofs),
    )
    K = as_csr(K)
    f = _neumann_load(mesh, dof_map, n_dofs)

    _check_constraint_paths(mesh)
    n_blocks, _ = connected_components(K, directed=False)

    logger.info(f"[Assemble] {mesh.name}: {n_dofs} DOFs (interior {counts[0]}, master {counts[1]}, "
                f"slave {counts[2]}), nnz(K)={K.nnz}, {n_blocks} blocks")
    return AssembledElasticity(
        K=K,
        f=f,
        dof_map=dof_map,
        dof_class=dof_class,
        dof_coords=coords[owner],
        n_interior=counts[0],
        n_master=counts[1],
        n_slave=counts[2],
        slave_chains=slave_chains,
        master_chains=master_chains,
        n_blocks=int(n_blocks),
        material=mat,
    )


def export_matrix_market(assembled: AssembledElasticity, directory: Union[str, Path]) -> None:
    directory = Path(directory)
    write_matrix_market(directory / "K.mtx", assembled.K, symmetric=True)
    write_matrix_market(directory / "f.mtx", assembled.f)
