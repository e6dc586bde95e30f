"""Structured multi-body triangle meshes for the tied-contact benchmark models.

Every body is an axis-aligned rectangle meshed as a grid of quads, each quad
split into two counter-clockwise triangles. Bodies never share nodes; the
contact pairs are expressed only through interface edge tags, and slave
sides are meshed finer than master sides by ``mismatch_ratio`` so the two
interface discretizations do not match.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .exceptions import InvalidSpec

logger = logging.getLogger(__name__)

SIDES = ("bottom", "right", "top", "left")


# ---------------------------------------------------------------------------
# Tags and specs
# ---------------------------------------------------------------------------
class ModelId(str, Enum):
    MODEL1 = "model1"
    MODEL2 = "model2"
    MODEL3 = "model3"

    @classmethod
    def parse(cls, value: Union[str, int, "ModelId"]) -> "ModelId":
        if isinstance(value, ModelId):
            return value
        text = str(value).strip().lower().replace("_", "").replace(" ", "")
        if text.isdigit():
            text = f"model{text}"
        for member in cls:
            if member.value == text:
                return member
        raise InvalidSpec(f"unknown model {value!r}; expected one of model1, model2, model3")


class TagKind(str, Enum):
    FREE = "free"
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    SLAVE_INTERFACE = "slave"
    MASTER_INTERFACE = "master"


@dataclass(frozen=True)
class EdgeTag:
    """Boundary condition attached to one boundary edge.

    ``pair`` indexes the contact pair of interface tags. ``components`` lists
    the fixed displacement components of a Dirichlet tag (0 = x, 1 = y).
    ``traction`` is the surface force per unit length of a Neumann tag.
    """

    kind: TagKind
    pair: Optional[int] = None
    components: Tuple[int, ...] = (0, 1)
    traction: Tuple[float, float] = (0.0, 0.0)

    @classmethod
    def free(cls) -> "EdgeTag":
        return cls(TagKind.FREE)

    @classmethod
    def dirichlet(cls, components: Tuple[int, ...] = (0, 1)) -> "EdgeTag":
        return cls(TagKind.DIRICHLET, components=tuple(components))

    @classmethod
    def neumann(cls, tx: float, ty: float) -> "EdgeTag":
        return cls(TagKind.NEUMANN, traction=(float(tx), float(ty)))

    @classmethod
    def slave(cls, pair: int) -> "EdgeTag":
        return cls(TagKind.SLAVE_INTERFACE, pair=pair)

    @classmethod
    def master(cls, pair: int) -> "EdgeTag":
        return cls(TagKind.MASTER_INTERFACE, pair=pair)

    @property
    def is_interface(self) -> bool:
        return self.kind in (TagKind.SLAVE_INTERFACE, TagKind.MASTER_INTERFACE)


def _default_material():
    from .elasticity import MaterialParams

    return MaterialParams()


@dataclass(frozen=True)
class ContactModelSpec:
    model_id: ModelId
    resolution: int
    mismatch_ratio: Fraction = Fraction(3, 2)
    traction_magnitude: Optional[float] = None
    material: "MaterialParams" = field(default_factory=_default_material)  # noqa: F821
    allow_matching: bool = False
    # elements per unit length on slave bodies; derived from the ratio when None
    slave_elements: Optional[int] = None

    def validate(self) -> None:
        if not isinstance(self.resolution, (int, np.integer)) or self.resolution < 2:
            raise InvalidSpec(f"resolution must be an integer >= 2, got {self.resolution!r}")
        if self.slave_elements is not None and (
                not isinstance(self.slave_elements, (int, np.integer)) or self.slave_elements < 1):
            raise InvalidSpec(f"slave_elements must be a positive integer, got {self.slave_elements!r}")
        ratio = Fraction(self.mismatch_ratio)
        if ratio <= 0:
            raise InvalidSpec(f"mismatch_ratio must be positive, got {self.mismatch_ratio}")
        if ratio == 1 and not self.allow_matching:
            raise InvalidSpec("mismatch_ratio 1 gives matching meshes; set allow_matching=True to request them")

    @property
    def traction(self) -> float:
        if self.traction_magnitude is not None:
            return float(self.traction_magnitude)
        return MODEL_DEFAULT_TRACTION[ModelId.parse(self.model_id)]

    @property
    def slave_resolution(self) -> int:
        if self.slave_elements is not None:
            return int(self.slave_elements)
        return max(1, math.floor(self.resolution * Fraction(self.mismatch_ratio) + Fraction(1, 2)))


MODEL_DEFAULT_TRACTION: Dict[ModelId, float] = {
    ModelId.MODEL1: 10.0,
    ModelId.MODEL2: 10.0,
    ModelId.MODEL3: 1.0,
}


# ---------------------------------------------------------------------------
# Mesh containers
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RectGrid:
    """Parameters of a structured rectangle; enough to regenerate or refine a body."""

    x0: float
    y0: float
    width: float
    height: float
    nx: int
    ny: int
    side_tags: Tuple[Tuple[str, EdgeTag], ...]

    def tag(self, side: str) -> EdgeTag:
        return dict(self.side_tags)[side]


@dataclass(frozen=True, eq=False)
class Body:
    name: str
    nodes: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_tags: Tuple[EdgeTag, ...]
    grid: Optional[RectGrid] = None

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def edges_with(self, kind: TagKind, pair: Optional[int] = None) -> List[int]:
        return [
            e for e, tag in enumerate(self.edge_tags)
            if tag.kind == kind and (pair is None or tag.pair == pair)
        ]

    def tagged_nodes(self, kind: TagKind, pair: Optional[int] = None) -> np.ndarray:
        idx = self.edges_with(kind, pair)
        if not idx:
            return np.empty(0, dtype=np.int64)
        return np.unique(self.edges[idx].ravel())


@dataclass(frozen=True, eq=False)
class MultiBodyMesh:
    bodies: Tuple[Body, ...]
    name: str = ""
    spec: Optional[ContactModelSpec] = None

    @property
    def n_bodies(self) -> int:
        return len(self.bodies)

    @property
    def n_nodes(self) -> int:
        return sum(b.n_nodes for b in self.bodies)

    @property
    def n_triangles(self) -> int:
        return sum(b.n_triangles for b in self.bodies)

    @property
    def node_offsets(self) -> np.ndarray:
        """Global id of the first node of each body (bodies numbered in order)."""
        return np.concatenate([[0], np.cumsum([b.n_nodes for b in self.bodies])]).astype(np.int64)

    @property
    def coordinates(self) -> np.ndarray:
        return np.vstack([b.nodes for b in self.bodies])

    @property
    def pair_ids(self) -> List[int]:
        ids = {tag.pair for b in self.bodies for tag in b.edge_tags if tag.is_interface}
        return sorted(ids)

    def interface_edges(self, kind: TagKind, pair: int) -> np.ndarray:
        """Global-node edges of one interface side, shape (k, 2)."""
        offsets = self.node_offsets
        chunks = [
            b.edges[b.edges_with(kind, pair)] + offsets[i]
            for i, b in enumerate(self.bodies)
            if b.edges_with(kind, pair)
        ]
        if not chunks:
            return np.empty((0, 2), dtype=np.int64)
        return np.vstack(chunks)


# ---------------------------------------------------------------------------
# Structured rectangle
# ---------------------------------------------------------------------------
def rectangle_body(name: str, grid: RectGrid) -> Body:
    nx, ny = grid.nx, grid.ny
    xs = grid.x0 + grid.width * np.arange(nx + 1) / nx
    ys = grid.y0 + grid.height * np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    I, J = np.meshgrid(np.arange(nx), np.arange(ny))
    I, J = I.ravel(), J.ravel()
    a, b, c, d = nid(I, J), nid(I + 1, J), nid(I + 1, J + 1), nid(I, J + 1)
    triangles = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])]).astype(np.int64)

    ix, iy = np.arange(nx), np.arange(ny)
    side_edges = {
        "bottom": np.column_stack([nid(ix, 0), nid(ix + 1, 0)]),
        "right": np.column_stack([nid(nx, iy), nid(nx, iy + 1)]),
        "top": np.column_stack([nid(ix + 1, ny), nid(ix, ny)]),
        "left": np.column_stack([nid(0, iy + 1), nid(0, iy)]),
    }
    tags = dict(grid.side_tags)
    edges, edge_tags = [], []
    for side in SIDES:
        edges.append(side_edges[side])
        edge_tags.extend([tags.get(side, EdgeTag.free())] * side_edges[side].shape[0])
    return Body(
        name=name,
        nodes=nodes,
        triangles=triangles,
        edges=np.vstack(edges).astype(np.int64),
        edge_tags=tuple(edge_tags),
        grid=grid,
    )


def _grid(x0, y0, width, height, per_unit: int, **tags: EdgeTag) -> RectGrid:
    return RectGrid(
        x0=float(x0), y0=float(y0), width=float(width), height=float(height),
        nx=max(1, round(width * per_unit)), ny=max(1, round(height * per_unit)),
        side_tags=tuple((s, tags.get(s, EdgeTag.free())) for s in SIDES),
    )


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------
def generate_model(spec: ContactModelSpec) -> MultiBodyMesh:
    """Build the multi-body mesh of one benchmark model.

    Models 1 and 2 place three unit squares side by side with the master in
    the middle; Model 3 stacks a 1x2 master on top of a 1x2 slave.
    """
    spec.validate()
    model = ModelId.parse(spec.model_id)
    n, ns, p = spec.resolution, spec.slave_resolution, spec.traction

    if model == ModelId.MODEL1:
        grids = [
            ("slave_left", _grid(0, 0, 1, 1, ns, left=EdgeTag.dirichlet(), right=EdgeTag.slave(0))),
            ("master", _grid(1, 0, 1, 1, n, left=EdgeTag.master(0), right=EdgeTag.master(1))),
            ("slave_right", _grid(2, 0, 1, 1, ns, left=EdgeTag.slave(1), right=EdgeTag.neumann(p, 0.0))),
        ]
    elif model == ModelId.MODEL2:
        fixed, load = EdgeTag.dirichlet(), EdgeTag.neumann(0.0, -p)
        grids = [
            ("slave_left", _grid(0, 0, 1, 1, ns, bottom=fixed, top=load, right=EdgeTag.slave(0))),
            ("master", _grid(1, 0, 1, 1, n, bottom=fixed, top=load,
                             left=EdgeTag.master(0), right=EdgeTag.master(1))),
            ("slave_right", _grid(2, 0, 1, 1, ns, bottom=fixed, top=load, left=EdgeTag.slave(1))),
        ]
    else:
        grids = [
            ("slave", _grid(0, 0, 1, 2, ns, bottom=EdgeTag.dirichlet(), top=EdgeTag.slave(0))),
            ("master", _grid(0, 2, 1, 2, n, bottom=EdgeTag.master(0), top=EdgeTag.neumann(0.0, -p))),
        ]

    mesh = MultiBodyMesh(
        bodies=tuple(rectangle_body(name, g) for name, g in grids),
        name=f"{model.value}_r{n}",
        spec=spec,
    )
    logger.info(f"[Mesh] {mesh.name}: {mesh.n_bodies} bodies, {mesh.n_nodes} nodes, "
                f"{mesh.n_triangles} triangles, slave/master per unit length {ns}/{n}")
    return mesh


def conforming_model(spec: ContactModelSpec) -> MultiBodyMesh:
    """Same geometry and loads as ``generate_model`` but meshed as one conforming body.

    Only meaningful for matching interfaces: every body uses ``resolution``
    elements per unit length, so merging the interface nodes gives the mesh
    a glued discretization would have.
    """
    spec.validate()
    model = ModelId.parse(spec.model_id)
    n, p = spec.resolution, spec.traction
    if model == ModelId.MODEL1:
        grid = _grid(0, 0, 3, 1, n, left=EdgeTag.dirichlet(), right=EdgeTag.neumann(p, 0.0))
    elif model == ModelId.MODEL2:
        grid = _grid(0, 0, 3, 1, n, bottom=EdgeTag.dirichlet(), top=EdgeTag.neumann(0.0, -p))
    else:
        grid = _grid(0, 0, 1, 4, n, bottom=EdgeTag.dirichlet(), top=EdgeTag.neumann(0.0, -p))
    return MultiBodyMesh(bodies=(rectangle_body("conforming", grid),), name=f"{model.value}_conforming_r{n}", spec=spec)


def single_body_patch(resolution: int, width: float = 1.0, height: float = 1.0,
                      traction: float = 1.0) -> MultiBodyMesh:
    """Roller-supported rectangle under uniform downward traction on top.

    Bottom edge fixes u_y, left edge fixes u_x, so the exact solution is the
    uniform compression field u = (nu*p*x/E, -p*y/E).
    """
    if resolution < 1:
        raise InvalidSpec(f"resolution must be >= 1, got {resolution}")
    grid = RectGrid(
        x0=0.0, y0=0.0, width=float(width), height=float(height), nx=resolution, ny=resolution,
        side_tags=(
            ("bottom", EdgeTag.dirichlet((1,))),
            ("right", EdgeTag.free()),
            ("top", EdgeTag.neumann(0.0, -traction)),
            ("left", EdgeTag.dirichlet((0,))),
        ),
    )
    return MultiBodyMesh(bodies=(rectangle_body("patch", grid),), name=f"patch_r{resolution}")


def refine(mesh: MultiBodyMesh, factor: int) -> MultiBodyMesh:
    """Uniform refinement: every triangle is split into ``factor**2`` similar ones."""
    if factor < 1:
        raise InvalidSpec(f"refinement factor must be >= 1, got {factor}")
    if factor == 1:
        return mesh
    bodies = []
    for body in mesh.bodies:
        if body.grid is None:
            raise InvalidSpec(f"body {body.name!r} has no structured grid to refine")
        grid = replace(body.grid, nx=body.grid.nx * factor, ny=body.grid.ny * factor)
        bodies.append(rectangle_body(body.name, grid))
    spec = mesh.spec
    if spec is not None:
        spec = replace(spec, resolution=spec.resolution * factor,
                       slave_elements=spec.slave_resolution * factor)
    return MultiBodyMesh(bodies=tuple(bodies), name=f"{mesh.name}_x{factor}", spec=spec)


# ---------------------------------------------------------------------------
# Text export
# ---------------------------------------------------------------------------
def write_mesh_text(mesh: MultiBodyMesh, path: Union[str, Path]) -> Path:
    """Write the mesh in the plain-text format described in docs/MESH_FORMAT.md."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# contact_tlamg mesh v1", f"bodies {mesh.n_bodies}"]
    for body in mesh.bodies:
        lines.append(f"body {body.name} nodes {body.n_nodes} triangles {body.n_triangles} edges {len(body.edge_tags)}")
        lines.extend(f"{x:.17g} {y:.17g}" for x, y in body.nodes)
        lines.extend(f"{a} {b} {c}" for a, b, c in body.triangles)
        for (a, b), tag in zip(body.edges, body.edge_tags):
            pair = "-" if tag.pair is None else str(tag.pair)
            comps = "".join("xy"[c] for c in tag.components) if tag.kind == TagKind.DIRICHLET else "-"
            lines.append(f"{a} {b} {tag.kind.value} {pair} {comps} {tag.traction[0]:.17g} {tag.traction[1]:.17g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"[Mesh] wrote {path}")
    return path


# ---------------------------------------------------------------------------
# Interface geometry
# ---------------------------------------------------------------------------
def line_frame(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Origin and unit direction of the straight line through ``points``.

    The origin is the extreme point with the smallest coordinate along the
    direction, and the direction is oriented so its first non-negligible
    component is positive. Both sides of a contact pair share one frame.
    """
    pts = np.asarray(points, dtype=float)
    center = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - center)
    direction = vt[0]
    lead = np.flatnonzero(np.abs(direction) > 1e-12)[0]
    if direction[lead] < 0:
        direction = -direction
    t = (pts - center) @ direction
    return pts[np.argmin(t)], direction


def interface_frame(mesh: MultiBodyMesh, pair: int) -> Tuple[np.ndarray, np.ndarray]:
    coords = mesh.coordinates
    ids = np.unique(np.concatenate([
        mesh.interface_edges(TagKind.SLAVE_INTERFACE, pair).ravel(),
        mesh.interface_edges(TagKind.MASTER_INTERFACE, pair).ravel(),
    ]))
    if ids.size < 2:
        raise InvalidSpec(f"contact pair {pair} has no interface edges")
    return line_frame(coords[ids])


def interface_chain(mesh: MultiBodyMesh, kind: TagKind, pair: int,
                    frame: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Global node ids of one interface side sorted along the pair's line, with their arclength."""
    if frame is None:
        frame = interface_frame(mesh, pair)
    origin, direction = frame
    ids = np.unique(mesh.interface_edges(kind, pair).ravel())
    t = (mesh.coordinates[ids] - origin) @ direction
    order = np.argsort(t, kind="stable")
    return ids[order], t[order]
