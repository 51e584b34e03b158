"""Triangulated 2D domains with slits, local refinement and tagged boundaries.

Nodes are numbered ``0..n_nodes-1``. Displacement degree of freedom ``2*k+c``
is component ``c`` (0 = x, 1 = y) of node ``k``; phase-field degree of
freedom ``k`` is the nodal value at node ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "GeometryError",
    "Mesh",
    "DofMap",
    "structured_rectangle",
    "unit_square_slit_mesh",
    "lshape_mesh",
    "refine_region",
    "boundary_nodes",
    "boundary_dofs",
    "signed_areas",
]

FIELDS = ("ux", "uy", "phi")


class GeometryError(ValueError):
    """Raised for mesh recipes that do not fit the requested geometry."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable P1 triangle mesh.

    Attributes
    ----------
    nodes : (N, 2) float array
        Coordinates in mm.
    triangles : (E, 3) int array
        Counter-clockwise vertex indices.
    boundary_edges : (B, 2) int array
        Boundary edges oriented along the counter-clockwise traversal of the
        owning triangle, so ``(dy, -dx)`` points outward.
    edge_tags : tuple of str
        One tag per boundary edge.
    levels : (E,) int array
        Refinement level of each triangle.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: tuple
    levels: np.ndarray = field(default=None)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        edges = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        levels = np.zeros(len(tris), dtype=np.int64) if self.levels is None else np.asarray(self.levels, np.int64)
        for arr in (nodes, tris, edges, levels):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary_edges", edges)
        object.__setattr__(self, "edge_tags", tuple(self.edge_tags))
        object.__setattr__(self, "levels", levels)
        if len(self.edge_tags) != len(edges):
            raise GeometryError("one tag per boundary edge required")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def tags(self) -> set:
        return set(self.edge_tags)

    def areas(self) -> np.ndarray:
        return signed_areas(self.nodes, self.triangles)

    def edges_with_tag(self, tag: str) -> np.ndarray:
        if tag not in self.tags:
            raise KeyError(f"unknown boundary tag {tag!r}; known: {sorted(self.tags)}")
        mask = np.array([t == tag for t in self.edge_tags])
        return self.boundary_edges[mask]

    def node_tags(self) -> dict:
        """Map each boundary node to the sorted tuple of tags of its edges."""
        out: dict[int, set] = {}
        for (a, b), t in zip(self.boundary_edges, self.edge_tags):
            out.setdefault(int(a), set()).add(t)
            out.setdefault(int(b), set()).add(t)
        return {k: tuple(sorted(v)) for k, v in out.items()}


def signed_areas(nodes, triangles) -> np.ndarray:
    p = nodes[triangles]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def _boundary_from_topology(triangles: np.ndarray) -> np.ndarray:
    """Edges used by exactly one triangle, in the triangle's orientation."""
    local = np.array([[0, 1], [1, 2], [2, 0]])
    directed = triangles[:, local].reshape(-1, 2)
    keys = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).ravel()
    return directed[counts[inverse] == 1]


def _tag_edges(nodes, edges, classify: Callable) -> tuple:
    tags = []
    for a, b in edges:
        mid = 0.5 * (nodes[a] + nodes[b])
        tags.append(classify(mid, nodes[a], nodes[b]))
    return tuple(tags)


def structured_rectangle(x0, y0, nx, ny, hx, hy):
    """Nodes and triangles of a structured grid, each cell split along one diagonal."""
    xs = x0 + hx * np.arange(nx + 1)
    ys = y0 + hy * np.arange(ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    tris = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    # interleave so that each cell's two triangles are adjacent
    order = np.arange(len(tris)).reshape(2, -1).T.ravel()
    return nodes, tris[order]


def unit_square_slit_mesh(n: int, slit: tuple | None = None) -> Mesh:
    """Structured unit square, optionally with a horizontal slit.

    Parameters
    ----------
    n : int
        Subdivisions per side.
    slit : (y, x_start, x_end), optional
        Horizontal slit. Nodes on the slit are duplicated into lower and upper
        lip copies except the crack-tip end, which lies in the domain interior.
        An end on the domain boundary is the crack mouth and is duplicated.

    Boundary tags are ``Bottom``, ``Top``, ``Left``, ``Right`` and, with a
    slit, ``SlitLower`` and ``SlitUpper``.
    """
    if n < 1:
        raise GeometryError("n must be positive")
    h = 1.0 / n
    nodes, tris = structured_rectangle(0.0, 0.0, n, n, h, h)
    eps = 1e-9
    slit_y = None
    if slit is not None:
        if n < 4 or n % 2:
            raise GeometryError("slit meshes need an even n >= 4")
        slit_y, xs, xe = (float(v) for v in slit)
        if xs > xe:
            xs, xe = xe, xs
        for v in (slit_y, xs, xe):
            if abs(v * n - round(v * n)) > 1e-9:
                raise GeometryError("slit must lie on mesh lines")
        on_line = np.abs(nodes[:, 1] - slit_y) < eps
        inside = on_line & (nodes[:, 0] > xs - eps) & (nodes[:, 0] < xe + eps)
        # the tip is any slit end strictly inside the domain
        for xend in (xs, xe):
            if eps < xend < 1.0 - eps:
                inside &= np.abs(nodes[:, 0] - xend) > eps
        if not inside.any():
            raise GeometryError("slit contains no mesh nodes")
        dup = np.flatnonzero(inside)
        upper = np.arange(len(nodes), len(nodes) + len(dup))
        remap = np.arange(len(nodes))
        remap[dup] = upper
        nodes = np.vstack([nodes, nodes[dup]])
        centroid_y = nodes[tris].mean(axis=1)[:, 1]
        above = centroid_y > slit_y
        tris = np.where(above[:, None], remap[tris], tris)

    edges = _boundary_from_topology(tris)
    owner_above = _edge_owner_above(nodes, tris, edges, slit_y)

    def classify(mid, pa, pb):
        if mid[1] < eps:
            return "Bottom"
        if mid[1] > 1 - eps:
            return "Top"
        if mid[0] < eps:
            return "Left"
        if mid[0] > 1 - eps:
            return "Right"
        return None

    tags = list(_tag_edges(nodes, edges, classify))
    for k, t in enumerate(tags):
        if t is None:
            tags[k] = "SlitUpper" if owner_above[k] else "SlitLower"
    return Mesh(nodes, tris, edges, tuple(tags))


def _edge_owner_above(nodes, tris, edges, line_y):
    if line_y is None:
        return np.zeros(len(edges), dtype=bool)
    # edges are oriented CCW around their owner; the owner lies to the left
    d = nodes[edges[:, 1]] - nodes[edges[:, 0]]
    # left normal of (dx, 0) is (0, dx): owner above when dx > 0
    return d[:, 0] > 0


def lshape_mesh(h: float) -> Mesh:
    """L-shaped panel: ``[0, 500]^2`` minus the quadrant ``[250, 500] x [250, 500]``.

    Each structured quad is split into two triangles. Tags: ``Bottom``,
    ``Left``, ``Top``, ``InnerRight``, ``InnerTop``, ``Right`` and
    ``LoadSegment`` (``470 <= x <= 500`` on ``y = 250``; an edge is tagged when
    it overlaps that interval with positive length).
    """
    if h <= 0:
        raise GeometryError("h must be positive")
    k = 250.0 / h
    if abs(k - round(k)) > 1e-9:
        raise GeometryError("h must divide 250 evenly")
    k = int(round(k))
    nodes, tris = structured_rectangle(0.0, 0.0, 2 * k, 2 * k, h, h)
    centroids = nodes[tris].mean(axis=1)
    keep = ~((centroids[:, 0] > 250.0) & (centroids[:, 1] > 250.0))
    tris = tris[keep]
    used = np.unique(tris)
    renum = -np.ones(len(nodes), dtype=np.int64)
    renum[used] = np.arange(len(used))
    nodes = nodes[used]
    tris = renum[tris]
    edges = _boundary_from_topology(tris)
    e = 1e-9 * 500

    def classify(mid, pa, pb):
        x, y = mid
        if y < e:
            return "Bottom"
        if x < e:
            return "Left"
        if y > 500 - e:
            return "Top"
        if abs(x - 250) < e and y > 250:
            return "InnerRight"
        if abs(y - 250) < e and x > 250:
            lo, hi = sorted((pa[0], pb[0]))
            if min(hi, 500.0) - max(lo, 470.0) > e:
                return "LoadSegment"
            return "InnerTop"
        if x > 500 - e:
            return "Right"
        raise GeometryError(f"unclassified boundary edge at {mid}")

    return Mesh(nodes, tris, edges, _tag_edges(nodes, edges, classify))


def _box_hits(nodes, tris, box):
    xmin, xmax, ymin, ymax = box
    p = nodes[tris]
    lo = p.min(axis=1)
    hi = p.max(axis=1)
    return (hi[:, 0] >= xmin) & (lo[:, 0] <= xmax) & (hi[:, 1] >= ymin) & (lo[:, 1] <= ymax)


def refine_region(mesh: Mesh, box, levels: int) -> Mesh:
    """Refine triangles meeting an axis-aligned box up to a target level.

    Triangles whose bounding box overlaps ``box = (xmin, xmax, ymin, ymax)``
    and whose level is below ``levels`` are split regularly into four
    children. Hanging nodes are closed by regular refinement of neighbours
    with two or more split edges and by bisection of neighbours with exactly
    one. Re-running with the same arguments adds nothing.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    for _ in range(levels):
        mesh = _refine_once(mesh, box, levels)
    return mesh


def _refine_once(mesh: Mesh, box, target: int) -> Mesh:
    nodes = [tuple(p) for p in mesh.nodes]
    tris = mesh.triangles
    red = _box_hits(mesh.nodes, tris, box) & (mesh.levels < target)
    if not red.any():
        return mesh

    def ekey(a, b):
        return (a, b) if a < b else (b, a)

    # closure: any triangle with two or more split edges becomes red
    while True:
        split = set()
        for t in np.flatnonzero(red):
            a, b, c = tris[t]
            split.update((ekey(a, b), ekey(b, c), ekey(c, a)))
        changed = False
        for t in np.flatnonzero(~red):
            a, b, c = tris[t]
            n_split = sum(ekey(*e) in split for e in ((a, b), (b, c), (c, a)))
            if n_split >= 2:
                red[t] = True
                changed = True
        if not changed:
            break

    midpoint: dict = {}

    def mid(a, b):
        k = ekey(a, b)
        if k not in midpoint:
            midpoint[k] = len(nodes)
            pa, pb = mesh.nodes[a], mesh.nodes[b]
            nodes.append(tuple(0.5 * (pa + pb)))
        return midpoint[k]

    new_tris = []
    new_levels = []
    for t, (a, b, c) in enumerate(tris):
        lev = mesh.levels[t]
        if red[t]:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
            new_levels += [lev + 1] * 4
    for t, (a, b, c) in enumerate(tris):
        if red[t]:
            continue
        lev = mesh.levels[t]
        for (p, q, r) in ((a, b, c), (b, c, a), (c, a, b)):
            if ekey(p, q) in midpoint:
                m = midpoint[ekey(p, q)]
                new_tris += [(p, m, r), (m, q, r)]
                new_levels += [lev, lev]
                break
        else:
            new_tris.append((a, b, c))
            new_levels.append(lev)

    new_edges = []
    new_tags = []
    for (a, b), tag in zip(mesh.boundary_edges, mesh.edge_tags):
        k = ekey(a, b)
        if k in midpoint:
            m = midpoint[k]
            new_edges += [(a, m), (m, b)]
            new_tags += [tag, tag]
        else:
            new_edges.append((a, b))
            new_tags.append(tag)
    return Mesh(np.array(nodes), np.array(new_tris), np.array(new_edges), tuple(new_tags), np.array(new_levels))


def boundary_nodes(mesh: Mesh, tag: str) -> np.ndarray:
    return np.unique(mesh.edges_with_tag(tag))


def boundary_dofs(mesh: Mesh, tag: str, field: str) -> np.ndarray:
    """Sorted degree-of-freedom indices of the nodes on edges tagged ``tag``.

    ``field`` is one of ``"ux"``, ``"uy"`` (displacement numbering) or
    ``"phi"`` (phase-field numbering).
    """
    if field not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}")
    nodes = boundary_nodes(mesh, tag)
    if field == "phi":
        return nodes
    return 2 * nodes + (0 if field == "ux" else 1)


@dataclass
class DofMap:
    """Degrees of freedom and Dirichlet data.

    Prescribed displacement values grow linearly with the load step:
    ``u[dirichlet_u] = dirichlet_u_rate * n``. ``tractions`` lists
    ``(tag, (tx, ty))`` Neumann loads per unit length, also scaled by ``n``.
    """

    n_nodes: int
    dirichlet_u: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_u_rate: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dirichlet_phi: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_phi_value: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tractions: list = field(default_factory=list)

    def __post_init__(self):
        self.dirichlet_u = np.asarray(self.dirichlet_u, dtype=np.int64)
        self.dirichlet_u_rate = np.asarray(self.dirichlet_u_rate, dtype=float)
        self.dirichlet_phi = np.asarray(self.dirichlet_phi, dtype=np.int64)
        self.dirichlet_phi_value = np.asarray(self.dirichlet_phi_value, dtype=float)
        for dofs, vals, n in (
            (self.dirichlet_u, self.dirichlet_u_rate, self.n_u),
            (self.dirichlet_phi, self.dirichlet_phi_value, self.n_nodes),
        ):
            if len(dofs) != len(vals):
                raise ValueError("Dirichlet dofs and values differ in length")
            if len(np.unique(dofs)) != len(dofs):
                raise ValueError("duplicate Dirichlet dof")
            if len(dofs) and (dofs.min() < 0 or dofs.max() >= n):
                raise IndexError("Dirichlet dof out of range")

    @property
    def n_u(self) -> int:
        return 2 * self.n_nodes

    def u_values(self, load_step: float) -> np.ndarray:
        return self.dirichlet_u_rate * load_step

    def free_u(self) -> np.ndarray:
        mask = np.ones(self.n_u, dtype=bool)
        mask[self.dirichlet_u] = False
        return mask

    @classmethod
    def from_constraints(cls, mesh: Mesh, constraints) -> "DofMap":
        """Build from ``(tag, field, rate)`` triples.

        Later triples override earlier ones on shared dofs, so list the
        fixed supports last when they must win at corners.
        """
        u_rate: dict[int, float] = {}
        phi_val: dict[int, float] = {}
        for tag, fld, rate in constraints:
            for d in boundary_dofs(mesh, tag, fld):
                if fld == "phi":
                    phi_val[int(d)] = float(rate)
                else:
                    u_rate[int(d)] = float(rate)
        ud = np.array(sorted(u_rate), dtype=np.int64)
        pd = np.array(sorted(phi_val), dtype=np.int64)
        return cls(
            mesh.n_nodes,
            ud,
            np.array([u_rate[d] for d in ud]),
            pd,
            np.array([phi_val[d] for d in pd]),
        )


def write_vtk(path, mesh: Mesh, point_scalars: dict | None = None, point_vectors: dict | None = None,
              title: str = "pfaccel mesh") -> None:
    """Write a legacy ASCII VTK unstructured grid of triangles (cell type 5)."""
    n = mesh.n_nodes
    lines = ["# vtk DataFile Version 2.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {n} double")
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.nodes.tolist()]
    e = mesh.n_triangles
    lines.append(f"CELLS {e} {4 * e}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"CELL_TYPES {e}")
    lines += ["5"] * e
    if point_scalars or point_vectors:
        lines.append(f"POINT_DATA {n}")
    for name, values in (point_scalars or {}).items():
        values = np.asarray(values, dtype=float).ravel()
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [repr(v) for v in values.tolist()]
    for name, values in (point_vectors or {}).items():
        values = np.asarray(values, dtype=float).reshape(n, -1)
        lines.append(f"VECTORS {name} double")
        lines += [f"{r[0]!r} {r[1]!r} {(r[2] if len(r) > 2 else 0.0)!r}" for r in values.tolist()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
