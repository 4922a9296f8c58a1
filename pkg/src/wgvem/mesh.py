"""Polygonal meshes: topology, cell geometry, structured generators and text I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MeshError",
    "CellGeometry",
    "PolygonMesh",
    "build_topology",
    "cell_geometry",
    "signed_area",
    "generate_structured",
    "read_mesh",
    "write_mesh",
    "MESH_KINDS",
]

MESH_KINDS = ("square", "hexagon-dominant", "perturbed-square", "lshape", "triangle")


class MeshError(ValueError):
    """Invalid mesh input (range, orientation, manifoldness, degeneracy)."""


@dataclass(frozen=True)
class CellGeometry:
    area: float
    centroid: np.ndarray
    diameter: float


def signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def cell_geometry(points: np.ndarray) -> CellGeometry:
    """Shoelace area, polygon centroid and diameter (max vertex distance)."""
    points = np.asarray(points, dtype=float)
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if not area > 0.0:
        raise MeshError(f"degenerate or clockwise polygon (signed area {area:.3e})")
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    diff = points[:, None, :] - points[None, :, :]
    diameter = float(np.sqrt((diff**2).sum(axis=-1)).max())
    return CellGeometry(float(area), np.array([cx, cy]), diameter)


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _is_simple(points: np.ndarray) -> bool:
    m = len(points)
    for i in range(m):
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            if _segments_cross(points[i], points[(i + 1) % m], points[j], points[(j + 1) % m]):
                return False
    return True


@dataclass(frozen=True, eq=False)
class PolygonMesh:
    """Vertices, counterclockwise cells and the derived edge topology.

    ``edges[e] = (a, b)`` with ``a < b`` is the canonical orientation; edges are
    sorted lexicographically so the edge list does not depend on cell order.
    ``cell_edges[c][i]`` is the global edge of the local edge from vertex ``i`` to
    vertex ``i + 1`` of cell ``c``. ``edge_cells[e]`` holds one or two incident
    cells (``-1`` marks the missing neighbour of a boundary edge).
    """

    vertices: np.ndarray
    cells: tuple
    edges: np.ndarray
    edge_cells: np.ndarray
    cell_edges: tuple

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary_edges(self) -> np.ndarray:
        return self.edge_cells[:, 1] < 0

    @property
    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edges].ravel()] = True
        return mask

    def cell_points(self, c: int) -> np.ndarray:
        return self.vertices[self.cells[c]]

    def geometry(self, c: int) -> CellGeometry:
        return cell_geometry(self.cell_points(c))

    def max_diameter(self) -> float:
        return max(self.geometry(c).diameter for c in range(self.n_cells))

    def total_area(self) -> float:
        return sum(self.geometry(c).area for c in range(self.n_cells))

    def scaled(self, factor: float) -> "PolygonMesh":
        return build_topology(self.vertices * factor, [list(c) for c in self.cells])


def build_topology(vertices, cells) -> PolygonMesh:
    """Validate a raw mesh and derive its edges and adjacency."""
    vertices = np.array(vertices, dtype=float).reshape(-1, 2)
    nv = len(vertices)
    cell_arrays = []
    for c, cell in enumerate(cells):
        idx = np.asarray(cell, dtype=np.int64)
        if idx.ndim != 1 or len(idx) < 3:
            raise MeshError(f"cell {c} has fewer than 3 vertices")
        if idx.min() < 0 or idx.max() >= nv:
            raise MeshError(f"cell {c} references a vertex index out of range [0, {nv})")
        if len(set(idx.tolist())) != len(idx):
            raise MeshError(f"cell {c} repeats a vertex")
        pts = vertices[idx]
        area = signed_area(pts)
        if area <= 0.0:
            raise MeshError(f"cell {c} is not counterclockwise (signed area {area:.3e})")
        if not _is_simple(pts):
            raise MeshError(f"cell {c} is self-intersecting")
        idx.setflags(write=False)
        cell_arrays.append(idx)

    incidence: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for c, idx in enumerate(cell_arrays):
        m = len(idx)
        for i in range(m):
            a, b = int(idx[i]), int(idx[(i + 1) % m])
            incidence.setdefault((min(a, b), max(a, b)), []).append((c, 1 if a < b else -1))

    keys = sorted(incidence)
    edge_index = {key: e for e, key in enumerate(keys)}
    edge_cells = np.full((len(keys), 2), -1, dtype=np.int64)
    for e, key in enumerate(keys):
        inc = incidence[key]
        if len(inc) > 2:
            raise MeshError(f"non-manifold mesh: edge {key} is shared by {len(inc)} cells")
        if len(inc) == 2 and inc[0][1] == inc[1][1]:
            raise MeshError(
                f"cells {inc[0][0]} and {inc[1][0]} traverse edge {key} in the same direction"
            )
        for j, (c, _) in enumerate(sorted(inc)):
            edge_cells[e, j] = c

    cell_edges = []
    for idx in cell_arrays:
        m = len(idx)
        ce = np.array(
            [edge_index[(min(idx[i], idx[(i + 1) % m]), max(idx[i], idx[(i + 1) % m]))] for i in range(m)],
            dtype=np.int64,
        )
        ce.setflags(write=False)
        cell_edges.append(ce)

    edges = np.array(keys, dtype=np.int64).reshape(-1, 2)
    for arr in (vertices, edges, edge_cells):
        arr.setflags(write=False)
    return PolygonMesh(vertices, tuple(cell_arrays), edges, edge_cells, tuple(cell_edges))


# -- generators -------------------------------------------------------------


def _grid(n: int):
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    return vertices, vid


def _square(n: int) -> PolygonMesh:
    vertices, vid = _grid(n)
    cells = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)] for j in range(n) for i in range(n)]
    return build_topology(vertices, cells)


def _triangle(n: int) -> PolygonMesh:
    vertices, vid = _grid(n)
    cells = []
    for j in range(n):
        for i in range(n):
            cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)])
            cells.append([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return build_topology(vertices, cells)


def _perturbed_square(n: int, seed: int, magnitude: float) -> PolygonMesh:
    if not 0.0 <= magnitude <= 0.2:
        raise ValueError(f"relative perturbation magnitude must lie in [0, 0.2], got {magnitude}")
    vertices, vid = _grid(n)
    rng = np.random.default_rng(seed)
    h = 1.0 / n
    shift = rng.uniform(-1.0, 1.0, size=vertices.shape) * magnitude * h
    on_boundary = np.isclose(vertices, 0.0) | np.isclose(vertices, 1.0)
    interior = ~on_boundary.any(axis=1)
    vertices = vertices.copy()
    vertices[interior] += shift[interior]
    cells = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)] for j in range(n) for i in range(n)]
    for c, cell in enumerate(cells):
        if not _is_convex(vertices[cell]):
            raise MeshError(f"perturbation made cell {c} non-convex; lower the magnitude")
    return build_topology(vertices, cells)


def _is_convex(points: np.ndarray) -> bool:
    d = np.roll(points, -1, axis=0) - points
    cross = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
    return bool(np.all(cross > 0))


def _hexagon_dominant(n: int) -> PolygonMesh:
    # centroid dual of a uniform right-triangle mesh: interior cells are hexagons
    tri_vertices, vid = _grid(n)
    triangles = []
    for j in range(n):
        for i in range(n):
            triangles.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            triangles.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    points: list[np.ndarray] = []
    centroid_id = []
    for tri in triangles:
        centroid_id.append(len(points))
        points.append(tri_vertices[list(tri)].mean(axis=0))

    boundary_edges: dict[tuple[int, int], int] = {}
    edge_count: dict[tuple[int, int], int] = {}
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edge_count[key] = edge_count.get(key, 0) + 1
    for key in sorted(edge_count):
        if edge_count[key] == 1:
            boundary_edges[key] = len(points)
            points.append(tri_vertices[list(key)].mean(axis=0))

    boundary_vertex_id = {}
    for key in boundary_edges:
        for v in key:
            if v not in boundary_vertex_id:
                boundary_vertex_id[v] = None
    for v in sorted(boundary_vertex_id):
        boundary_vertex_id[v] = len(points)
        points.append(tri_vertices[v])

    around: dict[int, list[int]] = {v: [] for v in range(len(tri_vertices))}
    for t, tri in enumerate(triangles):
        for v in tri:
            around[v].append(centroid_id[t])
    for key, pid in boundary_edges.items():
        for v in key:
            around[v].append(pid)
    for v, pid in boundary_vertex_id.items():
        around[v].append(pid)

    points_arr = np.array(points)
    cells = []
    for v in range(len(tri_vertices)):
        ids = around[v]
        center = points_arr[ids].mean(axis=0)
        ang = np.arctan2(points_arr[ids, 1] - center[1], points_arr[ids, 0] - center[0])
        cells.append([ids[i] for i in np.argsort(ang)])
    return build_topology(points_arr, cells)


def _lshape(n: int) -> PolygonMesh:
    m = n + (n % 2)
    vertices, vid = _grid(m)
    cells = []
    for j in range(m):
        for i in range(m):
            if i >= m // 2 and j >= m // 2:
                continue
            cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    used = np.unique(np.concatenate(cells))
    renumber = -np.ones(len(vertices), dtype=np.int64)
    renumber[used] = np.arange(len(used))
    return build_topology(vertices[used], [renumber[c].tolist() for c in cells])


def generate_structured(kind: str, n: int, *, seed: int = 0, magnitude: float = 0.2) -> PolygonMesh:
    """Structured test meshes of the unit square (``lshape``: minus its upper-right quarter).

    ``n`` is the number of subdivisions per side, so the mesh size is about ``1/n``.
    ``perturbed-square`` shifts interior grid vertices by at most ``magnitude * h``
    in each coordinate, with a seeded generator. ``lshape`` rounds ``n`` up to even.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"number of subdivisions must be a positive integer, got {n!r}")
    if kind == "square":
        return _square(n)
    if kind == "triangle":
        return _triangle(n)
    if kind == "perturbed-square":
        return _perturbed_square(n, seed, magnitude)
    if kind == "hexagon-dominant":
        return _hexagon_dominant(n)
    if kind == "lshape":
        return _lshape(n)
    raise ValueError(f"unknown mesh kind {kind!r}; expected one of {MESH_KINDS}")


# -- file format ------------------------------------------------------------

MAGIC = "polymesh"
VERSION = 1


def write_mesh(mesh: PolygonMesh, path) -> None:
    lines = [f"{MAGIC} {VERSION}", f"{mesh.n_vertices} {mesh.n_cells}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [" ".join([str(len(c))] + [str(int(i)) for i in c]) for c in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> PolygonMesh:
    tokens = [line.split() for line in Path(path).read_text().splitlines() if line.strip()]
    if not tokens or tokens[0] != [MAGIC, str(VERSION)]:
        raise MeshError(f"{path}: expected header '{MAGIC} {VERSION}'")
    try:
        nv, nc = (int(t) for t in tokens[1])
    except (IndexError, ValueError):
        raise MeshError(f"{path}: line 2 must be '<nv> <nc>'") from None
    if len(tokens) != 2 + nv + nc:
        raise MeshError(f"{path}: expected {nv} vertex lines and {nc} cell lines")
    try:
        vertices = np.array([[float(a) for a in row] for row in tokens[2 : 2 + nv]])
        cells = []
        for lineno, row in enumerate(tokens[2 + nv :], start=3 + nv):
            m = int(row[0])
            if len(row) != m + 1:
                raise MeshError(f"{path}:{lineno}: cell declares {m} vertices, lists {len(row) - 1}")
            cells.append([int(a) for a in row[1:]])
    except ValueError as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"{path}: malformed number ({exc})") from None
    if vertices.shape != (nv, 2):
        raise MeshError(f"{path}: vertex lines must hold two coordinates")
    return build_topology(vertices, cells)
