"""Polytopal meshes of 1d intervals and 2d polygonal domains.

A mesh stores vertices, cells (vertex loops, counterclockwise in 2d) and the
faces derived from them: edges in 2d, points in 1d.  Interfaces carry both
adjacent cells with one outward unit normal per side; boundary faces carry
one.  Instances are immutable after construction and all coordinate arrays
are marked read-only.

Deterministic builders are provided for the domains used in the convergence
studies: the unit interval, the unit square (quadrilateral, triangular and
hexagonal versions), an L-shaped domain with a reentrant corner, and a
polygonal approximation of the unit disk.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .quadrature import polygon_area_centroid

_DEDUP_TOL = 1e-12


@dataclass(frozen=True)
class Cell:
    """One mesh cell: vertex loop, incident faces and basic geometry."""

    vertices: np.ndarray
    faces: np.ndarray
    measure: float
    centroid: np.ndarray
    diameter: float


@dataclass(frozen=True)
class Face:
    """One mesh face with its adjacency and per-side outward normals."""

    vertices: np.ndarray
    cells: tuple
    normals: np.ndarray
    measure: float
    center: np.ndarray
    diameter: float

    @property
    def is_boundary(self) -> bool:
        return len(self.cells) == 1


@dataclass(frozen=True)
class PolytopalMesh:
    """Conforming polytopal mesh of dimension 1 or 2."""

    dim: int
    vertices: np.ndarray
    cells: list = field(default_factory=list)
    faces: list = field(default_factory=list)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def max_diameter(self) -> float:
        """Mesh size: the largest cell diameter."""
        return max(c.diameter for c in self.cells)

    @property
    def total_measure(self) -> float:
        return float(sum(c.measure for c in self.cells))

    def interfaces(self):
        return [i for i, f in enumerate(self.faces) if not f.is_boundary]

    def boundary_faces(self):
        return [i for i, f in enumerate(self.faces) if f.is_boundary]

    def cell_vertex_coords(self, c: int) -> np.ndarray:
        return self.vertices[self.cells[c].vertices]

    def face_vertex_coords(self, f: int) -> np.ndarray:
        return self.vertices[self.faces[f].vertices]

    @classmethod
    def from_cells(cls, dim, vertices, cell_vertex_lists, expected_measure=None):
        """Build and validate a mesh from vertices and cell vertex loops.

        Parameters
        ----------
        dim : int
            Topological dimension, 1 or 2.
        vertices : array_like
            Coordinates, shape ``(n_vertices, dim)``.
        cell_vertex_lists : sequence of sequence of int
            One vertex loop per cell; counterclockwise in 2d.
        expected_measure : float, optional
            Known domain measure; the summed cell measures must match it to a
            relative 1e-12 or construction fails.
        """
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != dim:
            raise ValueError(f"vertex array must have shape (n, {dim})")
        if dim not in (1, 2):
            raise ValueError(f"unsupported dimension {dim}")
        if not np.all(np.isfinite(verts)):
            raise ValueError("vertex coordinates must be finite")
        if len(cell_vertex_lists) == 0:
            raise ValueError("mesh needs at least one cell")
        _check_distinct_vertices(verts)

        if dim == 1:
            cells, faces = _build_1d(verts, cell_vertex_lists)
        else:
            cells, faces = _build_2d(verts, cell_vertex_lists)

        used = np.zeros(verts.shape[0], dtype=bool)
        for c in cells:
            used[c.vertices] = True
        if not used.all():
            raise ValueError("mesh has vertices not referenced by any cell")

        mesh = cls(dim=dim, vertices=verts, cells=cells, faces=faces)
        verts.flags.writeable = False
        if expected_measure is not None:
            total = mesh.total_measure
            if abs(total - expected_measure) > 1e-12 * abs(expected_measure):
                raise ValueError(
                    f"cell measures sum to {total!r}, expected {expected_measure!r}")
        return mesh


def _check_distinct_vertices(verts: np.ndarray):
    if verts.shape[0] < 2:
        return
    tree = cKDTree(verts)
    pairs = tree.query_pairs(r=_DEDUP_TOL)
    if pairs:
        a, b = sorted(pairs)[0]
        raise ValueError(f"duplicate vertices {a} and {b} (closer than {_DEDUP_TOL})")


def _build_1d(verts, cell_vertex_lists):
    x = verts[:, 0]
    cell_pairs = []
    for raw in cell_vertex_lists:
        vs = [int(v) for v in raw]
        if len(vs) != 2:
            raise ValueError("a 1d cell is a pair of vertex indices")
        _check_index_range(vs, verts.shape[0])
        a, b = vs
        if a == b:
            raise ValueError("degenerate 1d cell (repeated vertex)")
        if x[a] > x[b]:
            a, b = b, a
        cell_pairs.append((a, b))

    # Point faces, one per referenced vertex, indexed in vertex order.
    face_of_vertex = {}
    adjacency = {}
    for ci, (a, b) in enumerate(cell_pairs):
        for v, normal in ((a, -1.0), (b, 1.0)):
            face_of_vertex.setdefault(v, None)
            adjacency.setdefault(v, []).append((ci, normal))
    for fi, v in enumerate(sorted(face_of_vertex)):
        face_of_vertex[v] = fi

    cells = []
    for a, b in cell_pairs:
        length = x[b] - x[a]
        cells.append(Cell(
            vertices=_frozen_int([a, b]),
            faces=_frozen_int([face_of_vertex[a], face_of_vertex[b]]),
            measure=float(length),
            centroid=_frozen(0.5 * (verts[a] + verts[b])),
            diameter=float(length),
        ))

    faces = []
    for v in sorted(face_of_vertex):
        adj = adjacency[v]
        if len(adj) > 2:
            raise ValueError(f"vertex {v} is shared by more than two 1d cells")
        if len(adj) == 2 and adj[0][1] == adj[1][1]:
            raise ValueError(f"overlapping 1d cells at vertex {v}")
        cell_ids = tuple(ci for ci, _ in adj)
        normals = np.array([[n] for _, n in adj])
        # Convention for point faces: unit measure, and the face "diameter"
        # is the largest adjacent cell diameter (points have none of their own).
        diam = max(x[max(cell_pairs[ci])] - x[min(cell_pairs[ci])] for ci in cell_ids)
        faces.append(Face(
            vertices=_frozen_int([v]),
            cells=cell_ids,
            normals=_frozen(normals),
            measure=1.0,
            center=_frozen(verts[v]),
            diameter=float(diam),
        ))
    return cells, faces


def _build_2d(verts, cell_vertex_lists):
    loops = []
    for raw in cell_vertex_lists:
        vs = [int(v) for v in raw]
        if len(vs) < 3:
            raise ValueError("a 2d cell needs at least three vertices")
        _check_index_range(vs, verts.shape[0])
        if len(set(vs)) != len(vs):
            raise ValueError("cell loop repeats a vertex (non-closed polygon)")
        loops.append(vs)

    edge_index = {}
    edge_list = []
    edge_adjacency = []
    cells = []
    for ci, vs in enumerate(loops):
        coords = verts[vs]
        try:
            area, centroid = polygon_area_centroid(coords)
        except ValueError as exc:
            raise ValueError(f"cell {ci}: {exc}") from exc
        diam = _point_set_diameter(coords)
        face_ids = []
        m = len(vs)
        for j in range(m):
            a, b = vs[j], vs[(j + 1) % m]
            key = (a, b) if a < b else (b, a)
            if key not in edge_index:
                edge_index[key] = len(edge_list)
                edge_list.append(key)
                edge_adjacency.append([])
            fid = edge_index[key]
            tangent = verts[b] - verts[a]
            length = float(np.linalg.norm(tangent))
            if length <= _DEDUP_TOL:
                raise ValueError(f"cell {ci}: zero-length edge")
            normal = np.array([tangent[1], -tangent[0]]) / length
            edge_adjacency[fid].append((ci, normal))
            face_ids.append(fid)
        cells.append(Cell(
            vertices=_frozen_int(vs),
            faces=_frozen_int(face_ids),
            measure=float(area),
            centroid=_frozen(centroid),
            diameter=diam,
        ))

    faces = []
    for fid, (a, b) in enumerate(edge_list):
        adj = edge_adjacency[fid]
        if len(adj) > 2:
            raise ValueError(f"edge ({a}, {b}) is shared by more than two cells")
        if len(adj) == 2:
            n0, n1 = adj[0][1], adj[1][1]
            if np.linalg.norm(n0 + n1) > 1e-12:
                raise ValueError(
                    f"edge ({a}, {b}): adjacent cells traverse it in the same "
                    "direction (inconsistent orientation)")
        length = float(np.linalg.norm(verts[b] - verts[a]))
        faces.append(Face(
            vertices=_frozen_int([a, b]),
            cells=tuple(ci for ci, _ in adj),
            normals=_frozen(np.array([n for _, n in adj])),
            measure=length,
            center=_frozen(0.5 * (verts[a] + verts[b])),
            diameter=length,
        ))
    return cells, faces


def _check_index_range(vs, n):
    for v in vs:
        if v < 0 or v >= n:
            raise ValueError(f"vertex index {v} out of range (0..{n - 1})")


def _point_set_diameter(coords: np.ndarray) -> float:
    d = coords[:, None, :] - coords[None, :, :]
    return float(np.sqrt((d ** 2).sum(axis=2).max()))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


def _frozen_int(a) -> np.ndarray:
    arr = np.array(a, dtype=np.int64)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# builders


def build_uniform_interval(n: int) -> PolytopalMesh:
    """Uniform mesh of (0, 1) with ``n`` cells."""
    if n < 1:
        raise ValueError("need at least one cell")
    verts = (np.arange(n + 1) / n)[:, None]
    cells = [(i, i + 1) for i in range(n)]
    return PolytopalMesh.from_cells(1, verts, cells, expected_measure=1.0)


def build_uniform_square(n: int) -> PolytopalMesh:
    """Mesh of the unit square by ``n x n`` axis-aligned quadrilaterals."""
    if n < 1:
        raise ValueError("need at least one cell per direction")
    xs = np.arange(n + 1) / n
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    verts = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    cells = []
    for i in range(n):
        for j in range(n):
            cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return PolytopalMesh.from_cells(2, verts, cells, expected_measure=1.0)


def build_triangular_square(n: int, origin=(0.0, 0.0), width: float = 1.0) -> PolytopalMesh:
    """Mesh of a square by ``2 n^2`` right triangles.

    Every subsquare is split along the diagonal from its lower-left to its
    upper-right corner, so refining with :func:`refine_uniform` reproduces the
    mesh built with ``2 n``.
    """
    verts, cells = _triangular_square_arrays(n, origin, width)
    return PolytopalMesh.from_cells(2, verts, cells, expected_measure=width ** 2)


def _triangular_square_arrays(n, origin, width):
    if n < 1:
        raise ValueError("need at least one cell per direction")
    ox, oy = float(origin[0]), float(origin[1])
    xs = ox + width * np.arange(n + 1) / n
    ys = oy + width * np.arange(n + 1) / n
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    cells = []
    for i in range(n):
        for j in range(n):
            ll, lr = vid(i, j), vid(i + 1, j)
            ul, ur = vid(i, j + 1), vid(i + 1, j + 1)
            cells.append([ll, lr, ur])
            cells.append([ll, ur, ul])
    return verts, cells


def build_lshape(n: int) -> PolytopalMesh:
    """Triangular mesh of the L-shaped domain (0,2)^2 minus [1,2]^2.

    Each of the three unit squares carries ``2 n^2`` right triangles split
    along the same diagonal direction; the reentrant corner sits at (1, 1).
    """
    if n < 1:
        raise ValueError("need at least one cell per direction")
    m = 2 * n
    keep = np.zeros((m + 1, m + 1), dtype=bool)
    for i in range(m + 1):
        for j in range(m + 1):
            keep[i, j] = i <= n or j <= n
    index = -np.ones((m + 1, m + 1), dtype=int)
    coords = []
    for i in range(m + 1):
        for j in range(m + 1):
            if keep[i, j]:
                index[i, j] = len(coords)
                coords.append((2.0 * i / m, 2.0 * j / m))
    verts = np.array(coords)

    cells = []
    for i in range(m):
        for j in range(m):
            if i >= n and j >= n:
                continue
            ll, lr = index[i, j], index[i + 1, j]
            ul, ur = index[i, j + 1], index[i + 1, j + 1]
            cells.append([ll, lr, ur])
            cells.append([ll, ur, ul])
    return PolytopalMesh.from_cells(2, verts, cells, expected_measure=3.0)


_HEX_BASE_RADIUS = 0.1  # center-to-vertex radius of the level-0 hexagons


def build_hexagonal(level: int) -> PolytopalMesh:
    """Mesh of the unit square by regular hexagons clipped at the boundary.

    The lattice is centered on the square and its side halves with each
    ``level`` increment, so the mesh size halves as well.  Cells crossing the
    boundary are clipped to the square, producing convex polygons with three
    to seven vertices along the border.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    s = _HEX_BASE_RADIUS / 2 ** level
    dx = 1.5 * s
    dy = math.sqrt(3.0) * s
    angles = np.arange(6) * (math.pi / 3.0)
    corner_x = s * np.cos(angles)
    corner_y = s * np.sin(angles)

    imax = int(math.ceil((0.5 + 2 * s) / dx))
    jmax = int(math.ceil((0.5 + 2 * s) / dy)) + 1
    polygons = []
    for i in range(-imax, imax + 1):
        cx = 0.5 + i * dx
        y0 = 0.5 + (0.5 * dy if i % 2 else 0.0)
        for j in range(-jmax, jmax + 1):
            cy = y0 + j * dy
            poly = np.column_stack([cx + corner_x, cy + corner_y])
            clipped = _clip_to_unit_square(poly, snap_tol=1e-9)
            if clipped is not None:
                polygons.append(clipped)
    return _mesh_from_polygons(polygons, expected_measure=1.0, merge_tol=1e-9 * s)


def _clip_to_unit_square(poly: np.ndarray, snap_tol: float):
    """Sutherland-Hodgman clip of a convex CCW polygon to [0,1]^2.

    Coordinates within ``snap_tol`` of the square's edges are snapped onto
    them first, so grazing lattice vertices cannot generate micro-edges.
    Returns ``None`` when the intersection is empty or degenerate.
    """
    pts = poly.copy()
    for v in (0.0, 1.0):
        for axis in (0, 1):
            near = np.abs(pts[:, axis] - v) <= snap_tol
            pts[near, axis] = v
    # Half-planes: x >= 0, x <= 1, y >= 0, y <= 1 as (axis, sign, value).
    for axis, sign, value in ((0, 1, 0.0), (0, -1, 1.0), (1, 1, 0.0), (1, -1, 1.0)):
        if pts.shape[0] == 0:
            return None
        out = []
        m = pts.shape[0]
        dist = sign * (pts[:, axis] - value)
        for i in range(m):
            p, q = pts[i], pts[(i + 1) % m]
            dp, dq = dist[i], dist[(i + 1) % m]
            if dq >= 0.0:
                if dp < 0.0:
                    out.append(_edge_plane_intersection(p, q, dp, dq))
                out.append(q)
            elif dp >= 0.0:
                out.append(_edge_plane_intersection(p, q, dp, dq))
        pts = np.array(out) if out else np.empty((0, 2))
        if pts.shape[0] >= 3:
            keep = [0]
            for i in range(1, pts.shape[0]):
                if np.linalg.norm(pts[i] - pts[keep[-1]]) > 1e-12:
                    keep.append(i)
            if np.linalg.norm(pts[keep[-1]] - pts[keep[0]]) <= 1e-12:
                keep.pop()
            pts = pts[keep]
        dist = None
    if pts.shape[0] < 3:
        return None
    area = 0.5 * abs(np.sum(pts[:, 0] * np.roll(pts[:, 1], -1)
                            - np.roll(pts[:, 0], -1) * pts[:, 1]))
    if area < 1e-12:
        return None
    return pts


def _edge_plane_intersection(p, q, dp, dq):
    t = dp / (dp - dq)
    return p + t * (q - p)


def _mesh_from_polygons(polygons, expected_measure=None, merge_tol=1e-9):
    """Assemble a conforming mesh from a soup of CCW polygons.

    Vertices within ``merge_tol`` of each other are identified (union-find
    over KD-tree pairs), which glues the shared edges of neighboring clipped
    cells back together.
    """
    all_pts = np.vstack(polygons)
    tree = cKDTree(all_pts)
    parent = np.arange(all_pts.shape[0])

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in sorted(tree.query_pairs(r=merge_tol)):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    rep_index = {}
    verts = []
    global_id = np.empty(all_pts.shape[0], dtype=int)
    for i in range(all_pts.shape[0]):
        r = find(i)
        if r not in rep_index:
            rep_index[r] = len(verts)
            verts.append(all_pts[r])
        global_id[i] = rep_index[r]

    cells = []
    offset = 0
    for poly in polygons:
        m = poly.shape[0]
        ids = [int(global_id[offset + j]) for j in range(m)]
        offset += m
        dedup = [ids[0]]
        for v in ids[1:]:
            if v != dedup[-1]:
                dedup.append(v)
        if dedup[-1] == dedup[0]:
            dedup.pop()
        if len(dedup) >= 3:
            cells.append(dedup)
    return PolytopalMesh.from_cells(2, np.array(verts), cells,
                                    expected_measure=expected_measure)


_DISK_BASE_SIDES = 16  # boundary vertex count of the level-0 inscribed polygon


def build_disk(level: int) -> PolytopalMesh:
    """Triangular mesh of the regular polygon inscribed in the unit circle.

    Level 0 is the fan triangulation of a regular 16-gon from the origin.
    Each level refines every triangle into four and pushes the new boundary
    midpoints radially onto the circle, doubling the boundary vertex count,
    so the meshed polygon converges to the disk with measure error O(h^2).
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    m0 = _DISK_BASE_SIDES
    ang = 2.0 * math.pi * np.arange(m0) / m0
    verts = np.vstack([[0.0, 0.0], np.column_stack([np.cos(ang), np.sin(ang)])])
    cells = [[0, 1 + i, 1 + (i + 1) % m0] for i in range(m0)]
    mesh = PolytopalMesh.from_cells(2, verts, cells,
                                    expected_measure=_inscribed_polygon_area(m0))
    for lev in range(level):
        sides = m0 * 2 ** (lev + 1)
        mesh = _refine_triangles(mesh, boundary_projection=_unit_circle_projection,
                                 expected_measure=_inscribed_polygon_area(sides))
    return mesh


def _inscribed_polygon_area(sides: int) -> float:
    return 0.5 * sides * math.sin(2.0 * math.pi / sides)


def _unit_circle_projection(p: np.ndarray) -> np.ndarray:
    return p / np.linalg.norm(p)


def refine_uniform(mesh: PolytopalMesh) -> PolytopalMesh:
    """Refine every cell uniformly: segments split in two, triangles in four.

    Only simplicial meshes are supported in 2d; quadrilateral or polygonal
    cells raise ``ValueError``.
    """
    if mesh.dim == 1:
        x = mesh.vertices[:, 0]
        new_pts = [mesh.vertices]
        mids = {}
        for ci, cell in enumerate(mesh.cells):
            a, b = (int(v) for v in cell.vertices)
            mids[ci] = mesh.n_vertices + ci
            new_pts.append([[0.5 * (x[a] + x[b])]])
        verts = np.vstack(new_pts)
        cells = []
        for ci, cell in enumerate(mesh.cells):
            a, b = (int(v) for v in cell.vertices)
            cells.append((a, mids[ci]))
            cells.append((mids[ci], b))
        return PolytopalMesh.from_cells(1, verts, cells,
                                        expected_measure=mesh.total_measure)
    return _refine_triangles(mesh, boundary_projection=None,
                             expected_measure=mesh.total_measure)


def _refine_triangles(mesh, boundary_projection=None, expected_measure=None):
    for cell in mesh.cells:
        if cell.vertices.shape[0] != 3:
            raise ValueError("uniform refinement supports triangular cells only")
    n_old = mesh.n_vertices
    mid_coords = np.empty((mesh.n_faces, 2))
    for fi, f in enumerate(mesh.faces):
        a, b = (int(v) for v in f.vertices)
        p = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        if boundary_projection is not None and f.is_boundary:
            p = boundary_projection(p)
        mid_coords[fi] = p
    verts = np.vstack([mesh.vertices, mid_coords])

    cells = []
    for cell in mesh.cells:
        a, b, c = (int(v) for v in cell.vertices)
        fab, fbc, fca = (n_old + int(f) for f in cell.faces)
        cells.append([a, fab, fca])
        cells.append([b, fbc, fab])
        cells.append([c, fca, fbc])
        cells.append([fab, fbc, fca])
    return PolytopalMesh.from_cells(2, verts, cells, expected_measure=expected_measure)


# ---------------------------------------------------------------------------
# serialization


def save_mesh(mesh: PolytopalMesh, path) -> None:
    """Write a mesh as JSON ``{"dim", "vertices", "cells"}``."""
    payload = {
        "dim": mesh.dim,
        "vertices": [[float(x) for x in row] for row in mesh.vertices],
        "cells": [[int(v) for v in c.vertices] for c in mesh.cells],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_mesh(path) -> PolytopalMesh:
    """Load a mesh saved by :func:`save_mesh`, revalidating everything."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed mesh file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError(f"malformed mesh file {path}: expected a JSON object")
    for key in ("dim", "vertices", "cells"):
        if key not in payload:
            raise ValueError(f"malformed mesh file {path}: missing key {key!r}")
    dim = payload["dim"]
    if dim not in (1, 2):
        raise ValueError(f"malformed mesh file {path}: dim must be 1 or 2")
    verts = np.asarray(payload["vertices"], dtype=float)
    if verts.ndim != 2 or verts.shape[1] != dim:
        raise ValueError(f"malformed mesh file {path}: vertex rows must have {dim} entries")
    return PolytopalMesh.from_cells(dim, verts, payload["cells"])
