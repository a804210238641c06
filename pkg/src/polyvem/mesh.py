"""Conforming polygonal meshes: storage, validation, I/O and structured generators."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for unparsable, degenerate or non-conforming meshes."""


def signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class Edge:
    start: np.ndarray
    end: np.ndarray
    normal: np.ndarray  # unit outward normal
    length: float


@dataclass(frozen=True)
class ElementGeometry:
    vertices: np.ndarray  # (m, 2), counter-clockwise
    area: float
    centroid: np.ndarray
    diameter: float
    edges: tuple[Edge, ...]

    @property
    def m(self) -> int:
        return len(self.edges)


def polygon_geometry(vertices: np.ndarray) -> ElementGeometry:
    pts = np.asarray(vertices, dtype=float)
    area = signed_area(pts)
    nxt = np.roll(pts, -1, axis=0)
    cross = pts[:, 0] * nxt[:, 1] - nxt[:, 0] * pts[:, 1]
    centroid = np.array([
        np.sum((pts[:, 0] + nxt[:, 0]) * cross),
        np.sum((pts[:, 1] + nxt[:, 1]) * cross),
    ]) / (6.0 * area)
    diff = pts[:, None, :] - pts[None, :, :]
    diameter = float(np.sqrt((diff ** 2).sum(-1)).max())
    edges = []
    for a, b in zip(pts, nxt):
        t = b - a
        length = float(np.hypot(*t))
        edges.append(Edge(a.copy(), b.copy(), np.array([t[1], -t[0]]) / length, length))
    return ElementGeometry(pts, area, centroid, diameter, tuple(edges))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PolygonalMesh:
    """Polygonal mesh with CCW cells and tagged boundary edges.

    ``boundary_tags`` maps a tag to a tuple of ``(i, j)`` vertex pairs, each
    oriented as traversed by its (single) incident cell.
    """

    vertices: np.ndarray
    cells: tuple[tuple[int, ...], ...]
    boundary_tags: dict[str, tuple[tuple[int, int], ...]] = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_vertices(self, cell: int) -> np.ndarray:
        return self.vertices[list(self.cells[cell])]

    def element_geometry(self, cell: int) -> ElementGeometry:
        if not 0 <= cell < self.n_cells:
            raise IndexError(f"cell index {cell} out of range [0, {self.n_cells})")
        return polygon_geometry(self.cell_vertices(cell))

    def edges(self) -> dict[tuple[int, int], list[int]]:
        """Undirected edge (sorted vertex pair) -> incident cells."""
        out: dict[tuple[int, int], list[int]] = {}
        for c, loop in enumerate(self.cells):
            for a, b in zip(loop, loop[1:] + loop[:1]):
                out.setdefault((min(a, b), max(a, b)), []).append(c)
        return out

    def boundary_edges(self) -> list[tuple[int, int]]:
        """Boundary edges oriented along their cell's CCW loop."""
        inc = self.edges()
        out = []
        for loop in self.cells:
            for a, b in zip(loop, loop[1:] + loop[:1]):
                if len(inc[(min(a, b), max(a, b))]) == 1:
                    out.append((a, b))
        return out

    def tag_of(self) -> dict[tuple[int, int], str]:
        return {
            (min(i, j), max(i, j)): tag
            for tag, edges in self.boundary_tags.items()
            for i, j in edges
        }

    def total_area(self) -> float:
        return sum(signed_area(self.cell_vertices(c)) for c in range(self.n_cells))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def non_convex_cells(self) -> list[int]:
        bad = []
        for c in range(self.n_cells):
            p = self.cell_vertices(c)
            d1 = np.roll(p, -1, axis=0) - p
            d2 = np.roll(d1, -1, axis=0)
            if np.any(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0):
                bad.append(c)
        return bad

    def to_dict(self) -> dict:
        return {
            "vertices": [[float(x), float(y)] for x, y in self.vertices],
            "cells": [list(map(int, c)) for c in self.cells],
            "boundary_tags": {t: [[int(i), int(j)] for i, j in e] for t, e in self.boundary_tags.items()},
        }


def build_mesh(vertices, cells, boundary_tags=None, default_tag: str = "boundary") -> PolygonalMesh:
    """Validate raw data and return a mesh; CW cells are re-oriented.

    Untagged boundary edges receive ``default_tag``.
    """
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise MeshError(f"vertices must be an (n, 2) array, got shape {verts.shape}")
    if not np.all(np.isfinite(verts)):
        raise MeshError("non-finite vertex coordinates")
    nv = len(verts)
    diam = float(np.ptp(verts, axis=0).max()) if nv else 0.0

    loops = []
    for c, raw in enumerate(cells):
        loop = tuple(int(i) for i in raw)
        if len(loop) < 3:
            raise MeshError(f"cell {c} has fewer than 3 vertices")
        if len(set(loop)) != len(loop):
            raise MeshError(f"cell {c} repeats a vertex")
        if min(loop) < 0 or max(loop) >= nv:
            raise MeshError(f"cell {c} references a vertex outside [0, {nv})")
        a = signed_area(verts[list(loop)])
        if abs(a) <= 1e-14 * diam * diam:
            raise MeshError(f"degenerate (zero-area) cell {c}")
        if a < 0:
            loop = loop[::-1]
        loops.append(loop)

    _check_duplicates(verts, 1e-12 * diam)

    directed: dict[tuple[int, int], int] = {}
    for c, loop in enumerate(loops):
        for a, b in zip(loop, loop[1:] + loop[:1]):
            if (a, b) in directed:
                raise MeshError(
                    f"non-conforming mesh: edge ({a}, {b}) traversed in the same direction "
                    f"by cells {directed[(a, b)]} and {c}")
            directed[(a, b)] = c
    boundary = [(a, b) for (a, b) in directed if (b, a) not in directed]
    _check_hanging_nodes(verts, boundary, 1e-10 * max(diam, 1e-300))

    given = boundary_tags or {}
    bset = {(min(a, b), max(a, b)): (a, b) for a, b in boundary}
    tags: dict[str, list[tuple[int, int]]] = {}
    seen: dict[tuple[int, int], str] = {}
    for tag, edges in given.items():
        for i, j in edges:
            key = (min(int(i), int(j)), max(int(i), int(j)))
            if key not in bset:
                raise MeshError(f"tag {tag!r} lists ({i}, {j}) which is not a boundary edge")
            if key in seen:
                raise MeshError(f"boundary edge {key} carries two tags: {seen[key]!r} and {tag!r}")
            seen[key] = tag
            tags.setdefault(tag, []).append(bset[key])
    for key, oriented in bset.items():
        if key not in seen:
            tags.setdefault(default_tag, []).append(oriented)

    return PolygonalMesh(
        _freeze(verts),
        tuple(loops),
        {t: tuple(e) for t, e in tags.items()},
    )


def _check_duplicates(verts: np.ndarray, tol: float) -> None:
    if len(verts) < 2:
        return
    order = np.lexsort((verts[:, 1], verts[:, 0]))
    s = verts[order]
    for i in range(len(s) - 1):
        j = i + 1
        while j < len(s) and s[j, 0] - s[i, 0] <= tol:
            if abs(s[j, 1] - s[i, 1]) <= tol:
                raise MeshError(f"duplicate vertices {order[i]} and {order[j]}")
            j += 1


def _check_hanging_nodes(verts: np.ndarray, boundary, tol: float) -> None:
    for a, b in boundary:
        p, q = verts[a], verts[b]
        t = q - p
        L2 = float(t @ t)
        rel = verts - p
        s = rel @ t / L2
        dist = np.abs(rel[:, 0] * t[1] - rel[:, 1] * t[0]) / math.sqrt(L2)
        hit = (s > 1e-9) & (s < 1 - 1e-9) & (dist <= tol)
        hit[[a, b]] = False
        if np.any(hit):
            v = int(np.flatnonzero(hit)[0])
            raise MeshError(f"non-conforming mesh: vertex {v} hangs on edge ({a}, {b})")


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def load_mesh(path, format: str = "native-json") -> PolygonalMesh:
    path = Path(path)
    text = path.read_text()
    if format == "native-json":
        try:
            doc = json.loads(text)
            return build_mesh(doc["vertices"], doc["cells"], doc.get("boundary_tags"))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MeshError(f"cannot parse {path}: {exc}") from exc
    if format == "obj-like":
        return _parse_obj(text, path)
    raise MeshError(f"unknown mesh format {format!r}")


def _parse_obj(text: str, path) -> PolygonalMesh:
    # Boundary tags: a "g <tag>" line followed by "l i j" segments.
    verts, cells, tags = [], [], {}
    group = None
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        try:
            if parts[0] == "v":
                verts.append([float(parts[1]), float(parts[2])])
            elif parts[0] == "f":
                cells.append([int(p.split("/")[0]) - 1 for p in parts[1:]])
            elif parts[0] == "g":
                group = parts[1] if len(parts) > 1 else None
            elif parts[0] == "l":
                if group is None:
                    raise MeshError(f"{path}:{lineno}: segment outside a named group")
                ids = [int(p) - 1 for p in parts[1:]]
                tags.setdefault(group, []).extend(zip(ids, ids[1:]))
        except (IndexError, ValueError) as exc:
            raise MeshError(f"{path}:{lineno}: cannot parse {line!r}") from exc
    return build_mesh(verts, cells, tags)


def save_mesh(mesh: PolygonalMesh, path, extra: dict | None = None) -> None:
    doc = mesh.to_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc))


# ---------------------------------------------------------------------------
# Structured generators
# ---------------------------------------------------------------------------

class _GridBuilder:
    """Accumulates vertices keyed by logical ids so blocks share nodes."""

    def __init__(self):
        self.points: list[tuple[float, float]] = []
        self.index: dict = {}
        self.cells: list[tuple[int, ...]] = []
        self.tags: dict[str, list[tuple[int, int]]] = {}

    def node(self, key, xy) -> int:
        if key not in self.index:
            self.index[key] = len(self.points)
            self.points.append((float(xy[0]), float(xy[1])))
        return self.index[key]

    def tag(self, name, a, b):
        self.tags.setdefault(name, []).append((a, b))

    def build(self) -> PolygonalMesh:
        return build_mesh(self.points, self.cells, self.tags)


def generate_rectangle_quads(lx: float, ly: float, nx: int, ny: int,
                             origin=(0.0, 0.0)) -> PolygonalMesh:
    """Structured quads on a rectangle; tags ``bottom``, ``right``, ``top``, ``left``."""
    if lx <= 0 or ly <= 0 or nx < 1 or ny < 1:
        raise MeshError("rectangle needs positive sizes and at least one division")
    g = _GridBuilder()
    x0, y0 = origin
    ids = [[g.node((i, j), (x0 + lx * i / nx, y0 + ly * j / ny)) for j in range(ny + 1)]
           for i in range(nx + 1)]
    for i in range(nx):
        for j in range(ny):
            g.cells.append((ids[i][j], ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]))
    for i in range(nx):
        g.tag("bottom", ids[i][0], ids[i + 1][0])
        g.tag("top", ids[i + 1][ny], ids[i][ny])
    for j in range(ny):
        g.tag("right", ids[nx][j], ids[nx][j + 1])
        g.tag("left", ids[0][j + 1], ids[0][j])
    return g.build()


def _sector(r_in, r_out, th0, th1, n_r, n_t, tags, periodic=False) -> PolygonalMesh:
    g = _GridBuilder()
    n_nodes_t = n_t if periodic else n_t + 1
    ids = [[g.node((i, j), (r * math.cos(th), r * math.sin(th)))
            for j in range(n_nodes_t)
            for th in [th0 + (th1 - th0) * j / n_t]]
           for i in range(n_r + 1)
           for r in [r_in + (r_out - r_in) * i / n_r]]
    for i in range(n_r):
        for j in range(n_t):
            jn = (j + 1) % n_nodes_t
            g.cells.append((ids[i][j], ids[i + 1][j], ids[i + 1][jn], ids[i][jn]))
    inner, outer, start, end = tags
    for j in range(n_t):
        jn = (j + 1) % n_nodes_t
        g.tag(inner, ids[0][jn], ids[0][j])
        g.tag(outer, ids[n_r][j], ids[n_r][jn])
    if not periodic:
        for i in range(n_r):
            g.tag(start, ids[i][0], ids[i + 1][0])
            g.tag(end, ids[i + 1][n_t], ids[i][n_t])
    return g.build()


def generate_annulus_quads(r_in: float, r_out: float, quarter: bool, n_r: int, n_theta: int) -> PolygonalMesh:
    """Quarter (0..90 deg) or full annulus of structured quads.

    Tags: ``inner``, ``outer`` and, for the quarter, ``theta0`` / ``theta90``.
    """
    if not (r_out > r_in > 0):
        raise MeshError(f"invalid radii: need R_o > R_i > 0, got R_i={r_in}, R_o={r_out}")
    if n_r < 1 or n_theta < 1:
        raise MeshError("need at least one division in each direction")
    if quarter:
        return _sector(r_in, r_out, 0.0, math.pi / 2, n_r, n_theta,
                       ("inner", "outer", "theta0", "theta90"))
    if n_theta < 3:
        raise MeshError("a full annulus needs n_theta >= 3")
    return _sector(r_in, r_out, 0.0, 2 * math.pi, n_r, n_theta,
                   ("inner", "outer", None, None), periodic=True)


def generate_half_annulus(r_in: float, r_out: float, n_r: int, n_theta: int) -> PolygonalMesh:
    """Semicircular arch above the x axis.

    Tags ``inner``, ``outer``, ``free`` (end face at theta = 0) and
    ``clamped`` (end face at theta = pi).
    """
    if not (r_out > r_in > 0):
        raise MeshError(f"invalid radii: need R_o > R_i > 0, got R_i={r_in}, R_o={r_out}")
    if n_r < 1 or n_theta < 1:
        raise MeshError("need at least one division in each direction")
    return _sector(r_in, r_out, 0.0, math.pi, n_r, n_theta, ("inner", "outer", "free", "clamped"))


def generate_plate_with_hole(L: float, H: float, R: float, refinement: int = 1,
                             grading: float = 1.0) -> PolygonalMesh:
    """Quarter of a rectangular plate (2L x 2H) with a central hole of radius R.

    The hole centre sits at the origin. Three structured blocks: two around
    the hole arc (split at 45 degrees) and a rectangle above ``y = L``.
    ``refinement`` scales every division count (4 per 45-degree arc
    segment per level); ``grading`` > 1 clusters rings toward the hole.

    Tags: ``hole``, ``symmetry-x`` (on x = 0, normal along x), ``symmetry-y``
    (on y = 0, normal along y), ``right`` (x = L), ``top`` (y = H).
    """
    if not (0 < R < L <= H):
        raise MeshError(f"invalid geometry: need 0 < R < L <= H, got R={R}, L={L}, H={H}")
    if refinement < 1:
        raise MeshError("refinement must be >= 1")
    n_a = 4 * refinement
    n_r = 4 * refinement
    n_v = max(1, round(n_a * (H - L) / L))
    if grading == 1.0:
        s = np.linspace(0.0, 1.0, n_r + 1)
    else:
        w = grading ** np.arange(n_r)
        s = np.concatenate([[0.0], np.cumsum(w) / w.sum()])

    g = _GridBuilder()

    def ring_node(j, i):
        # j = 0..2 n_a runs along the arc from theta = 0 to 90 degrees
        th = 0.5 * math.pi * j / (2 * n_a)
        p = np.array([R * math.cos(th), R * math.sin(th)])
        if j <= n_a:
            q = np.array([L, L * j / n_a])
        else:
            q = np.array([L * (2 * n_a - j) / n_a, L])
        xy = p + (q - p) * s[i]
        return g.node(("ring", j, i), xy)

    ring = [[ring_node(j, i) for i in range(n_r + 1)] for j in range(2 * n_a + 1)]
    for j in range(2 * n_a):
        for i in range(n_r):
            g.cells.append((ring[j][i], ring[j][i + 1], ring[j + 1][i + 1], ring[j + 1][i]))
        g.tag("hole", ring[j + 1][0], ring[j][0])
    for i in range(n_r):
        g.tag("symmetry-y", ring[0][i], ring[0][i + 1])
        g.tag("symmetry-x", ring[2 * n_a][i + 1], ring[2 * n_a][i])
    for j in range(n_a):
        g.tag("right", ring[j][n_r], ring[j + 1][n_r])

    # upper block: column c = 0..n_a from x = 0 to L, shares the ring's outer line
    def top_node(c, r):
        if r == 0:
            return ring[2 * n_a - c][n_r]
        return g.node(("top", c, r), (L * c / n_a, L + (H - L) * r / n_v))

    top = [[top_node(c, r) for r in range(n_v + 1)] for c in range(n_a + 1)]
    for c in range(n_a):
        for r in range(n_v):
            g.cells.append((top[c][r], top[c + 1][r], top[c + 1][r + 1], top[c][r + 1]))
        g.tag("top", top[c + 1][n_v], top[c][n_v])
    for r in range(n_v):
        g.tag("right", top[n_a][r], top[n_a][r + 1])
        g.tag("symmetry-x", top[0][r + 1], top[0][r])
    return g.build()
