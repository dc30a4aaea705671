"""Triangulations of polygonal domains.

A :class:`Triangulation` stores vertex coordinates and counterclockwise
vertex-index triples.  Edges, boundary flags and adjacency are always derived
from the triangle list.  Local edge ``c`` of a triangle is the edge opposite
its local vertex ``c``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for invalid triangulations."""


DEGENERACY_FACTOR = 1e-14


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


@dataclass(eq=False)
class Triangulation:
    """Immutable triangulation ``(V, E, T)``.

    Build instances with :func:`build`; the derived arrays are filled there.

    Attributes
    ----------
    vertices : (n_v, 2) float array
    triangles : (n_t, 3) int array, counterclockwise
    edges : (n_e, 2) int array, smaller vertex index first, sorted
    boundary_edges : (n_e,) bool
    boundary_vertices : (n_v,) bool
    edge_triangles : (n_e, 2) int, second entry -1 on boundary edges
    triangle_edges : (n_t, 3) int, edge index opposite each local vertex
    neighbors : (n_t, 3) int, triangle across each local edge or -1
    neighbor_vertex : (n_t, 3) int, local index (in the neighbor) of the
        vertex opposite the shared edge, or -1
    ct_parent : (n_t,) int or None, parent triangle of a Clough-Tocher split
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray = field(repr=False)
    boundary_edges: np.ndarray = field(repr=False)
    boundary_vertices: np.ndarray = field(repr=False)
    edge_triangles: np.ndarray = field(repr=False)
    triangle_edges: np.ndarray = field(repr=False)
    neighbors: np.ndarray = field(repr=False)
    neighbor_vertex: np.ndarray = field(repr=False)
    ct_parent: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_boundary_edges(self) -> int:
        return int(self.boundary_edges.sum())

    @property
    def n_boundary_vertices(self) -> int:
        return int(self.boundary_vertices.sum())

    @property
    def interior_edges(self) -> np.ndarray:
        """Indices of edges in E \\ E^b, increasing."""
        return np.flatnonzero(~self.boundary_edges)

    @property
    def areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    def corners(self, m: int) -> np.ndarray:
        return self.vertices[self.triangles[m]]

    def summary(self) -> dict:
        return {
            "n_v": self.n_vertices,
            "n_e": self.n_edges,
            "n_t": self.n_triangles,
            "n_e_b": self.n_boundary_edges,
            "n_v_b": self.n_boundary_vertices,
            "euler": self.n_vertices - self.n_edges + self.n_triangles,
            "h": longest_edge(self),
        }


def build(vertices, triangles, check_euler: bool = True) -> Triangulation:
    """Build a triangulation and derive edges, boundary flags and adjacency.

    Triangles are reoriented counterclockwise.  Raises :class:`MeshError` for
    duplicate or degenerate triangles, invalid indices, non-manifold edges and,
    unless ``check_euler`` is false, domains that are not simply connected.
    """
    V = np.asarray(vertices, dtype=float).reshape(-1, 2)
    T = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if len(T) == 0:
        raise MeshError("triangle list is empty")
    if not np.all(np.isfinite(V)):
        raise MeshError("vertex coordinates must be finite")
    if T.min() < 0 or T.max() >= len(V):
        raise MeshError("triangle references an invalid vertex index")
    if np.any((T[:, 0] == T[:, 1]) | (T[:, 1] == T[:, 2]) | (T[:, 0] == T[:, 2])):
        raise MeshError("triangle with repeated vertex")

    keys = np.sort(T, axis=1)
    if len(np.unique(keys, axis=0)) != len(T):
        raise MeshError("duplicate triangle")

    diag2 = float(np.sum((V.max(axis=0) - V.min(axis=0)) ** 2))
    area = signed_areas(V, T)
    bad = np.abs(area) < DEGENERACY_FACTOR * diag2
    if np.any(bad):
        raise MeshError(f"degenerate triangle(s) {np.flatnonzero(bad).tolist()}")
    flip = area < 0
    T[flip] = T[flip][:, [0, 2, 1]]

    n_t = len(T)
    # local edge c joins local vertices c+1 and c+2
    local = np.stack([T[:, [1, 2]], T[:, [2, 0]], T[:, [0, 1]]], axis=1)
    half = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(half, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        raise MeshError("non-manifold edge (more than two incident triangles)")

    triangle_edges = inverse.reshape(n_t, 3)
    edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_local = np.full((len(edges), 2), -1, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    slot = np.zeros(len(edges), dtype=np.int64)
    for h in order:
        e = inverse[h]
        edge_triangles[e, slot[e]] = h // 3
        edge_local[e, slot[e]] = h % 3
        slot[e] += 1

    boundary_edges = counts == 1
    boundary_vertices = np.zeros(len(V), dtype=bool)
    boundary_vertices[edges[boundary_edges].ravel()] = True

    neighbors = np.full((n_t, 3), -1, dtype=np.int64)
    neighbor_vertex = np.full((n_t, 3), -1, dtype=np.int64)
    inner = np.flatnonzero(~boundary_edges)
    m0, m1 = edge_triangles[inner, 0], edge_triangles[inner, 1]
    c0, c1 = edge_local[inner, 0], edge_local[inner, 1]
    neighbors[m0, c0] = m1
    neighbors[m1, c1] = m0
    neighbor_vertex[m0, c0] = c1
    neighbor_vertex[m1, c1] = c0

    used = np.zeros(len(V), dtype=bool)
    used[T.ravel()] = True
    if not used.all():
        raise MeshError("vertex not referenced by any triangle")
    if check_euler and len(V) - len(edges) + n_t != 1:
        raise MeshError(
            f"Euler characteristic {len(V) - len(edges) + n_t} != 1; "
            "pass check_euler=False for domains with holes")

    return Triangulation(
        vertices=V, triangles=T, edges=edges, boundary_edges=boundary_edges,
        boundary_vertices=boundary_vertices, edge_triangles=edge_triangles,
        triangle_edges=triangle_edges, neighbors=neighbors,
        neighbor_vertex=neighbor_vertex)


def barycentric(tri: Triangulation, m: int, p) -> np.ndarray:
    """Barycentric coordinates of point(s) ``p`` with respect to triangle ``m``.

    ``p`` may be a single point or an ``(..., 2)`` array; the result has a
    trailing axis of length 3 in the triangle's vertex order.
    """
    a, b, c = tri.vertices[tri.triangles[m]]
    return barycentric_in(a, b, c, p)


def barycentric_in(a, b, c, p) -> np.ndarray:
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
    p = np.asarray(p, dtype=float)
    det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    scale = max(np.sum((b - a) ** 2), np.sum((c - a) ** 2), np.sum((c - b) ** 2))
    if abs(det) < DEGENERACY_FACTOR * scale:
        raise MeshError("degenerate triangle in barycentric solve")
    dx = p[..., 0] - a[0]
    dy = p[..., 1] - a[1]
    t1 = (dx * (c[1] - a[1]) - dy * (c[0] - a[0])) / det
    t2 = ((b[0] - a[0]) * dy - (b[1] - a[1]) * dx) / det
    return np.stack([1.0 - t1 - t2, t1, t2], axis=-1)


def barycentric_gradients(tri: Triangulation) -> np.ndarray:
    """Constant gradients of the three barycentric coordinates, ``(n_t, 3, 2)``."""
    P = tri.vertices[tri.triangles]
    a, b, c = P[:, 0], P[:, 1], P[:, 2]
    det = 2.0 * tri.areas
    g1 = np.stack([c[:, 1] - a[:, 1], a[:, 0] - c[:, 0]], axis=1) / det[:, None]
    g2 = np.stack([a[:, 1] - b[:, 1], b[:, 0] - a[:, 0]], axis=1) / det[:, None]
    return np.stack([-g1 - g2, g1, g2], axis=1)


def longest_edge(tri: Triangulation) -> float:
    d = tri.vertices[tri.edges[:, 1]] - tri.vertices[tri.edges[:, 0]]
    return float(np.sqrt((d ** 2).sum(axis=1)).max())


def refine_midpoint(tri: Triangulation) -> Triangulation:
    """Split every triangle into four through its edge midpoints.

    Original vertices keep their indices; the midpoint of edge ``e`` gets
    index ``n_v + e``.  Triangle ``m`` becomes ``4m .. 4m+3`` (three corner
    triangles in local-vertex order, then the middle one).
    """
    nv = tri.n_vertices
    mids = 0.5 * (tri.vertices[tri.edges[:, 0]] + tri.vertices[tri.edges[:, 1]])
    V = np.vstack([tri.vertices, mids])
    T = tri.triangles
    e = tri.triangle_edges + nv
    # e[:, c] is the midpoint opposite local vertex c
    children = np.stack([
        np.stack([T[:, 0], e[:, 2], e[:, 1]], axis=1),
        np.stack([e[:, 2], T[:, 1], e[:, 0]], axis=1),
        np.stack([e[:, 1], e[:, 0], T[:, 2]], axis=1),
        np.stack([e[:, 2], e[:, 0], e[:, 1]], axis=1),
    ], axis=1).reshape(-1, 3)
    euler = tri.n_vertices - tri.n_edges + tri.n_triangles == 1
    return build(V, children, check_euler=euler)


def refine_clough_tocher(tri: Triangulation) -> Triangulation:
    """Clough-Tocher split of every triangle through its centroid.

    Parent ``m = [v_i, v_j, v_k]`` becomes ``3m = [v_i, v_j, c]``,
    ``3m+1 = [v_j, v_k, c]`` and ``3m+2 = [v_k, v_i, c]``, where the centroid
    ``c`` gets vertex index ``n_v + m``.  Sub-triangle ``3m+s`` has the parent
    edge opposite local vertex ``(s+2) % 3`` as its outer edge.
    """
    nv = tri.n_vertices
    T = tri.triangles
    centroids = tri.vertices[T].mean(axis=1)
    V = np.vstack([tri.vertices, centroids])
    c = nv + np.arange(tri.n_triangles)
    children = np.stack([
        np.stack([T[:, 0], T[:, 1], c], axis=1),
        np.stack([T[:, 1], T[:, 2], c], axis=1),
        np.stack([T[:, 2], T[:, 0], c], axis=1),
    ], axis=1).reshape(-1, 3)
    euler = tri.n_vertices - tri.n_edges + tri.n_triangles == 1
    out = build(V, children, check_euler=euler)
    out.ct_parent = np.repeat(np.arange(tri.n_triangles), 3)
    return out


def locate(tri: Triangulation, points, tol: float = 1e-10):
    """Find a triangle containing each point.

    Returns ``(index, bary, inside)``: the triangle whose smallest barycentric
    coordinate is largest, the barycentric coordinates there, and a mask of
    points that lie inside the triangulation up to ``tol``.  Points outside
    get the closest triangle in that sense (extrapolation).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    best = np.full(n, -np.inf)
    index = np.zeros(n, dtype=np.int64)
    order = np.argsort(pts[:, 0], kind="stable")
    xs = pts[order, 0]
    P = tri.vertices[tri.triangles]
    lo = P.min(axis=1)
    hi = P.max(axis=1)
    pad = 1e-9 * max(1.0, float(np.abs(tri.vertices).max()))
    for m in range(tri.n_triangles):
        i0 = np.searchsorted(xs, lo[m, 0] - pad, side="left")
        i1 = np.searchsorted(xs, hi[m, 0] + pad, side="right")
        if i1 <= i0:
            continue
        cand = order[i0:i1]
        y = pts[cand, 1]
        cand = cand[(y >= lo[m, 1] - pad) & (y <= hi[m, 1] + pad)]
        if len(cand) == 0:
            continue
        score = barycentric_in(*P[m], pts[cand]).min(axis=1)
        better = score > best[cand]
        best[cand[better]] = score[better]
        index[cand[better]] = m
    missing = ~np.isfinite(best)
    if np.any(missing):
        # outside every bounding box: pick the triangle with nearest centroid
        cent = P.mean(axis=1)
        d = ((pts[missing, None, :] - cent[None]) ** 2).sum(axis=-1)
        index[missing] = d.argmin(axis=1)
    bary = np.empty((n, 3))
    for m in np.unique(index):
        sel = index == m
        bary[sel] = barycentric_in(*P[m], pts[sel])
    inside = bary.min(axis=1) >= -tol
    return index, bary, inside


def boundary_loop(tri: Triangulation) -> np.ndarray:
    """Boundary vertices in counterclockwise order (single-component boundary)."""
    nxt = {}
    for m in range(tri.n_triangles):
        for c in range(3):
            if tri.neighbors[m, c] < 0:
                a, b = tri.triangles[m, (c + 1) % 3], tri.triangles[m, (c + 2) % 3]
                nxt[int(a)] = int(b)
    start = min(nxt)
    loop = [start]
    while nxt[loop[-1]] != start:
        loop.append(nxt[loop[-1]])
        if len(loop) > len(nxt):
            raise MeshError("boundary is not a single closed loop")
    if len(loop) != len(nxt):
        raise MeshError("boundary has several components")
    return np.array(loop)


def load_mesh(path) -> Triangulation:
    """Read a mesh file: JSON with ``vertices`` and 0-based ``triangles``."""
    data = json.loads(Path(path).read_text())
    return build(data["vertices"], data["triangles"],
                 check_euler=data.get("check_euler", True))


def save_mesh(tri: Triangulation, path) -> None:
    data = {"vertices": tri.vertices.tolist(), "triangles": tri.triangles.tolist()}
    Path(path).write_text(json.dumps(data, indent=1))
