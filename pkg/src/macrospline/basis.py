"""Locally supported basis functions attached to vertex triangles.

Every vertex ``v_i`` gets a small triangle ``<q_i0, q_i1, q_i2>``; the
barycentric coordinates ``Q_ir`` of that triangle, used as the only nonzero
vertex data, define the three basis functions of the vertex.  The dual
functionals are ``S(v_i) + grad S(v_i) . (q_ir - v_i)``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.spatial import ConvexHull, QhullError

from .bbform import Spline
from .macro import MacroKind, coefficient_operator
from .mesh import Triangulation, barycentric_in


class FrameError(ValueError):
    pass


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _area(tri_pts) -> float:
    a, b, c = tri_pts
    return 0.5 * abs(_cross(b - a, c - a))


def _line_intersection(p1, d1, p2, d2):
    den = _cross(d1, d2)
    if abs(den) < 1e-14 * np.linalg.norm(d1) * np.linalg.norm(d2):
        return None
    t = _cross(p2 - p1, d2) / den
    return p1 + t * d1


def _contains(tri_pts, pts, tol) -> bool:
    if _area(tri_pts) <= 0:
        return False
    try:
        bc = barycentric_in(*tri_pts, pts)
    except ValueError:
        return False
    return bool(bc.min() >= -tol)


def _hull(points: np.ndarray):
    try:
        h = ConvexHull(points)
    except QhullError:
        return None
    return points[h.vertices]  # counterclockwise in 2-D


def min_area_triangle(points, fixed_line=None, tol: float = 1e-12) -> np.ndarray:
    """Smallest-area triangle containing ``points``.

    A minimal triangle has a side flush with a hull edge, and every side that
    is not flush touches the hull at its own midpoint.  Candidates built from
    two flush sides plus either a third flush side or a side through a hull
    vertex at its midpoint therefore contain an optimum.

    ``fixed_line = (point, direction)`` forces one side onto that line; the
    points must lie on one side of it.  Returns a ``(3, 2)`` array.
    """
    P = np.asarray(points, dtype=float)
    H = _hull(P)
    if H is None:
        return _segment_cover(P)
    n = len(H)
    lines = [(H[t], H[(t + 1) % n] - H[t]) for t in range(n)]
    if fixed_line is not None:
        fp, fd = (np.asarray(v, dtype=float) for v in fixed_line)
        first = [(fp, fd)]
    else:
        first = lines
    ctol = 1e-10

    best, best_area = None, np.inf

    def consider(T):
        nonlocal best, best_area
        a = _area(T)
        if 0 < a < best_area * (1 - 1e-15) and _contains(T, P, ctol):
            best, best_area = T, a

    for L1 in first:
        for L2 in lines:
            X = _line_intersection(L1[0], L1[1], L2[0], L2[1])
            if X is None:
                continue
            for L3 in lines:
                Y = _line_intersection(L1[0], L1[1], L3[0], L3[1])
                Z = _line_intersection(L2[0], L2[1], L3[0], L3[1])
                if Y is None or Z is None:
                    continue
                consider(np.array([X, Y, Z]))
            M = np.column_stack([L1[1], L2[1]])
            if abs(np.linalg.det(M)) < 1e-14:
                continue
            for p in H:
                s, t = np.linalg.solve(M, 2.0 * (p - X))
                consider(np.array([X, X + s * L1[1], X + t * L2[1]]))
    if best is None:
        raise FrameError("no enclosing triangle found")
    return best


def _segment_cover(P: np.ndarray) -> np.ndarray:
    c = P.mean(axis=0)
    r = np.sqrt(((P - c) ** 2).sum(axis=1)).max()
    if r == 0:
        raise FrameError("all frame points coincide")
    R = 2.0 * r  # circumradius of an equilateral triangle with inradius r
    ang = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    return c + R * np.column_stack([np.cos(ang), np.sin(ang)])


def _ccw(q: np.ndarray) -> np.ndarray:
    if _cross(q[1] - q[0], q[2] - q[0]) < 0:
        return q[[0, 2, 1]]
    return q


def straight_boundary_line(tri: Triangulation, i: int):
    """``(v_i, direction)`` if ``v_i`` lies between two collinear boundary edges."""
    if not tri.boundary_vertices[i]:
        return None
    be = np.flatnonzero(tri.boundary_edges & ((tri.edges[:, 0] == i) | (tri.edges[:, 1] == i)))
    if len(be) != 2:
        return None
    v = tri.vertices[i]
    d = [tri.vertices[tri.edges[e].sum() - i] - v for e in be]
    if abs(_cross(d[0], d[1])) > 1e-12 * np.linalg.norm(d[0]) * np.linalg.norm(d[1]):
        return None
    if d[0] @ d[1] > 0:
        return None
    return v, d[1] - d[0]


def frame_points(tri: Triangulation, i: int, nonnegative: bool = False) -> np.ndarray:
    """``v_i`` and ``5/6 v_i + 1/6 v_j`` for its edges (plus the nonnegativity points)."""
    v = tri.vertices[i]
    nb = tri.edges[(tri.edges[:, 0] == i) | (tri.edges[:, 1] == i)].sum(axis=1) - i
    if len(nb) == 0:
        raise FrameError(f"vertex {i} has no incident edge")
    pts = [v] + [5 / 6 * v + 1 / 6 * tri.vertices[j] for j in nb]
    if nonnegative:
        pts += [2 / 3 * v + 1 / 3 * tri.vertices[j] for j in nb]
        for t in tri.triangles[(tri.triangles == i).any(axis=1)]:
            j, k = [x for x in t if x != i]
            pts.append(0.5 * v + 0.25 * tri.vertices[j] + 0.25 * tri.vertices[k])
    return np.array(pts)


@dataclass(frozen=True)
class VertexFrame:
    """Vertex triangle of ``v_i``.

    ``boundary_aligned`` frames have ``q_1`` and ``q_2`` on a straight
    boundary line through ``v_i``, so the function with ``r = 0`` vanishes on
    the boundary.
    """

    index: int
    vertex: np.ndarray
    q: np.ndarray
    boundary_aligned: bool = False

    @cached_property
    def barycentric_matrix(self) -> np.ndarray:
        """Rows ``r``: coefficients of ``Q_ir(x, y) = a + b x + c y``."""
        A = np.vstack([np.ones(3), self.q.T])
        return np.linalg.inv(A)

    @cached_property
    def to_data(self) -> np.ndarray:
        """``3 x 3`` map from the vertex's coefficients to ``(value, dx, dy)`` data."""
        L = self.barycentric_matrix
        vx, vy = self.vertex
        return np.vstack([L[:, 0] + L[:, 1] * vx + L[:, 2] * vy, L[:, 1], L[:, 2]])

    @property
    def linear(self):
        from .macro import VertexLinear
        T = self.to_data
        return [VertexLinear(float(T[0, r]), (float(T[1, r]), float(T[2, r]))) for r in range(3)]

    @property
    def from_data(self) -> np.ndarray:
        """Dual functionals as a ``3 x 3`` map from ``(value, dx, dy)`` to coefficients."""
        return np.column_stack([np.ones(3), self.q - self.vertex])

    def area(self) -> float:
        return _area(self.q)


def build_frame(tri: Triangulation, i: int, omega: float = 1.0,
                nonnegative: bool = False) -> VertexFrame:
    """Minimal-area vertex triangle of ``v_i``, dilated about ``v_i`` by ``omega``."""
    if omega <= 0:
        raise FrameError("omega must be positive")
    v = tri.vertices[i]
    pts = frame_points(tri, i, nonnegative)
    line = straight_boundary_line(tri, i)
    q = min_area_triangle(pts, fixed_line=line)
    aligned = False
    if line is not None:
        lp, ld = line
        off = np.abs(_cross(q - lp, ld)) / np.linalg.norm(ld)
        r0 = int(np.argmax(off))
        rest = [r for r in range(3) if r != r0]
        if off[rest].max() <= 1e-12 * max(1.0, np.linalg.norm(ld)):
            q = _ccw(q[[r0] + rest])
            aligned = True
    if not aligned:
        q = _ccw(q[np.lexsort((q[:, 1], q[:, 0]))])
    q = v + omega * (q - v)
    return VertexFrame(i, v.copy(), q, aligned)


@dataclass(eq=False)
class BasisSet:
    """Basis of one macro-element space over ``mesh``.

    Basis index ``k`` refers to natural index ``perm[k] = 3 i + r``.  The
    first ``n`` functions vanish on the boundary; the rest are ordered by
    natural index as well.
    """

    mesh: Triangulation
    kind: MacroKind
    frames: list
    perm: np.ndarray
    n: int
    spline_mesh: Triangulation = field(repr=False)
    matrix: sp.csc_matrix = field(repr=False)

    @property
    def N(self) -> int:
        return 3 * self.mesh.n_vertices

    @property
    def smoothness(self) -> str:
        return "C1" if self.kind is MacroKind.S3 else "C0"

    def vertex_and_r(self, k: int):
        nat = int(self.perm[k])
        return nat // 3, nat % 3

    def q_point(self, k: int) -> np.ndarray:
        i, r = self.vertex_and_r(k)
        return self.frames[i].q[r]

    @property
    def greville(self) -> np.ndarray:
        return np.array([self.q_point(k) for k in range(self.N)])

    def from_coefficients(self, c) -> Spline:
        c = np.asarray(c, dtype=float)
        if c.shape != (self.N,):
            raise ValueError(f"expected {self.N} coefficients")
        return Spline(self.spline_mesh, (self.matrix @ c).reshape(-1, 10), self.smoothness)

    def basis_function(self, k: int) -> Spline:
        e = np.zeros(self.N)
        e[k] = 1.0
        return self.from_coefficients(e)

    def dual_functional(self, k: int, value, gradient) -> float:
        i, r = self.vertex_and_r(k)
        return float(value + np.asarray(gradient, float) @ (self.frames[i].q[r] - self.frames[i].vertex))

    def to_coefficients(self, s: Spline) -> np.ndarray:
        nat = np.empty(self.N)
        for i, f in enumerate(self.frames):
            value, grad = s.vertex_jet(i)
            nat[3 * i:3 * i + 3] = f.from_data @ np.concatenate([[value], grad])
        return nat[self.perm]

    def frames_csv(self) -> str:
        buf = io.StringIO()
        buf.write("vertex,vx,vy,q0x,q0y,q1x,q1y,q2x,q2y,boundary_aligned\n")
        for f in self.frames:
            vals = [*f.vertex, *f.q.ravel()]
            buf.write(f"{f.index}," + ",".join(f"{v:.17g}" for v in vals)
                      + f",{int(f.boundary_aligned)}\n")
        return buf.getvalue()


def build_basis(tri: Triangulation, kind, omega: float = 1.0,
                nonnegative: bool = False) -> BasisSet:
    """Frames for every vertex and the sparse coefficient matrix of the basis.

    ``nonnegative`` enlarges the S1 frames so all S1 basis functions are
    nonnegative.
    """
    kind = MacroKind.parse(kind)
    frames = [build_frame(tri, i, omega, nonnegative) for i in range(tri.n_vertices)]
    mesh_out, op = coefficient_operator(tri, kind)
    blocks = sp.block_diag([f.to_data for f in frames], format="csr")
    vanish = np.zeros(3 * tri.n_vertices, dtype=bool)
    for i, f in enumerate(frames):
        if not tri.boundary_vertices[i]:
            vanish[3 * i:3 * i + 3] = True
        elif f.boundary_aligned:
            vanish[3 * i] = True
    perm = np.concatenate([np.flatnonzero(vanish), np.flatnonzero(~vanish)])
    matrix = (op @ blocks).tocsc()[:, perm]
    return BasisSet(tri, kind, frames, perm, int(vanish.sum()), mesh_out, matrix.tocsc())


def frame_containment(frame: VertexFrame, pts) -> float:
    """Smallest barycentric coordinate of ``pts`` in the frame (>= 0 means contained)."""
    return float(barycentric_in(*frame.q, pts).min())

