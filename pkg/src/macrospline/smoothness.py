"""C1 smoothness functionals across interior edges.

For an interior edge ``<v_i, v_j>`` shared by ``m = [v_i, v_j, v_k]`` and
``m' = [v_i, v_j, v_k']`` both patches are read in an *aligned frame* whose
first two slots are ``v_i`` and ``v_j`` (same order on both sides) and whose
last slot is the opposite vertex.  ``tau`` denotes the barycentric coordinates
of ``v_k'`` with respect to ``m`` in that frame.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .bbform import INDEX, MULTI_INDICES, Spline
from .mesh import Triangulation, barycentric_in


class GeometryError(ValueError):
    """Raised when an edge configuration makes a functional undefined."""


def _frame_index(order) -> np.ndarray:
    out = np.empty(10, dtype=np.int64)
    for k, d in enumerate(MULTI_INDICES):
        stored = [0, 0, 0]
        for slot, local in enumerate(order):
            stored[local] = int(d[slot])
        out[k] = INDEX[tuple(stored)]
    return out


# FRAME_INDEX[order][k]: stored position of aligned multi-index k
FRAME_INDEX = {order: _frame_index(order) for order in itertools.permutations(range(3))}


def aligned(coeffs: np.ndarray, order) -> np.ndarray:
    """Reorder a patch's 10 coefficients into the frame given by ``order``."""
    return np.asarray(coeffs)[..., FRAME_INDEX[tuple(int(o) for o in order)]]


@dataclass(frozen=True)
class EdgeContext:
    """One side of an interior edge: base triangle ``m`` and neighbor ``mp``.

    ``frame_m`` and ``frame_mp`` list local vertex positions in aligned order.
    """

    edge: int
    m: int
    mp: int
    frame_m: tuple
    frame_mp: tuple
    tau: np.ndarray


def edge_context(tri: Triangulation, m: int, c: int) -> EdgeContext:
    """Context for the edge of triangle ``m`` opposite its local vertex ``c``."""
    mp = int(tri.neighbors[m, c])
    if mp < 0:
        raise GeometryError(f"edge {int(tri.triangle_edges[m, c])} is a boundary edge")
    i, j = (c + 1) % 3, (c + 2) % 3
    vi, vj = tri.triangles[m, i], tri.triangles[m, j]
    row = list(tri.triangles[mp])
    kp = int(tri.neighbor_vertex[m, c])
    tau = barycentric_in(*tri.vertices[tri.triangles[m, [i, j, c]]],
                         tri.vertices[tri.triangles[mp, kp]])
    return EdgeContext(int(tri.triangle_edges[m, c]), m, mp, (i, j, c),
                       (row.index(vi), row.index(vj), kp), tau)


def edge_contexts(tri: Triangulation) -> list[tuple[EdgeContext, EdgeContext]]:
    """Both contexts of every interior edge; the first uses the smaller triangle index."""
    out = []
    for e in tri.interior_edges:
        m0, m1 = sorted(int(t) for t in tri.edge_triangles[e])
        c0 = int(np.flatnonzero(tri.triangle_edges[m0] == e)[0])
        c1 = int(np.flatnonzero(tri.triangle_edges[m1] == e)[0])
        out.append((edge_context(tri, m0, c0), edge_context(tri, m1, c1)))
    return out


def xi(s: Spline, l: int) -> float:
    """C1 functional of edge ``l``; zero iff ``s`` (C1 at the edge ends) is C1 across it.

    The base triangle is the incident triangle with the smaller index.
    """
    tri = s.mesh
    if tri.boundary_edges[l]:
        raise GeometryError(f"edge {l} is a boundary edge")
    m0 = int(min(tri.edge_triangles[l]))
    c0 = int(np.flatnonzero(tri.triangle_edges[m0] == l)[0])
    ctx = edge_context(tri, m0, c0)
    a = aligned(s.coeffs[ctx.m], ctx.frame_m)
    b = aligned(s.coeffs[ctx.mp], ctx.frame_mp)
    t = ctx.tau
    return float(t[0] * a[INDEX[2, 1, 0]] + t[1] * a[INDEX[1, 2, 0]]
                 + t[2] * a[INDEX[1, 1, 1]] - b[INDEX[1, 1, 1]])


@lru_cache(maxsize=32)
def xi_matrix(tri: Triangulation) -> sp.csr_matrix:
    """Sparse map from stacked patch coefficients ``(n_t * 10,)`` to all ``xi_l``.

    Rows follow the increasing order of interior edges.
    """
    rows, cols, vals = [], [], []
    for r, (ctx, _) in enumerate(edge_contexts(tri)):
        fm = FRAME_INDEX[ctx.frame_m]
        t = ctx.tau
        for k, w in ((INDEX[2, 1, 0], t[0]), (INDEX[1, 2, 0], t[1]), (INDEX[1, 1, 1], t[2])):
            rows.append(r)
            cols.append(10 * ctx.m + fm[k])
            vals.append(w)
        rows.append(r)
        cols.append(10 * ctx.mp + INDEX[1, 1, 1])
        vals.append(-1.0)
    n_int = len(tri.interior_edges)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_int, 10 * tri.n_triangles))


# order of the inputs that gamma_weights refers to
GAMMA_INPUTS = ("300", "210", "120", "030", "201", "021", "102", "012", "p102", "p012")


def gamma_weights(tau) -> np.ndarray:
    """Weights of the center-coefficient functional, shape ``(..., 10)``.

    Inputs, in :data:`GAMMA_INPUTS` order, are the nine vertex-interpolation
    coefficients of ``m`` except those at (1,1,1) and with the (1,0,2) and
    (0,1,2) coefficients of ``m'`` last.
    """
    tau = np.asarray(tau, dtype=float)
    a, b, c = tau[..., 0], tau[..., 1], tau[..., 2]
    den = 2.0 * c * (1.0 - c)
    if np.any(np.abs(den) < 1e-14):
        raise GeometryError("flat neighbor configuration: tau_k (1 - tau_k) = 0")
    one = np.ones_like(a)
    w = np.stack([
        -a * a, -a * a - 2 * a * b, -2 * a * b - b * b, -b * b,
        -2 * a * c, -2 * b * c, -c * c, -c * c, one, one,
    ], axis=-1)
    return w / den[..., None]


def gamma(coeffs_m, coeffs_mp, tau) -> float:
    """Center coefficient of ``m`` that makes the edge C1 and keeps cubic precision.

    ``coeffs_m`` and ``coeffs_mp`` are the 10 coefficients of both patches in
    their aligned frames; only the entries named in :data:`GAMMA_INPUTS` are
    read.
    """
    a = np.asarray(coeffs_m, dtype=float)
    b = np.asarray(coeffs_mp, dtype=float)
    x = np.array([a[INDEX[3, 0, 0]], a[INDEX[2, 1, 0]], a[INDEX[1, 2, 0]], a[INDEX[0, 3, 0]],
                  a[INDEX[2, 0, 1]], a[INDEX[0, 2, 1]], a[INDEX[1, 0, 2]], a[INDEX[0, 1, 2]],
                  b[INDEX[1, 0, 2]], b[INDEX[0, 1, 2]]])
    return float(gamma_weights(tau) @ x)

