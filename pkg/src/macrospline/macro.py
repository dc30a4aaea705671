"""The three cubic macro-element constructions.

Every construction is linear in the vertex data, so it is represented by a
sparse matrix mapping stacked vertex data ``(value, d/dx, d/dy)`` of the
linear polynomials ``Q_i`` (length ``3 n_v``) to stacked BB coefficients
(length ``10 n_t`` of the output triangulation).

* ``S1`` - Zienkiewicz element, C0 with quadratic precision.
* ``S2`` - C0 with cubic precision; center coefficients average the
  edge functionals of the interior edges of each triangle.
* ``S3`` - C1 Clough-Tocher element with cubic precision on the split mesh.
"""

from __future__ import annotations

import enum
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .bbform import INDEX, Spline
from .mesh import Triangulation, refine_clough_tocher
from .smoothness import gamma_weights


class MacroKind(enum.Enum):
    S1 = "s1"
    S2 = "s2"
    S3 = "s3"

    @classmethod
    def parse(cls, value) -> "MacroKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class MacroError(ValueError):
    """Raised when a construction's preconditions do not hold."""


class VertexLinear(NamedTuple):
    value: float
    gradient: tuple


def vertex_data(values, gradients) -> np.ndarray:
    """Stack values ``(n_v,)`` and gradients ``(n_v, 2)`` into ``(n_v, 3)`` data."""
    return np.column_stack([np.asarray(values, float), np.asarray(gradients, float)])


def sample_data(tri: Triangulation, f, grad) -> np.ndarray:
    """Vertex data from a function and its gradient, both ``(x, y)`` callables."""
    x, y = tri.vertices.T
    g = np.asarray(grad(x, y), dtype=float)
    if g.shape[0] == 2 and g.shape != (len(x), 2):
        g = g.T
    return vertex_data(np.broadcast_to(f(x, y), x.shape), g)


def dimension(tri: Triangulation, kind) -> int:
    MacroKind.parse(kind)
    return 3 * tri.n_vertices


def _qeval(n_v: int, V: np.ndarray, vidx: np.ndarray, pts: np.ndarray) -> sp.csr_matrix:
    """Rows evaluating ``Q_vidx`` at ``pts``: ``Q(p) = value + grad . (p - v)``."""
    r = len(vidx)
    d = pts - V[vidx]
    rows = np.repeat(np.arange(r), 3)
    cols = (3 * vidx[:, None] + np.arange(3)).ravel()
    vals = np.column_stack([np.ones(r), d]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(r, 3 * n_v))


def _scale(w, X):
    return sp.diags(np.asarray(w, dtype=float)) @ X


def _bary_batch(A, B, C, P):
    det = (B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1]) - (B[:, 1] - A[:, 1]) * (C[:, 0] - A[:, 0])
    dx, dy = P[:, 0] - A[:, 0], P[:, 1] - A[:, 1]
    t1 = (dx * (C[:, 1] - A[:, 1]) - dy * (C[:, 0] - A[:, 0])) / det
    t2 = ((B[:, 0] - A[:, 0]) * dy - (B[:, 1] - A[:, 1]) * dx) / det
    return np.stack([1 - t1 - t2, t1, t2], axis=1)


def _check_boundary_edges(tri: Triangulation):
    nb = (tri.neighbors < 0).sum(axis=1)
    bad = np.flatnonzero(nb == 3)
    if len(bad):
        raise MacroError(f"triangles {bad.tolist()} have all edges on the boundary")


def _gamma_rows(tri: Triangulation):
    """Per local edge ``c``: rows of gamma for every triangle (zero on boundary edges)."""
    n_v, V, T = tri.n_vertices, tri.vertices, tri.triangles
    out = []
    for c in range(3):
        i, j = (c + 1) % 3, (c + 2) % 3
        inner = tri.neighbors[:, c] >= 0
        mp = np.where(inner, tri.neighbors[:, c], 0)
        kp = np.where(inner, tri.neighbor_vertex[:, c], 0)
        vi, vj, vk = T[:, i], T[:, j], T[:, c]
        vkp = T[mp, kp]
        Pi, Pj, Pk, Pkp = V[vi], V[vj], V[vk], V[vkp]
        tau = _bary_batch(Pi, Pj, Pk, Pkp)
        tau[~inner] = (0.25, 0.25, 0.5)  # placeholder, weights zeroed below
        w = gamma_weights(tau) * inner[:, None]
        inputs = [
            _qeval(n_v, V, vi, Pi),
            _qeval(n_v, V, vi, (2 * Pi + Pj) / 3),
            _qeval(n_v, V, vj, (2 * Pj + Pi) / 3),
            _qeval(n_v, V, vj, Pj),
            _qeval(n_v, V, vi, (2 * Pi + Pk) / 3),
            _qeval(n_v, V, vj, (2 * Pj + Pk) / 3),
            _qeval(n_v, V, vk, (2 * Pk + Pi) / 3),
            _qeval(n_v, V, vk, (2 * Pk + Pj) / 3),
            _qeval(n_v, V, vkp, (2 * Pkp + Pi) / 3),
            _qeval(n_v, V, vkp, (2 * Pkp + Pj) / 3),
        ]
        out.append(sum(_scale(w[:, q], X) for q, X in enumerate(inputs)))
    return out, tri.neighbors >= 0


def _outer_coefficients(tri: Triangulation):
    """The nine vertex-interpolation coefficients of every triangle, by stored index."""
    n_v, V, T = tri.n_vertices, tri.vertices, tri.triangles
    coef = {}
    for c in range(3):
        n, p = (c + 1) % 3, (c + 2) % 3
        vc = T[:, c]
        Pc, Pn, Pp = V[vc], V[T[:, n]], V[T[:, p]]
        d = [0, 0, 0]
        d[c] = 3
        coef[INDEX[tuple(d)]] = _qeval(n_v, V, vc, Pc)
        d = [0, 0, 0]
        d[c], d[n] = 2, 1
        coef[INDEX[tuple(d)]] = _qeval(n_v, V, vc, (2 * Pc + Pn) / 3)
        d = [0, 0, 0]
        d[c], d[p] = 2, 1
        coef[INDEX[tuple(d)]] = _qeval(n_v, V, vc, (2 * Pc + Pp) / 3)
    return coef


def _interleave(blocks, n_rows: int) -> sp.csr_matrix:
    """Stack per-coefficient blocks so row ``10 * r + k`` is block ``k`` row ``r``."""
    stacked = sp.vstack(blocks, format="csr")
    K = len(blocks)
    perm = (np.arange(K)[None, :] * n_rows + np.arange(n_rows)[:, None]).ravel()
    return stacked[perm]


def _s12_operator(tri: Triangulation, kind: MacroKind) -> sp.csr_matrix:
    n_v, V, T = tri.n_vertices, tri.vertices, tri.triangles
    coef = _outer_coefficients(tri)
    if kind is MacroKind.S1:
        center = None
        for c in range(3):
            n, p = (c + 1) % 3, (c + 2) % 3
            pts = 0.5 * V[T[:, c]] + 0.25 * V[T[:, n]] + 0.25 * V[T[:, p]]
            term = _qeval(n_v, V, T[:, c], pts) / 3.0
            center = term if center is None else center + term
    else:
        _check_boundary_edges(tri)
        g, inner = _gamma_rows(tri)
        count = inner.sum(axis=1)
        center = sum(_scale(inner[:, c] / count, g[c]) for c in range(3))
    coef[INDEX[1, 1, 1]] = center
    return _interleave([coef[k] for k in range(10)], tri.n_triangles)


def _s3_operator(tri: Triangulation) -> sp.csr_matrix:
    _check_boundary_edges(tri)
    n_v, V, T = tri.n_vertices, tri.vertices, tri.triangles
    cen = V[T].mean(axis=1)
    g, inner = _gamma_rows(tri)
    count = inner.sum(axis=1)
    avg = sum(_scale(inner[:, c] / count, g[c]) for c in range(3))

    sub = []
    for s in range(3):
        a, b = s, (s + 1) % 3
        va, vb = T[:, a], T[:, b]
        Pa, Pb = V[va], V[vb]
        k = {}
        k[INDEX[3, 0, 0]] = _qeval(n_v, V, va, Pa)
        k[INDEX[2, 1, 0]] = _qeval(n_v, V, va, (2 * Pa + Pb) / 3)
        k[INDEX[2, 0, 1]] = _qeval(n_v, V, va, (2 * Pa + cen) / 3)
        k[INDEX[0, 3, 0]] = _qeval(n_v, V, vb, Pb)
        k[INDEX[1, 2, 0]] = _qeval(n_v, V, vb, (2 * Pb + Pa) / 3)
        k[INDEX[0, 2, 1]] = _qeval(n_v, V, vb, (2 * Pb + cen) / 3)
        opp = (s + 2) % 3
        edge_term = _scale(inner[:, opp], g[opp]) + _scale(~inner[:, opp], avg)
        k[INDEX[1, 1, 1]] = (k[INDEX[2, 1, 0]] + k[INDEX[1, 2, 0]] + edge_term) / 3.0
        sub.append(k)
    for s in range(3):
        prev = sub[(s - 1) % 3]
        sub[s][INDEX[1, 0, 2]] = (sub[s][INDEX[2, 0, 1]] + sub[s][INDEX[1, 1, 1]]
                                  + prev[INDEX[1, 1, 1]]) / 3.0
    for s in range(3):
        sub[s][INDEX[0, 1, 2]] = sub[(s + 1) % 3][INDEX[1, 0, 2]]
    center = (sub[0][INDEX[1, 0, 2]] + sub[1][INDEX[1, 0, 2]] + sub[2][INDEX[1, 0, 2]]) / 3.0
    for s in range(3):
        sub[s][INDEX[0, 0, 3]] = center

    # rows of block (s, k) are parents m; target row is 10 * (3m + s) + k
    blocks = [sub[s][k] for s in range(3) for k in range(10)]
    n_t = tri.n_triangles
    stacked = sp.vstack(blocks, format="csr")
    m = np.arange(n_t)[:, None, None]
    s = np.arange(3)[None, :, None]
    k = np.arange(10)[None, None, :]
    perm = ((s * 10 + k) * n_t + m).ravel()
    return stacked[perm]


@lru_cache(maxsize=64)
def coefficient_operator(tri: Triangulation, kind) -> tuple[Triangulation, sp.csr_matrix]:
    """Output triangulation and sparse matrix ``(10 n_t_out, 3 n_v)`` of a construction.

    The output triangulation is ``tri`` itself for S1/S2 and its cached
    Clough-Tocher refinement for S3.
    """
    kind = MacroKind.parse(kind)
    if kind is MacroKind.S3:
        return clough_tocher_mesh(tri), _s3_operator(tri)
    return tri, _s12_operator(tri, kind)


@lru_cache(maxsize=64)
def clough_tocher_mesh(tri: Triangulation) -> Triangulation:
    return refine_clough_tocher(tri)


def construct(tri: Triangulation, data, kind) -> Spline:
    """Spline of the given kind determined by per-vertex linear data.

    ``data`` is an ``(n_v, 3)`` array of ``(Q_i(v_i), dQ_i/dx, dQ_i/dy)`` or a
    sequence of :class:`VertexLinear`.
    """
    kind = MacroKind.parse(kind)
    if not isinstance(data, np.ndarray) and len(data) and isinstance(data[0], VertexLinear):
        data = vertex_data([d.value for d in data], [d.gradient for d in data])
    data = np.asarray(data, dtype=float)
    if data.shape != (tri.n_vertices, 3):
        raise ValueError(f"vertex data must have shape ({tri.n_vertices}, 3)")
    mesh, op = coefficient_operator(tri, kind)
    coeffs = (op @ data.ravel()).reshape(-1, 10)
    return Spline(mesh, coeffs, "C1" if kind is MacroKind.S3 else "C0")
