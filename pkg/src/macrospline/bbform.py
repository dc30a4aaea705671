"""Cubic Bernstein-Bezier patches over triangles.

Coefficients of a cubic patch are stored in the fixed multi-index order
:data:`MULTI_INDICES` (lexicographic, descending).  Multi-index entries refer
to the triangle's vertices in stored order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import factorial
from pathlib import Path

import numpy as np

from .mesh import Triangulation, barycentric_gradients, barycentric_in, build, locate

MULTI_INDICES = np.array([
    (3, 0, 0), (2, 1, 0), (2, 0, 1), (1, 2, 0), (1, 1, 1),
    (1, 0, 2), (0, 3, 0), (0, 2, 1), (0, 1, 2), (0, 0, 3),
])
INDEX = {tuple(int(v) for v in d): k for k, d in enumerate(MULTI_INDICES)}

_QUAD_INDICES = np.array([(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2)])
_QUAD_INDEX = {tuple(int(v) for v in d): k for k, d in enumerate(_QUAD_INDICES)}


def _multinomial(d) -> float:
    return factorial(sum(d)) / np.prod([factorial(int(x)) for x in d])


_CUBIC_WEIGHTS = np.array([_multinomial(d) for d in MULTI_INDICES])
_QUAD_WEIGHTS = np.array([_multinomial(d) for d in _QUAD_INDICES])

# d/dtau_c of B_d is 3 * B^2_{d - e_c}; index into the quadratic basis or -1
_LOWER = np.full((10, 3), -1)
for _k, _d in enumerate(MULTI_INDICES):
    for _c in range(3):
        if _d[_c] > 0:
            _e = _d.copy()
            _e[_c] -= 1
            _LOWER[_k, _c] = _QUAD_INDEX[tuple(int(v) for v in _e)]


def bernstein_eval(d, bc) -> float:
    """Cubic Bernstein polynomial ``B_d`` at barycentric coordinates ``bc``."""
    d = tuple(int(x) for x in d)
    if len(d) != 3 or min(d) < 0 or sum(d) != 3:
        raise ValueError(f"{d} is not a cubic multi-index")
    t = np.asarray(bc, dtype=float)
    return _multinomial(d) * t[..., 0] ** d[0] * t[..., 1] ** d[1] * t[..., 2] ** d[2]


def bernstein(bc) -> np.ndarray:
    """All ten cubic Bernstein polynomials, shape ``(..., 10)``."""
    t = np.asarray(bc, dtype=float)[..., None, :]
    return _CUBIC_WEIGHTS * np.prod(t ** MULTI_INDICES, axis=-1)


def _quadratic(bc) -> np.ndarray:
    t = np.asarray(bc, dtype=float)[..., None, :]
    return _QUAD_WEIGHTS * np.prod(t ** _QUAD_INDICES, axis=-1)


def bernstein_dtau(bc) -> np.ndarray:
    """Derivatives of the cubic basis w.r.t. barycentric coordinates, ``(..., 10, 3)``."""
    q = _quadratic(bc)
    padded = np.concatenate([q, np.zeros(q.shape[:-1] + (1,))], axis=-1)
    return 3.0 * padded[..., _LOWER]


def bernstein_d2tau(bc) -> np.ndarray:
    """Second barycentric derivatives, ``(..., 10, 3, 3)``."""
    t = np.asarray(bc, dtype=float)
    out = np.zeros(t.shape[:-1] + (10, 3, 3))
    for k, d in enumerate(MULTI_INDICES):
        for c in range(3):
            for c2 in range(3):
                e = d.copy()
                e[c] -= 1
                e[c2] -= 1
                if e.min() < 0:
                    continue
                # remaining linear factor: tau at the single nonzero slot
                out[..., k, c, c2] = 6.0 * t[..., int(np.argmax(e))]
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on a triangle: barycentric nodes and weights summing to one."""

    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        if abs(self.weights.sum() - 1.0) > 1e-14:
            raise ValueError("quadrature weights must sum to one")


def _symmetric_rule(centroid_w, s21, s111, degree) -> QuadratureRule:
    nodes, weights = [], []
    if centroid_w:
        nodes.append((1 / 3, 1 / 3, 1 / 3))
        weights.append(centroid_w)
    for a, w in s21:
        r = 1.0 - 2.0 * a
        nodes += [(r, a, a), (a, r, a), (a, a, r)]
        weights += [w] * 3
    for a, b, w in s111:
        c = 1.0 - a - b
        nodes += [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
        weights += [w] * 6
    return QuadratureRule(np.array(nodes), np.array(weights), degree)


# Dunavant's 16-point rule of degree 8
DUNAVANT8 = _symmetric_rule(
    0.144315607677787,
    [(0.459292588292723, 0.095091634267285),
     (0.170569307751760, 0.103217370534718),
     (0.050547228317031, 0.032458497623198)],
    [(0.263112829634638, 0.008394777409958, 0.027230314174435)],
    degree=8,
)

DEFAULT_RULE = DUNAVANT8


def collapsed_gauss_rule(n: int) -> QuadratureRule:
    """Conical product Gauss rule with ``n * n`` nodes, exact to degree ``2n - 1``."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    t1 = u
    t2 = v * (1.0 - u)
    weights = (wu * wv * (1.0 - u)).ravel() * 2.0
    nodes = np.stack([1.0 - t1 - t2, t1, t2], axis=-1).reshape(-1, 3)
    return QuadratureRule(nodes, weights / weights.sum(), 2 * n - 1)


class Spline:
    """Piecewise cubic function in BB form: one coefficient row per triangle.

    ``smoothness`` is the claimed continuity class, ``"C0"`` or ``"C1"``.
    """

    def __init__(self, mesh: Triangulation, coeffs, smoothness: str = "C0"):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (mesh.n_triangles, 10):
            raise ValueError(f"expected ({mesh.n_triangles}, 10) coefficients, got {coeffs.shape}")
        if smoothness not in ("C0", "C1"):
            raise ValueError("smoothness must be 'C0' or 'C1'")
        self.mesh = mesh
        self.coeffs = coeffs
        self.smoothness = smoothness

    def __repr__(self):
        return f"Spline(n_t={self.mesh.n_triangles}, smoothness={self.smoothness!r})"

    def _grads(self):
        if not hasattr(self, "_bgrad"):
            self._bgrad = barycentric_gradients(self.mesh)
        return self._bgrad

    def __call__(self, x, y=None):
        """Evaluate at points; ``s(points)`` or ``s(x, y)`` with broadcastable arrays."""
        if y is None:
            pts = np.asarray(x, dtype=float)
            shape = pts.shape[:-1]
        else:
            x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
            pts = np.stack([x, y], axis=-1)
            shape = x.shape
        m, bc, _ = locate(self.mesh, pts.reshape(-1, 2))
        vals = np.einsum("nk,nk->n", bernstein(bc), self.coeffs[m])
        return vals.reshape(shape)

    def eval_bary(self, m, bc) -> np.ndarray:
        """Values on triangle(s) ``m`` at barycentric coordinates ``bc``."""
        return np.einsum("...k,...k->...", bernstein(bc), self.coeffs[m])

    def gradient_bary(self, m, bc) -> np.ndarray:
        db = bernstein_dtau(bc)
        dtau = np.einsum("...kc,...k->...c", db, self.coeffs[m])
        return np.einsum("...c,...cx->...x", dtau, self._grads()[m])

    def hessian_bary(self, m, bc) -> np.ndarray:
        d2 = bernstein_d2tau(bc)
        h = np.einsum("...kcd,...k->...cd", d2, self.coeffs[m])
        G = self._grads()[m]
        return np.einsum("...cx,...cd,...dy->...xy", G, h, G)

    def de_casteljau(self, m: int, p) -> float:
        """Value of patch ``m`` at point ``p`` by repeated convex combination."""
        bc = barycentric_in(*self.mesh.corners(m), p)
        level = {tuple(int(v) for v in d): self.coeffs[m, k] for k, d in enumerate(MULTI_INDICES)}
        for r in (2, 1, 0):
            level = {
                (i, j, r - i - j): bc[0] * level[(i + 1, j, r - i - j)]
                + bc[1] * level[(i, j + 1, r - i - j)]
                + bc[2] * level[(i, j, r - i - j + 1)]
                for i in range(r + 1) for j in range(r + 1 - i)
            }
        return float(level[(0, 0, 0)])

    def vertex_jet(self, v: int):
        """Value and gradient at mesh vertex ``v`` taken from an incident patch."""
        m, c = np.argwhere(self.mesh.triangles == v)[0]
        bc = np.zeros(3)
        bc[c] = 1.0
        return float(self.eval_bary(m, bc)), self.gradient_bary(m, bc)


def patch_eval(s: Spline, m: int, p) -> float:
    """Value of the polynomial piece on triangle ``m`` at ``p`` (may extrapolate)."""
    return float(s.eval_bary(m, barycentric_in(*s.mesh.corners(m), p)))


def patch_gradient(s: Spline, m: int, p) -> np.ndarray:
    return s.gradient_bary(m, barycentric_in(*s.mesh.corners(m), p))


def patch_hessian(s: Spline, m: int, p) -> np.ndarray:
    return s.hessian_bary(m, barycentric_in(*s.mesh.corners(m), p))


def quadrature_points(tri: Triangulation, rule: QuadratureRule = DEFAULT_RULE) -> np.ndarray:
    """Physical quadrature nodes, shape ``(n_t, n_q, 2)``."""
    return np.einsum("qc,mcx->mqx", rule.nodes, tri.vertices[tri.triangles])


def integrate(f, tri: Triangulation, rule: QuadratureRule = DEFAULT_RULE,
              trianglewise: bool = False) -> float:
    """Sum over triangles of the rule applied to ``f``.

    ``f`` is a :class:`Spline` on ``tri``, a vectorized callable ``f(x, y)``,
    or, with ``trianglewise=True``, ``f(x, y, m)`` where ``m`` holds the
    triangle index of every node (for functions defined piece by piece).
    """
    if isinstance(f, Spline):
        if f.mesh is not tri:
            raise ValueError("spline lives on a different triangulation")
        vals = f.coeffs @ bernstein(rule.nodes).T
    else:
        X = quadrature_points(tri, rule)
        if trianglewise:
            m = np.broadcast_to(np.arange(tri.n_triangles)[:, None], X.shape[:2])
            vals = f(X[..., 0], X[..., 1], m)
        else:
            vals = f(X[..., 0], X[..., 1])
        vals = np.broadcast_to(np.asarray(vals, dtype=float), X.shape[:2])
    return float(tri.areas @ (vals @ rule.weights))


def vertex_interpolation_coeffs(value, gradient, vi, vj, vk) -> np.ndarray:
    """Coefficients at (3,0,0), (2,1,0), (2,0,1) fixed by a linear polynomial.

    ``value`` and ``gradient`` describe ``Q`` at corner ``vi``; ``vj`` and
    ``vk`` are the two other corners in the corner's local frame.
    """
    vi, vj, vk = (np.asarray(v, dtype=float) for v in (vi, vj, vk))
    g = np.asarray(gradient, dtype=float)
    return np.array([value, value + g @ (vj - vi) / 3.0, value + g @ (vk - vi) / 3.0])


def spline_to_json(s: Spline, mesh_ref: str | None = None) -> str:
    """Text form: mesh (inline or by reference), multi-index order, coefficients."""
    doc = {
        "format": "macrospline-bb3",
        "smoothness": s.smoothness,
        "multi_indices": MULTI_INDICES.tolist(),
        "coefficients": s.coeffs.tolist(),
    }
    if mesh_ref is None:
        doc["mesh"] = {"vertices": s.mesh.vertices.tolist(),
                       "triangles": s.mesh.triangles.tolist()}
    else:
        doc["mesh"] = mesh_ref
    return json.dumps(doc)


def spline_from_json(text: str, mesh: Triangulation | None = None) -> Spline:
    doc = json.loads(text)
    if doc.get("multi_indices") != MULTI_INDICES.tolist():
        raise ValueError("unsupported multi-index order")
    if mesh is None:
        ref = doc["mesh"]
        if isinstance(ref, str):
            from .mesh import load_mesh
            mesh = load_mesh(Path(ref))
        else:
            mesh = build(ref["vertices"], ref["triangles"], check_euler=False)
    return Spline(mesh, np.array(doc["coefficients"]), doc["smoothness"])
