"""Approximation and boundary value solvers on top of a :class:`BasisSet`.

All global matrices are assembled as ``C^T (blockdiag of element matrices) C``
where ``C`` maps basis coefficients to BB coefficients of the underlying
spline mesh, so assembly costs O(n_t) element work plus sparse products.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .basis import BasisSet
from .bbform import (DEFAULT_RULE, QuadratureRule, Spline, bernstein, bernstein_d2tau,
                     bernstein_dtau, quadrature_points)
from .macro import MacroKind, construct, sample_data
from .mesh import Triangulation, barycentric_gradients, boundary_loop, locate
from .smoothness import xi_matrix


class SingularMatrixError(np.linalg.LinAlgError):
    """Matrix is (numerically) singular; ``sigma_min`` is its smallest singular value."""

    def __init__(self, msg: str, sigma_min: float):
        super().__init__(f"{msg} (smallest singular value {sigma_min:.3e})")
        self.sigma_min = sigma_min


class RankDeficientError(SingularMatrixError):
    pass


class MappingError(ValueError):
    pass


@dataclass
class LinearSystem:
    A: np.ndarray | sp.spmatrix
    b: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        r, c = self.A.shape
        if r != c or r != len(self.b):
            raise ValueError(f"inconsistent system: A {self.A.shape}, b {self.b.shape}")
        data = self.A.data if sp.issparse(self.A) else self.A
        if not np.all(np.isfinite(data)):
            raise ValueError("matrix has non-finite entries")

    def dense(self) -> np.ndarray:
        return self.A.toarray() if sp.issparse(self.A) else np.asarray(self.A, float)


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _sigma_min(A) -> float:
    return float(sla.svdvals(_dense(A))[-1])


def solve(system: LinearSystem) -> np.ndarray:
    A = system.dense()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            c = sla.solve(A, system.b)
    except (np.linalg.LinAlgError, sla.LinAlgWarning):
        raise SingularMatrixError("singular system", _sigma_min(A)) from None
    if not np.all(np.isfinite(c)):
        raise SingularMatrixError("singular system", _sigma_min(A))
    return c


def least_squares(S, f, dense_limit: int = 20_000_000) -> np.ndarray:
    """Minimize ``||S c - f||``; dense SVD solver for small problems, else normal equations."""
    f = np.asarray(f, dtype=float)
    M, N = S.shape
    if M < N:
        raise RankDeficientError(f"{M} samples for {N} unknowns", 0.0)
    if M * N <= dense_limit:
        c, _, rank, sv = sla.lstsq(_dense(S), f, lapack_driver="gelsd")
        if rank < N:
            raise RankDeficientError("rank-deficient collocation matrix", float(sv[-1]))
        return c
    G = _dense(S.T @ S)
    try:
        factor = sla.cho_factor(G)
    except np.linalg.LinAlgError:
        raise RankDeficientError("rank-deficient collocation matrix",
                                 float(np.sqrt(max(np.linalg.eigvalsh(G)[0], 0.0)))) from None
    return sla.cho_solve(factor, S.T @ f)


def cond2(A) -> float:
    s = sla.svdvals(_dense(A))
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf


# --- element level ---------------------------------------------------------

@dataclass
class ElementData:
    """Bernstein basis data at quadrature nodes of every triangle of a mesh."""

    points: np.ndarray    # (n_t, n_q, 2)
    weights: np.ndarray   # (n_t, n_q): area * rule weight
    values: np.ndarray    # (n_q, 10)
    grads: np.ndarray     # (n_t, n_q, 10, 2)
    hess: np.ndarray      # (n_t, n_q, 10, 2, 2)


def element_data(tri: Triangulation, rule: QuadratureRule = DEFAULT_RULE) -> ElementData:
    G = barycentric_gradients(tri)
    d1 = bernstein_dtau(rule.nodes)
    d2 = bernstein_d2tau(rule.nodes)
    return ElementData(
        quadrature_points(tri, rule),
        tri.areas[:, None] * rule.weights[None, :],
        bernstein(rule.nodes),
        np.einsum("qkc,mcx->mqkx", d1, G),
        np.einsum("qkcd,mcx,mdy->mqkxy", d2, G, G),
    )


def _blockdiag(local: np.ndarray) -> sp.csr_matrix:
    n_t = local.shape[0]
    base = 10 * np.arange(n_t)[:, None, None]
    rows = np.broadcast_to(base + np.arange(10)[None, :, None], local.shape)
    cols = np.broadcast_to(base + np.arange(10)[None, None, :], local.shape)
    return sp.csr_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(10 * n_t, 10 * n_t))


def _galerkin(bs: BasisSet, local: np.ndarray) -> sp.csr_matrix:
    C = bs.matrix
    return (C.T @ _blockdiag(local) @ C).tocsr()


def _vector(bs: BasisSet, local: np.ndarray) -> np.ndarray:
    return bs.matrix.T @ local.ravel()


def _elements(bs: BasisSet, rule: QuadratureRule) -> ElementData:
    return element_data(bs.spline_mesh, rule)


# --- geometry map -----------------------------------------------------------

@dataclass
class GeometryMap:
    """Parametrization ``P: Theta -> Omega`` with spline components on the basis' mesh."""

    x: Spline
    y: Spline

    @classmethod
    def from_function(cls, bs: BasisSet, P, jacobian) -> "GeometryMap":
        """Interpolate ``P`` (``(x, y) -> (X, Y)``) through its vertex values and gradients."""
        tri = bs.mesh
        comps = []
        for c in range(2):
            f = lambda x, y, c=c: P(x, y)[c]
            g = lambda x, y, c=c: np.stack(np.broadcast_arrays(*jacobian(x, y)[c]), axis=-1)
            comps.append(construct(tri, sample_data(tri, f, g), bs.kind))
        return cls(*comps)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, float)
        return np.stack([self.x(pts), self.y(pts)], axis=-1)

    def jacobian_at_nodes(self, rule: QuadratureRule = DEFAULT_RULE) -> np.ndarray:
        """``J[m, q] = dP/dtheta`` at the quadrature nodes, ``(n_t, n_q, 2, 2)``."""
        m = np.arange(self.x.mesh.n_triangles)[:, None]
        nodes = rule.nodes[None, :, :]
        return np.stack([self.x.gradient_bary(m, nodes), self.y.gradient_bary(m, nodes)], axis=-2)

    def map_at_nodes(self, rule: QuadratureRule = DEFAULT_RULE) -> np.ndarray:
        m = np.arange(self.x.mesh.n_triangles)[:, None]
        nodes = rule.nodes[None, :, :]
        return np.stack([self.x.eval_bary(m, nodes), self.y.eval_bary(m, nodes)], axis=-1)


def _mapped(geometry: GeometryMap | None, el: ElementData, rule: QuadratureRule,
            min_det: float = 1e-10):
    """Physical nodes, inverse Jacobians and |det J| (identity when ``geometry`` is None)."""
    n_t, n_q = el.weights.shape
    if geometry is None:
        return el.points, np.broadcast_to(np.eye(2), (n_t, n_q, 2, 2)), np.ones((n_t, n_q))
    J = geometry.jacobian_at_nodes(rule)
    det = np.linalg.det(J)
    if np.abs(det).min() < min_det:
        raise MappingError(f"|det J| = {np.abs(det).min():.3e} at a quadrature node")
    return geometry.map_at_nodes(rule), np.linalg.inv(J), np.abs(det)


# --- global matrices ----------------------------------------------------------

def gram_matrix(bs: BasisSet, rule: QuadratureRule = DEFAULT_RULE) -> sp.csr_matrix:
    el = _elements(bs, rule)
    local = np.einsum("mq,qa,qb->mab", el.weights, el.values, el.values)
    return _galerkin(bs, local)


def stiffness_matrix(bs: BasisSet, geometry: GeometryMap | None = None,
                     rule: QuadratureRule = DEFAULT_RULE) -> sp.csr_matrix:
    """``a_jk = int grad S_k . J^-1 J^-T . grad S_j |det J|`` over the parameter domain."""
    el = _elements(bs, rule)
    _, Jinv, det = _mapped(geometry, el, rule)
    pulled = np.einsum("mqkx,mqxy->mqky", el.grads, Jinv)  # J^-T grad
    local = np.einsum("mq,mqax,mqbx->mab", el.weights * det, pulled, pulled)
    return _galerkin(bs, local)


def laplacian_matrix(bs: BasisSet, rule: QuadratureRule = DEFAULT_RULE) -> sp.csr_matrix:
    """``L_jk = int (lap S_k) S_j``; rows are test functions, columns trial functions."""
    el = _elements(bs, rule)
    lap = el.hess[..., 0, 0] + el.hess[..., 1, 1]
    local = np.einsum("mq,qa,mqb->mab", el.weights, el.values, lap)
    return _galerkin(bs, local)


def hessian_penalty(bs: BasisSet, rule: QuadratureRule = DEFAULT_RULE) -> sp.csr_matrix:
    """``H_jk = int sum_ab (Hess S_k)_ab (Hess S_j)_ab``."""
    el = _elements(bs, rule)
    h = el.hess.reshape(el.hess.shape[:3] + (4,))
    local = np.einsum("mq,mqae,mqbe->mab", el.weights, h, h)
    return _galerkin(bs, local)


def load_vector(bs: BasisSet, F, geometry: GeometryMap | None = None,
                trianglewise: bool = False, rule: QuadratureRule = DEFAULT_RULE) -> np.ndarray:
    """``f_j = int F(P) S_j |det J|``; ``F(x, y)`` or, if ``trianglewise``, ``F(x, y, m)``."""
    el = _elements(bs, rule)
    X, _, det = _mapped(geometry, el, rule)
    if trianglewise:
        m = np.broadcast_to(np.arange(X.shape[0])[:, None], X.shape[:2])
        vals = F(X[..., 0], X[..., 1], m)
    else:
        vals = F(X[..., 0], X[..., 1])
    vals = np.broadcast_to(np.asarray(vals, float), X.shape[:2])
    local = np.einsum("mq,mq,qa->ma", el.weights * det, vals, el.values)
    return _vector(bs, local)


def evaluation_matrix(tri: Triangulation, points, tol: float = 1e-9) -> sp.csr_matrix:
    """Rows evaluating BB coefficients (length ``10 n_t``) at ``points``."""
    pts = np.asarray(points, float).reshape(-1, 2)
    m, bc, inside = locate(tri, pts, tol)
    if not inside.all():
        raise ValueError(f"{int((~inside).sum())} points lie outside the triangulation")
    rows = np.repeat(np.arange(len(pts)), 10)
    cols = (10 * m[:, None] + np.arange(10)).ravel()
    return sp.csr_matrix((bernstein(bc).ravel(), (rows, cols)), shape=(len(pts), 10 * tri.n_triangles))


def collocation_matrix(bs: BasisSet, points) -> sp.csr_matrix:
    """``S_dk = S_k(p_d)``."""
    return (evaluation_matrix(bs.spline_mesh, points) @ bs.matrix).tocsr()


def smoothness_matrix(bs: BasisSet) -> sp.csr_matrix:
    """``E_lk = xi_l(S_k)`` over interior edges of the spline mesh."""
    return (xi_matrix(bs.spline_mesh) @ bs.matrix).tocsr()


# --- point sets ---------------------------------------------------------------

@dataclass
class PointSample:
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, float).reshape(-1, 2)
        self.values = np.asarray(self.values, float).ravel()
        if len(self.points) != len(self.values):
            raise ValueError("points and values differ in length")

    @classmethod
    def from_function(cls, points, f) -> "PointSample":
        pts = np.asarray(points, float).reshape(-1, 2)
        return cls(pts, f(pts[:, 0], pts[:, 1]))


def uniform_grid(m: int, lo=(0.0, 0.0), hi=(1.0, 1.0)) -> np.ndarray:
    xs = np.linspace(lo[0], hi[0], m)
    ys = np.linspace(lo[1], hi[1], m)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def boundary_points(tri: Triangulation, M: int) -> np.ndarray:
    """``M`` points equally spaced by arc length along the boundary, starting at a vertex."""
    loop = boundary_loop(tri)
    P = tri.vertices[np.append(loop, loop[0])]
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.arange(M) * arc[-1] / M
    k = np.clip(np.searchsorted(arc, s, side="right") - 1, 0, len(seg) - 1)
    t = (s - arc[k]) / seg[k]
    return P[k] + t[:, None] * (P[k + 1] - P[k])


def boundary_edge_points(tri: Triangulation, per_edge: int = 100) -> np.ndarray:
    """``per_edge`` points at the interval midpoints of every boundary edge."""
    E = tri.edges[tri.boundary_edges]
    t = (np.arange(per_edge) + 0.5) / per_edge
    A, B = tri.vertices[E[:, 0]], tri.vertices[E[:, 1]]
    return (A[:, None, :] + t[None, :, None] * (B - A)[:, None, :]).reshape(-1, 2)


# --- solvers ------------------------------------------------------------------

def best_l2(bs: BasisSet, F, rule: QuadratureRule = DEFAULT_RULE, return_system: bool = False):
    """Continuous best L2 approximation of ``F(x, y)``."""
    system = LinearSystem(gram_matrix(bs, rule), load_vector(bs, F, rule=rule))
    s = bs.from_coefficients(solve(system))
    return (s, system) if return_system else s


def discrete_l2(bs: BasisSet, sample: PointSample, return_system: bool = False):
    """Least squares fit to point values."""
    S = collocation_matrix(bs, sample.points)
    c = least_squares(S, sample.values)
    if return_system:
        return bs.from_coefficients(c), LinearSystem((S.T @ S).tocsr(), S.T @ sample.values)
    return bs.from_coefficients(c)


def penalized_fit(bs: BasisSet, sample: PointSample, lam: float, return_system: bool = False):
    """Solve ``(S^T S + lam H) c = S^T f`` with the Hessian energy ``H``."""
    if lam < 0:
        raise ValueError("penalty must be nonnegative")
    S = collocation_matrix(bs, sample.points)
    if lam == 0:
        return discrete_l2(bs, sample, return_system)
    system = LinearSystem((S.T @ S + lam * hessian_penalty(bs)).tocsr(), S.T @ sample.values)
    s = bs.from_coefficients(solve(system))
    return (s, system) if return_system else s


@dataclass
class FemResult:
    spline: Spline
    system: LinearSystem
    coefficients: np.ndarray
    lift: np.ndarray


def fem(bs: BasisSet, F, G, geometry: GeometryMap | None = None, per_edge: int = 100,
        trianglewise: bool = False, rule: QuadratureRule = DEFAULT_RULE) -> FemResult:
    """Galerkin solution of ``-lap u = F`` on ``P(Theta)`` with ``u = G`` on the boundary.

    ``F`` and ``G`` take physical coordinates.  The boundary lift is a least
    squares fit of ``G o P`` by the boundary-active functions at
    ``per_edge`` points per boundary edge of the parameter mesh.
    """
    n, N = bs.n, bs.N
    theta = boundary_edge_points(bs.mesh, per_edge)
    phys = theta if geometry is None else geometry(theta)
    S = collocation_matrix(bs, theta)[:, n:]
    c0 = least_squares(S, G(phys[:, 0], phys[:, 1]))
    K = stiffness_matrix(bs, geometry, rule)
    f = load_vector(bs, F, geometry, trianglewise, rule)
    system = LinearSystem(K[:n, :n], f[:n] - K[:n, n:] @ c0)
    c = np.concatenate([solve(system), c0])
    return FemResult(bs.from_coefficients(c), system, c, c0)


def fem_solve(bs: BasisSet, F, G, geometry: GeometryMap | None = None, **kw) -> Spline:
    return fem(bs, F, G, geometry, **kw).spline


def ipbm(bs: BasisSet, F, G, boundary: np.ndarray, lam: float = 1.0, mu: float = 1.0,
         smoothness_term: bool | None = None, trianglewise: bool = False,
         rule: QuadratureRule = DEFAULT_RULE, return_system: bool = False):
    """Immersed penalized boundary method for ``-lap u = F``, ``u = G`` at ``boundary`` points.

    The C1 penalty is dropped for S3 unless ``smoothness_term`` is forced on.
    """
    if lam <= 0 or mu < 0:
        raise ValueError("need lam > 0 and mu >= 0")
    if smoothness_term is None:
        smoothness_term = bs.kind is not MacroKind.S3
    L = laplacian_matrix(bs, rule)
    f = load_vector(bs, F, trianglewise=trianglewise, rule=rule)
    pts = np.asarray(boundary, float).reshape(-1, 2)
    S = collocation_matrix(bs, pts)
    g = G(pts[:, 0], pts[:, 1])
    A = L.T @ L + lam * (S.T @ S)
    if smoothness_term and mu > 0:
        E = smoothness_matrix(bs)
        A = A + mu * (E.T @ E)
    system = LinearSystem(A.tocsr(), -(L.T @ f) + lam * (S.T @ g))
    s = bs.from_coefficients(solve(system))
    return (s, system) if return_system else s


def ipbm_objective(bs: BasisSet, c, F, G, boundary, lam: float, mu: float,
                   rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Value of the minimized functional at coefficient vector ``c`` (smoothness term included)."""
    L = laplacian_matrix(bs, rule)
    f = load_vector(bs, F, rule=rule)
    pts = np.asarray(boundary, float).reshape(-1, 2)
    S = collocation_matrix(bs, pts)
    E = smoothness_matrix(bs)
    r = L @ c + f
    d = G(pts[:, 0], pts[:, 1]) - S @ c
    x = E @ c
    return float(r @ r + lam * d @ d + mu * x @ x)


# --- errors -----------------------------------------------------------------------

def grid_error(s: Spline, exact, grid: int = 401, geometry: GeometryMap | None = None) -> float:
    """Max ``|s - exact|`` on a ``grid x grid`` lattice over the mesh bounding box.

    With ``geometry`` the lattice lives in the parameter domain and ``exact``
    is evaluated at the mapped points.
    """
    if grid < 2:
        raise ValueError("grid must have at least 2 points per side")
    V = s.mesh.vertices
    pts = uniform_grid(grid, V.min(axis=0), V.max(axis=0))
    m, bc, inside = locate(s.mesh, pts)
    pts, m, bc = pts[inside], m[inside], bc[inside]
    approx = s.eval_bary(m, bc)
    phys = pts if geometry is None else np.column_stack([geometry.x.eval_bary(m, bc),
                                                         geometry.y.eval_bary(m, bc)])
    return float(np.abs(approx - exact(phys[:, 0], phys[:, 1])).max())


def pointwise_error(s: Spline, exact, points) -> float:
    """Max ``|s - exact|`` at ``points`` (which must lie in the mesh)."""
    pts = np.asarray(points, float).reshape(-1, 2)
    m, bc, inside = locate(s.mesh, pts)
    if not inside.all():
        raise ValueError("error points outside the triangulation")
    return float(np.abs(s.eval_bary(m, bc) - exact(pts[:, 0], pts[:, 1])).max())
