"""Experiment drivers: builtin meshes, test functions and CSV reports."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field

import numpy as np

from . import approx
from .basis import build_basis
from .macro import MacroKind
from .mesh import Triangulation, build, load_mesh, longest_edge, refine_midpoint


class ConfigError(ValueError):
    pass


# --- meshes -------------------------------------------------------------------

# 16 vertices, 35 edges, 20 triangles, 10 boundary edges of the unit square
UNIT_SQUARE_16_VERTICES = [
    [0, 0], [1, 0], [1, 1], [0, 1], [0.35, 0], [0.7, 0], [1, 0.45], [0.65, 1],
    [0.3, 1], [0, 0.55], [0.25, 0.25], [0.6, 0.3], [0.82, 0.68], [0.5, 0.65],
    [0.2, 0.75], [0.45, 0.45],
]
UNIT_SQUARE_16_TRIANGLES = [
    [4, 10, 0], [5, 11, 4], [6, 11, 1], [7, 12, 2], [8, 13, 7], [9, 10, 15], [9, 14, 3],
    [10, 9, 0], [10, 11, 15], [11, 5, 1], [11, 10, 4], [11, 13, 15], [12, 6, 2], [12, 11, 6],
    [12, 13, 11], [13, 12, 7], [13, 14, 15], [14, 8, 3], [14, 9, 15], [14, 13, 8],
]


def unit_square_grid(k: int) -> Triangulation:
    """``k x k`` uniform vertices, each cell cut along its rising diagonal."""
    if k < 2:
        raise ConfigError("grid mesh needs k >= 2")
    t = np.linspace(0.0, 1.0, k)
    X, Y = np.meshgrid(t, t, indexing="xy")
    V = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(k * k).reshape(k, k)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, 1:].ravel(), idx[1:, :-1].ravel()
    T = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return build(V, T)


def builtin_mesh(name: str) -> Triangulation:
    if name == "unit_square_16":
        return build(UNIT_SQUARE_16_VERTICES, UNIT_SQUARE_16_TRIANGLES)
    m = re.fullmatch(r"unit_square_grid_(\d+)", name)
    if m:
        return unit_square_grid(int(m.group(1)))
    raise ConfigError(f"unknown builtin mesh {name!r}")


def get_mesh(spec: str) -> Triangulation:
    """Builtin name or path of a JSON mesh file."""
    if spec.endswith(".json"):
        return load_mesh(spec)
    return builtin_mesh(spec)


def mesh_sequence(base: Triangulation, levels: int) -> list[Triangulation]:
    out = [base]
    for _ in range(levels - 1):
        out.append(refine_midpoint(out[-1]))
    return out


# --- test functions -------------------------------------------------------------

def franke(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return (0.75 * np.exp(-0.25 * (9 * x - 2) ** 2 - 0.25 * (9 * y - 2) ** 2)
            + 0.75 * np.exp(-(9 * x + 1) ** 2 / 49 - (9 * y + 1) / 10)
            + 0.5 * np.exp(-0.25 * (9 * x - 7) ** 2 - 0.25 * (9 * y - 3) ** 2)
            - 0.2 * np.exp(-(9 * x - 4) ** 2 - (9 * y - 7) ** 2))


def sin_solution(x, y):
    return np.sin(2 * np.pi * (1 - np.asarray(x, float)) * (1 - np.asarray(y, float)))


def sin_forcing(x, y):
    """``-lap`` of :func:`sin_solution`: ``4 pi^2 sin(w) ((1-x)^2 + (1-y)^2)``, ``w = 2 pi (1-x)(1-y)``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    w = 2 * np.pi * (1 - x) * (1 - y)
    return 4 * np.pi ** 2 * np.sin(w) * ((1 - x) ** 2 + (1 - y) ** 2)


def _unit(x, y):
    return np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)


def _zero(x, y):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


# name -> (forcing F, exact solution = boundary data G)
PROBLEMS = {"sin": (sin_forcing, sin_solution), "constant": (_zero, _unit)}


# Substitute curved domain: a quadratic map of the unit square into itself.
MAP_BEND = 0.1


def curved_map(x, y):
    k = MAP_BEND
    x, y = np.asarray(x, float), np.asarray(y, float)
    return ((1 - 2 * k) * x + k * (2 * y - 1) ** 2, (1 - 2 * k) * y + k * (2 * x - 1) ** 2)


def curved_map_jacobian(x, y):
    """Rows are the gradients of the two components."""
    k = MAP_BEND
    x, y = np.asarray(x, float), np.asarray(y, float)
    z = np.zeros(np.broadcast(x, y).shape)
    return ((z + 1 - 2 * k, 4 * k * (2 * y - 1)), (4 * k * (2 * x - 1), z + 1 - 2 * k))


# --- configuration and reports -----------------------------------------------------

COLUMNS = ["space", "level", "h", "N", "n", "error", "cond", "order"]
SPACES = ("s1", "s2", "s3")
LAMBDA_GRID = tuple(10.0 ** np.arange(-8, 3))
DEFAULT_OMEGAS = tuple(sorted({round(w, 6) for w in np.linspace(0.2, 6.0, 30)} | {0.5, 1.0, 2.0, 4.0}))


@dataclass
class ExperimentConfig:
    mesh: str = "unit_square_16"
    spaces: tuple = SPACES
    levels: int = 4
    omega: float = 1.0
    lam: float | None = 1.0
    mu: float = 1.0
    nu: float = 0.25
    boundary_points: int = 800
    grid: int = 401
    samples: int = 201
    level: int = 1
    seed: int = 0
    cond: bool = True
    curved: bool = False
    method: str = "l2"
    problem: str = "sin"
    omegas: tuple = DEFAULT_OMEGAS
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.spaces, str):
            self.spaces = SPACES if self.spaces == "all" else tuple(self.spaces.split(","))
        for s in self.spaces:
            MacroKind.parse(s)
        if self.levels < 1:
            raise ConfigError("levels must be at least 1")
        if self.grid < 2:
            raise ConfigError("grid must be at least 2")
        if self.nu < 0:
            raise ConfigError("nu must be nonnegative")
        if self.omega <= 0 or any(w <= 0 for w in self.omegas):
            raise ConfigError("omega must be positive")
        if self.lam is not None and self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.mu < 0:
            raise ConfigError("mu must be nonnegative")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.boundary_points < 3 or self.samples < 2 or self.level < 0:
            raise ConfigError("invalid sample counts or level")


def add_orders(rows: list[dict]) -> list[dict]:
    """Fill ``order = log2(e_prev / e)`` between consecutive levels of each space."""
    prev = {}
    for r in rows:
        key = (r["space"],) + tuple((k, r[k]) for k in ("omega", "lambda", "nu", "method") if k in r)
        e = r.get("error")
        p = prev.get(key)
        if p is not None and p[0] == r["level"] - 1 and e and p[1]:
            r["order"] = float(np.log2(p[1] / e))
        prev[key] = (r["level"], e)
    return rows


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return f"{v:.6e}"
    return str(v)


def to_csv(rows: list[dict], meta: dict | None = None) -> str:
    extra = [k for r in rows for k in r if k not in COLUMNS]
    extra = list(dict.fromkeys(extra))
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS + extra)
    for r in rows:
        w.writerow([_fmt(r.get(k)) for k in COLUMNS + extra])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _row(space, level, tri, bs, error, A, cfg) -> dict:
    return {
        "space": space, "level": level, "h": longest_edge(tri), "N": bs.N, "n": bs.n,
        "error": error, "cond": approx.cond2(A) if cfg.cond else None,
    }


def _levels(cfg) -> list[Triangulation]:
    return mesh_sequence(get_mesh(cfg.mesh), cfg.levels)


def cmd_l2(cfg: ExperimentConfig) -> list[dict]:
    """Best L2 approximation of the Franke function."""
    rows = []
    for space in cfg.spaces:
        for level, tri in enumerate(_levels(cfg)):
            bs = build_basis(tri, space, cfg.omega)
            s, sys_ = approx.best_l2(bs, franke, return_system=True)
            rows.append(_row(space, level, tri, bs, approx.grid_error(s, franke, cfg.grid), sys_.A, cfg))
    return add_orders(rows)


def _grid_sample(cfg, noise=None) -> approx.PointSample:
    pts = approx.uniform_grid(cfg.samples)
    vals = franke(pts[:, 0], pts[:, 1])
    if noise is not None:
        vals = vals + noise
    return approx.PointSample(pts, vals)


def cmd_lsq(cfg: ExperimentConfig) -> list[dict]:
    """Discrete least squares fit of Franke values on a uniform sample grid."""
    sample = _grid_sample(cfg)
    rows = []
    for space in cfg.spaces:
        for level, tri in enumerate(_levels(cfg)):
            bs = build_basis(tri, space, cfg.omega)
            s, sys_ = approx.discrete_l2(bs, sample, return_system=True)
            rows.append(_row(space, level, tri, bs, approx.grid_error(s, franke, cfg.grid), sys_.A, cfg))
    return add_orders(rows)


def noise(cfg: ExperimentConfig, size: int) -> np.ndarray:
    return np.random.default_rng(cfg.seed).uniform(-cfg.nu, cfg.nu, size)


def cmd_pfit(cfg: ExperimentConfig) -> list[dict]:
    """Penalized fit of noisy Franke data on one mesh level, for one or a grid of penalties."""
    tri = mesh_sequence(get_mesh(cfg.mesh), cfg.level + 1)[-1]
    sample = _grid_sample(cfg, noise(cfg, cfg.samples ** 2))
    lams = LAMBDA_GRID if cfg.lam is None else (cfg.lam,)
    rows = []
    for space in cfg.spaces:
        bs = build_basis(tri, space, cfg.omega)
        for lam in lams:
            s, sys_ = approx.penalized_fit(bs, sample, lam, return_system=True)
            r = _row(space, cfg.level, tri, bs, approx.grid_error(s, franke, cfg.grid), sys_.A, cfg)
            r.update({"lambda": lam, "nu": cfg.nu})
            rows.append(r)
    return rows


def near_optimal_lambda(rows: list[dict]) -> dict:
    """Per space, the penalty of smallest error in a :func:`cmd_pfit` sweep."""
    best = {}
    for r in rows:
        if r["space"] not in best or r["error"] < best[r["space"]]["error"]:
            best[r["space"]] = r
    return {k: v["lambda"] for k, v in best.items()}


def _fem_rows(cfg, geometry: bool) -> list[dict]:
    F, U = PROBLEMS[cfg.problem]
    rows = []
    for space in cfg.spaces:
        for level, tri in enumerate(_levels(cfg)):
            bs = build_basis(tri, space, cfg.omega)
            gmap = (approx.GeometryMap.from_function(bs, curved_map, curved_map_jacobian)
                    if geometry else None)
            res = approx.fem(bs, F, U, gmap)
            err = approx.grid_error(res.spline, U, cfg.grid, gmap)
            rows.append(_row(space, level, tri, bs, err, res.system.A, cfg))
    return add_orders(rows)


def cmd_fem(cfg: ExperimentConfig) -> list[dict]:
    """Galerkin solution of a manufactured Poisson problem on the parameter domain."""
    return _fem_rows(cfg, False)


def cmd_isofem(cfg: ExperimentConfig) -> list[dict]:
    """Isoparametric Galerkin solution on the curved image of the unit square."""
    return _fem_rows(cfg, True)


def mapped_grid(grid: int) -> np.ndarray:
    return np.column_stack(curved_map(*approx.uniform_grid(grid).T))


def cmd_ipbm(cfg: ExperimentConfig) -> list[dict]:
    """Immersed penalized boundary method for a manufactured Poisson problem.

    With ``curved`` the boundary points and error grid are mapped onto the
    curved domain inside the unit square.
    """
    F, U = PROBLEMS[cfg.problem]
    rows = []
    lam = 1.0 if cfg.lam is None else cfg.lam
    for space in cfg.spaces:
        for level, tri in enumerate(_levels(cfg)):
            bs = build_basis(tri, space, cfg.omega)
            pts = approx.boundary_points(tri, cfg.boundary_points)
            if cfg.curved:
                pts = np.column_stack(curved_map(*pts.T))
            s, sys_ = approx.ipbm(bs, F, U, pts, lam, cfg.mu, return_system=True)
            if cfg.curved:
                err = approx.pointwise_error(s, U, mapped_grid(cfg.grid))
            else:
                err = approx.grid_error(s, U, cfg.grid)
            rows.append(_row(space, level, tri, bs, err, sys_.A, cfg))
    return add_orders(rows)


def omega_matrix(tri: Triangulation, space: str, omega: float, method: str):
    """The matrix whose condition number the omega scan reports."""
    bs = build_basis(tri, space, omega)
    if method == "l2":
        return approx.gram_matrix(bs)
    if method == "fem":
        return approx.stiffness_matrix(bs)[: bs.n, : bs.n]
    if method == "ipbm":
        pts = approx.boundary_points(tri, 800)
        return approx.ipbm(bs, sin_forcing, sin_solution, pts, return_system=True)[1].A
    raise ConfigError(f"unknown method {method!r}")


def cmd_omega_scan(cfg: ExperimentConfig) -> list[dict]:
    """cond2 of the chosen method's matrix on the base mesh for every omega."""
    tri = get_mesh(cfg.mesh)
    rows = []
    for space in cfg.spaces:
        for w in cfg.omegas:
            A = omega_matrix(tri, space, w, cfg.method)
            rows.append({"space": space, "level": 0, "h": longest_edge(tri),
                         "N": 3 * tri.n_vertices, "n": A.shape[0] if cfg.method == "fem" else "",
                         "cond": approx.cond2(A), "omega": w, "method": cfg.method})
    return rows


def cmd_mesh_info(cfg: ExperimentConfig) -> list[dict]:
    """Counts per refinement level; ``N`` and ``n`` of the basis."""
    rows = []
    for level, tri in enumerate(_levels(cfg)):
        bs = build_basis(tri, "s1", cfg.omega)
        rows.append({"space": "", "level": level, "h": longest_edge(tri), "N": bs.N, "n": bs.n,
                     "vertices": tri.n_vertices, "edges": tri.n_edges,
                     "triangles": tri.n_triangles, "boundary_edges": tri.n_boundary_edges})
    return rows


COMMANDS = {
    "l2": cmd_l2, "lsq": cmd_lsq, "pfit": cmd_pfit, "fem": cmd_fem, "isofem": cmd_isofem,
    "ipbm": cmd_ipbm, "omega-scan": cmd_omega_scan, "mesh-info": cmd_mesh_info,
}
