import numpy as np
import pytest

from macrospline.harness import builtin_mesh
from macrospline.mesh import build

MESH10_VERTICES = [[0, 0], [1, 0], [1, 1], [0, 1], [0.3, 0.25], [0.72, 0.35], [0.6, 0.78], [0.22, 0.62]]
MESH10_TRIANGLES = [[2, 5, 1], [7, 3, 0], [4, 7, 0], [7, 4, 5], [1, 4, 0], [5, 4, 1],
                    [6, 5, 2], [6, 7, 5], [3, 6, 2], [7, 6, 3]]


@pytest.fixture(scope="session")
def mesh16():
    return builtin_mesh("unit_square_16")


@pytest.fixture(scope="session")
def mesh10():
    return build(MESH10_VERTICES, MESH10_TRIANGLES)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_polynomial(rng, degree):
    """Random bivariate polynomial of total degree ``degree`` with its gradient and Hessian."""
    exps = [(a, d - a) for d in range(degree + 1) for a in range(d, -1, -1)]
    c = rng.standard_normal(len(exps))

    def f(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return sum(ci * x ** a * y ** b for ci, (a, b) in zip(c, exps))

    def grad(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        gx = sum(ci * a * x ** max(a - 1, 0) * y ** b for ci, (a, b) in zip(c, exps) if a > 0)
        gy = sum(ci * b * x ** a * y ** max(b - 1, 0) for ci, (a, b) in zip(c, exps) if b > 0)
        z = np.zeros(np.broadcast(x, y).shape)
        return np.stack([z + gx, z + gy], axis=-1)

    def lap(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        z = np.zeros(np.broadcast(x, y).shape)
        return z + sum(ci * (a * (a - 1) * x ** max(a - 2, 0) * y ** b
                             + b * (b - 1) * x ** a * y ** max(b - 2, 0))
                       for ci, (a, b) in zip(c, exps))

    f.grad, f.lap = grad, lap
    return f


def random_points_in(tri, rng, n):
    """Uniform random points inside the triangulation."""
    w = tri.areas / tri.areas.sum()
    m = rng.choice(tri.n_triangles, size=n, p=w)
    r = rng.random((n, 2))
    flip = r.sum(axis=1) > 1
    r[flip] = 1 - r[flip]
    P = tri.vertices[tri.triangles[m]]
    return P[:, 0] + r[:, :1] * (P[:, 1] - P[:, 0]) + r[:, 1:] * (P[:, 2] - P[:, 0])


def interior_edge_samples(tri, per_edge=20):
    """For each interior edge: (edge, the two triangles, sample points)."""
    t = (np.arange(per_edge) + 0.5) / per_edge
    for e in tri.interior_edges:
        a, b = tri.vertices[tri.edges[e]]
        yield e, tri.edge_triangles[e], a + t[:, None] * (b - a)


def two_triangle_config(rng):
    """Corners of m = [vi, vj, vk] and the opposite vertex vk' across edge vi-vj."""
    vi, vj = np.array([0.0, 0.0]), np.array([1.0, 0.0])
    vi = vi + 0.1 * rng.standard_normal(2)
    vj = vj + 0.1 * rng.standard_normal(2)
    vk = np.array([rng.uniform(0.1, 0.9), rng.uniform(0.4, 1.2)])
    vkp = np.array([rng.uniform(-0.3, 1.3), -rng.uniform(0.3, 1.2)])
    return vi, vj, vk, vkp


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
