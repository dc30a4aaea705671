import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from macrospline.approx import boundary_points, collocation_matrix, uniform_grid
from macrospline.basis import (FrameError, build_basis, build_frame, frame_containment,
                               frame_points, min_area_triangle)
from macrospline.harness import builtin_mesh, unit_square_grid
from macrospline.mesh import build

from conftest import random_points_in
from oracles import min_triangle_area_oracle

KINDS = ["s1", "s2", "s3"]


@pytest.fixture(scope="module")
def bases():
    tri = builtin_mesh("unit_square_16")
    return {k: build_basis(tri, k) for k in KINDS}


def tri_area(T):
    a, b, c = T
    return 0.5 * abs((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0])


# --- frames -----------------------------------------------------------------------

@pytest.mark.parametrize("name", ["unit_square_16", "unit_square_grid_4"])
def test_frames_contain_required_points(name):
    tri = builtin_mesh(name)
    for i in range(tri.n_vertices):
        f = build_frame(tri, i)
        assert f.area() > 0
        assert frame_containment(f, frame_points(tri, i)) >= -1e-12
        L = f.barycentric_matrix
        vals = L[:, 0][:, None] + L[:, 1:] @ f.q.T
        np.testing.assert_allclose(vals, np.eye(3), atol=1e-12)


def test_interior_grid_vertex_has_seven_points():
    tri = unit_square_grid(4)
    inner = np.flatnonzero(~tri.boundary_vertices)
    for i in inner:
        pts = frame_points(tri, i)
        assert len(pts) == 7
        assert frame_containment(build_frame(tri, i), pts) >= -1e-12


def test_omega_dilation(mesh16):
    for i in (0, 5, 11):
        f1, f2 = build_frame(mesh16, i), build_frame(mesh16, i, omega=2.0)
        np.testing.assert_allclose(np.linalg.norm(f2.q - f2.vertex, axis=1),
                                   2 * np.linalg.norm(f1.q - f1.vertex, axis=1), rtol=1e-14)
    with pytest.raises(FrameError):
        build_frame(mesh16, 0, omega=0.0)


def test_straight_boundary_frames(mesh16):
    for i in np.flatnonzero(mesh16.boundary_vertices):
        f = build_frame(mesh16, i)
        v = mesh16.vertices[i]
        corner = np.isclose(v, 0).sum() + np.isclose(v, 1).sum() == 2
        assert f.boundary_aligned != corner
        if f.boundary_aligned:
            axis = 0 if np.isclose(v[0], 0) or np.isclose(v[0], 1) else 1
            np.testing.assert_allclose(f.q[1:, axis], v[axis], atol=1e-14)
            assert abs(f.q[0, axis] - v[axis]) > 1e-3


def test_min_area_three_points():
    P = np.array([[0.0, 0.0], [2.0, 0.1], [0.3, 1.7]])
    T = min_area_triangle(P)
    assert tri_area(T) == pytest.approx(tri_area(P), rel=1e-14)


def test_min_area_square():
    # unit square: optimum is 2 (a known closed form)
    P = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    assert tri_area(min_area_triangle(P)) == pytest.approx(2.0, rel=1e-12)


def test_min_area_segment_fallback():
    P = np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]])
    T = min_area_triangle(P)
    from macrospline.mesh import barycentric_in
    assert barycentric_in(*T, P).min() >= -1e-12
    with pytest.raises(FrameError):
        min_area_triangle(np.zeros((3, 2)))


@pytest.mark.slow
def test_min_area_against_oracle():
    rng = np.random.default_rng(7)
    for _ in range(6):
        P = rng.standard_normal((rng.integers(4, 10), 2))
        got = tri_area(min_area_triangle(P))
        want = min_triangle_area_oracle(P)
        assert got <= want * (1 + 1e-9)
        assert got >= want * (1 - 1e-9)


def test_isolated_vertex_rejected():
    # a vertex without edges never reaches frame construction
    from macrospline.mesh import MeshError
    with pytest.raises(MeshError):
        build([[0, 0], [1, 0], [0, 1], [5, 5]], [[0, 1, 2]])


# --- basis functions ---------------------------------------------------------------

def test_counts(bases):
    for bs in bases.values():
        assert bs.N == 48 and bs.n == 24
        assert sorted(bs.perm.tolist()) == list(range(48))


@pytest.mark.parametrize("kind", KINDS)
def test_duality(bases, kind):
    bs = bases[kind]
    D = np.column_stack([bs.to_coefficients(bs.basis_function(k)) for k in range(bs.N)])
    np.testing.assert_allclose(D, np.eye(bs.N), atol=1e-11)


@pytest.mark.parametrize("kind", KINDS)
def test_partition_and_greville(bases, kind, rng):
    bs = bases[kind]
    P = random_points_in(bs.mesh, rng, 1000)
    S = collocation_matrix(bs, P)
    np.testing.assert_allclose(S @ np.ones(bs.N), 1.0, atol=1e-12)
    np.testing.assert_allclose(S @ bs.greville, P, atol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_support(bases, kind):
    bs = bases[kind]
    tri = bs.mesh
    for k in range(0, bs.N, 5):
        i, _ = bs.vertex_and_r(k)
        ring = set(np.flatnonzero((tri.triangles == i).any(axis=1)).tolist())
        allowed = set(ring)
        if kind != "s1":
            for m in ring:
                allowed |= {int(n) for n in tri.neighbors[m] if n >= 0}
        c = bs.basis_function(k).coeffs
        parent = np.arange(len(c)) // (3 if kind == "s3" else 1)
        outside = ~np.isin(parent, list(allowed))
        assert np.all(c[outside] == 0.0)


def test_s1_nonnegative(mesh16):
    bs = build_basis(mesh16, "s1", nonnegative=True)
    for k in range(bs.N):
        assert bs.basis_function(k).coeffs.min() >= -1e-14
    plain = build_basis(mesh16, "s1")
    assert min(plain.basis_function(k).coeffs.min() for k in range(plain.N)) < 0


def test_dual_functional_examples(bases):
    bs = bases["s1"]
    assert bs.dual_functional(0, 2.5, (0.0, 0.0)) == 2.5
    i, r = bs.vertex_and_r(0)
    d = bs.frames[i].q[r] - bs.frames[i].vertex
    assert bs.dual_functional(0, 1.0, (1.0, 0.0)) == pytest.approx(1.0 + d[0], abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(KINDS))
def test_round_trip(seed, kind):
    bs = build_basis(builtin_mesh("unit_square_16"), kind)
    c = np.random.default_rng(seed).standard_normal(bs.N)
    np.testing.assert_allclose(bs.to_coefficients(bs.from_coefficients(c)), c, atol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_superposition_matches_sum(bases, kind, rng):
    bs = bases[kind]
    c = rng.standard_normal(bs.N)
    P = random_points_in(bs.mesh, rng, 100)
    total = sum(c[k] * bs.basis_function(k)(P) for k in range(bs.N))
    np.testing.assert_allclose(bs.from_coefficients(c)(P), total, atol=1e-11)


@pytest.mark.parametrize("kind", KINDS)
def test_boundary_split(bases, kind):
    bs = bases[kind]
    B = collocation_matrix(bs, boundary_points(bs.mesh, 50)).toarray()
    assert np.abs(B[:, :bs.n]).max() < 1e-12
    dense = collocation_matrix(bs, boundary_points(bs.mesh, 400)).toarray()
    assert np.linalg.matrix_rank(dense[:, bs.n:]) == bs.N - bs.n


def test_frames_csv(bases):
    text = bases["s2"].frames_csv().strip().splitlines()
    assert text[0].startswith("vertex,vx,vy,q0x")
    assert len(text) == 17
    row = [float(x) for x in text[6].split(",")]
    f = bases["s2"].frames[5]
    np.testing.assert_array_equal(row[3:9], f.q.ravel())


def test_wrong_coefficient_length(bases):
    with pytest.raises(ValueError):
        bases["s1"].from_coefficients(np.ones(47))
