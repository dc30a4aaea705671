import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from macrospline import bbform
from macrospline.bbform import (DEFAULT_RULE, INDEX, MULTI_INDICES, Spline, bernstein,
                                bernstein_eval, integrate, vertex_interpolation_coeffs)
from macrospline.harness import unit_square_grid
from macrospline.mesh import build

from conftest import random_polynomial
from oracles import bb_coefficients, monomial_integral, oracle_integrate

UNIT = build([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])


def single(coeffs, tri=UNIT):
    return Spline(tri, np.asarray(coeffs, float).reshape(1, 10))


def test_multi_index_order():
    assert [tuple(d) for d in MULTI_INDICES] == [
        (3, 0, 0), (2, 1, 0), (2, 0, 1), (1, 2, 0), (1, 1, 1),
        (1, 0, 2), (0, 3, 0), (0, 2, 1), (0, 1, 2), (0, 0, 3)]


def test_bernstein_examples():
    assert bernstein_eval((3, 0, 0), (1, 0, 0)) == 1
    third = (1 / 3,) * 3
    assert sum(bernstein_eval(d, third) for d in MULTI_INDICES) == pytest.approx(1, abs=1e-15)
    assert bernstein_eval((1, 1, 1), third) == pytest.approx(2 / 9, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_bernstein_partition_of_unity(a, b):
    bc = np.array([a, b, 1 - a - b])
    assert abs(bernstein(bc).sum() - 1) <= 1e-13 * max(1, np.abs(bc).max() ** 3)


def test_constant_patch():
    s = single(np.full(10, 2.5))
    assert bbform.patch_eval(s, 0, (0.2, 0.3)) == pytest.approx(2.5)
    np.testing.assert_allclose(bbform.patch_gradient(s, 0, (0.2, 0.3)), 0, atol=1e-14)


def test_linear_x_patch(rng):
    coeffs = [d[1] / 3 for d in MULTI_INDICES]  # value of x at domain points
    s = single(coeffs)
    for p in rng.random((20, 2)) * 0.5:
        assert bbform.patch_eval(s, 0, p) == pytest.approx(p[0], abs=1e-15)
        np.testing.assert_allclose(bbform.patch_gradient(s, 0, p), [1, 0], atol=1e-14)
        np.testing.assert_allclose(bbform.patch_hessian(s, 0, p), 0, atol=1e-13)


def test_x_squared_hessian():
    corners = UNIT.vertices
    s = single(bb_coefficients(lambda x, y: x * x, corners))
    np.testing.assert_allclose(bbform.patch_hessian(s, 0, (0.3, 0.2)), [[2, 0], [0, 0]], atol=1e-12)


def _random_cubic_patch(rng):
    base = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.85]])
    tri = build(base + 0.15 * rng.standard_normal((3, 2)), [[0, 1, 2]], check_euler=False)
    f = random_polynomial(rng, 3)
    return tri, f, single(bb_coefficients(f, tri.corners(0)), tri)


def test_patch_eval_vs_monomial_oracle(rng):
    for _ in range(5):
        tri, f, s = _random_cubic_patch(rng)
        bc = rng.dirichlet(np.ones(3), 100)
        P = bc @ tri.corners(0)
        vals = np.array([bbform.patch_eval(s, 0, p) for p in P])
        np.testing.assert_allclose(vals, f(P[:, 0], P[:, 1]), atol=1e-12, rtol=0)
        casteljau = np.array([s.de_casteljau(0, p) for p in P])
        np.testing.assert_allclose(vals, casteljau, atol=1e-13 * max(1, np.abs(vals).max()))


def test_gradient_and_hessian_vs_finite_differences(rng):
    tri, f, s = _random_cubic_patch(rng)
    p = tri.vertices.mean(axis=0)
    h = 1e-6
    fd = np.array([(f(p[0] + h, p[1]) - f(p[0] - h, p[1])) / (2 * h),
                   (f(p[0], p[1] + h) - f(p[0], p[1] - h)) / (2 * h)])
    g = bbform.patch_gradient(s, 0, p)
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6 * np.abs(fd).max())
    h = 1e-4
    H = np.empty((2, 2))
    e = np.eye(2) * h
    for a in range(2):
        for b in range(2):
            H[a, b] = (f(*(p + e[a] + e[b])) - f(*(p + e[a] - e[b]))
                       - f(*(p - e[a] + e[b])) + f(*(p - e[a] - e[b]))) / (4 * h * h)
    Hs = bbform.patch_hessian(s, 0, p)
    np.testing.assert_allclose(Hs, H, rtol=1e-5, atol=1e-5 * np.abs(H).max())
    np.testing.assert_allclose(Hs, Hs.T, atol=1e-12)


def test_affine_invariance(rng):
    c = rng.standard_normal(10)
    corners = rng.random((3, 2))
    tri = build(corners, [[0, 1, 2]], check_euler=False)
    if not np.array_equal(tri.triangles[0], [0, 1, 2]):
        corners = corners[tri.triangles[0]]
        tri = build(corners, [[0, 1, 2]], check_euler=False)
    A = np.array([[2.0, 0.3], [-0.4, 1.5]])
    t = np.array([3.0, -1.0])
    tri2 = build(corners @ A.T + t, [[0, 1, 2]], check_euler=False)
    p = corners.mean(axis=0) + 0.05
    v1 = bbform.patch_eval(single(c, tri), 0, p)
    v2 = bbform.patch_eval(single(c, tri2), 0, A @ p + t)
    assert v1 == pytest.approx(v2, abs=1e-12)


def test_rule_exact_to_degree_8():
    rule = DEFAULT_RULE
    assert rule.degree >= 8
    assert abs(rule.weights.sum() - 1) < 1e-15
    x, y = rule.nodes[:, 1], rule.nodes[:, 2]  # reference triangle (0,0),(1,0),(0,1)
    for a in range(9):
        for b in range(9 - a):
            approx = 0.5 * rule.weights @ (x ** a * y ** b)
            assert approx == pytest.approx(monomial_integral(a, b), abs=1e-14)


def test_rule_not_exact_to_degree_9_or_more():
    # sanity: the check above has teeth
    rule = DEFAULT_RULE
    x, y = rule.nodes[:, 1], rule.nodes[:, 2]
    worst = max(abs(0.5 * rule.weights @ (x ** a * y ** (12 - a)) - monomial_integral(a, 12 - a))
                for a in range(13))
    assert worst > 1e-10


def test_integrate_constant_and_bernstein(mesh16):
    assert integrate(lambda x, y: np.ones_like(x), mesh16) == pytest.approx(1, abs=1e-14)
    tri = build([[0.1, 0.2], [0.9, 0.1], [0.4, 0.8]], [[0, 1, 2]], check_euler=False)
    e = np.zeros(10)
    e[INDEX[3, 0, 0]] = 1
    s = single(e, tri)
    area = tri.areas[0]
    assert integrate(s, tri) == pytest.approx(area / 10, rel=1e-14)
    oracle = oracle_integrate(lambda x, y: s(np.column_stack([x, y])), tri.vertices, n=8)
    assert oracle == pytest.approx(area / 10, rel=1e-13)


def test_integrate_product_of_cubics(rng):
    tri, f, s = _random_cubic_patch(rng)
    g = random_polynomial(rng, 3)
    got = integrate(lambda x, y: f(x, y) * g(x, y), tri)
    ref = oracle_integrate(lambda x, y: f(x, y) * g(x, y), tri.vertices, n=7)  # degree 13
    assert got == pytest.approx(ref, rel=1e-13, abs=1e-14)


def test_integrate_trianglewise(mesh16):
    got = integrate(lambda x, y, m: np.where(m % 2 == 0, 1.0, 0.0), mesh16, trianglewise=True)
    assert got == pytest.approx(mesh16.areas[::2].sum(), abs=1e-14)


def test_integrate_zero_gradient_term(mesh16, rng):
    s = Spline(mesh16, rng.standard_normal((20, 10)))
    val = integrate(lambda x, y, m: 0.0 * s.gradient_bary(m, np.full(x.shape + (3,), 1 / 3))[..., 0],
                    mesh16, trianglewise=True)
    assert val == 0.0


def test_vertex_interpolation_examples():
    v = [(0, 0), (1, 0), (0, 1)]
    np.testing.assert_allclose(vertex_interpolation_coeffs(1, (0, 0), *v), [1, 1, 1])
    np.testing.assert_allclose(vertex_interpolation_coeffs(0, (1, 0), *v), [0, 1 / 3, 0])
    np.testing.assert_allclose(vertex_interpolation_coeffs(2, (1, 1), *v), [2, 7 / 3, 7 / 3])


def test_spline_constructor_validates():
    with pytest.raises(ValueError):
        Spline(UNIT, np.zeros((2, 10)))
    with pytest.raises(ValueError):
        Spline(UNIT, np.zeros((1, 10)), "C2")


def test_json_roundtrip(rng):
    tri = unit_square_grid(3)
    s = Spline(tri, rng.standard_normal((tri.n_triangles, 10)), "C1")
    back = bbform.spline_from_json(bbform.spline_to_json(s))
    np.testing.assert_array_equal(back.coeffs, s.coeffs)
    assert back.smoothness == "C1"
    P = rng.random((50, 2))
    np.testing.assert_array_equal(back(P), s(P))


def test_spline_call_forms(mesh16, rng):
    s = Spline(mesh16, rng.standard_normal((20, 10)))
    P = rng.random((7, 2))
    np.testing.assert_array_equal(s(P), s(P[:, 0], P[:, 1]))
    assert s(P.reshape(7, 1, 2)).shape == (7, 1)
