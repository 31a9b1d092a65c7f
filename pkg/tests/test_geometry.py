import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from rvlab import geometry
from rvlab.core import Polytope
from rvlab.errors import DegeneratePolytope
from rvlab.limits import set_functional_pipeline, set_functional_values

point_lists = st.lists(
    st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=1, max_size=12
)


def quad_steiner(v):
    """Oracle: adaptive quadrature of h_K(u) u / pi over the circle."""
    h = lambda th: float(np.max(v @ np.array([math.cos(th), math.sin(th)])))  # noqa: E731
    sx = integrate.quad(lambda th: h(th) * math.cos(th), 0, 2 * math.pi, limit=400)[0]
    sy = integrate.quad(lambda th: h(th) * math.sin(th), 0, 2 * math.pi, limit=400)[0]
    return np.array([sx, sy]) / math.pi


def test_unit_disk():
    v = geometry.regular_polygon(720)
    assert abs(geometry.mean_width(v) - 1.0) < 1e-4
    assert np.allclose(geometry.steiner_point(v), 0.0, atol=1e-12)


def test_segment_steiner_is_midpoint():
    x = np.array([3.0, -1.5])
    v = Polytope([[0, 0], x]).vertices
    assert np.allclose(geometry.steiner_point_exact(v), x / 2, atol=1e-12)
    assert np.allclose(geometry.steiner_point(v), x / 2, atol=1e-4)


def test_triangle_against_quadrature_oracle():
    v = Polytope([[0, 0], [4, 0], [1, 3]]).vertices
    oracle = quad_steiner(v)
    assert np.allclose(geometry.steiner_point_exact(v), oracle, atol=1e-7)
    assert np.allclose(geometry.steiner_point(v), oracle, atol=1e-3)


@given(point_lists)
def test_exact_and_quadrature_agree(pts):
    v = Polytope(np.array(pts)).vertices
    diam = 2 * geometry.sup_norm(v) + 1
    err = np.abs(geometry.steiner_point(v) - geometry.steiner_point_exact(v)).max()
    assert err <= 2 * math.pi**2 / 720**2 * diam * 10
    assert abs(geometry.mean_width(v) - geometry.exact_mean_width(v)) <= 1e-4 * diam


@given(point_lists, st.integers(-20, 20))
def test_support_function_homogeneity_exact(pts, k):
    v = np.array(pts, dtype=float)
    t = 2.0**k
    _, u = geometry.direction_grid(64)
    assert np.array_equal(geometry.support_function(t * v, u), t * geometry.support_function(v, u))


@given(point_lists, st.floats(0.01, 100))
def test_support_function_homogeneity(pts, t):
    v = np.array(pts, dtype=float)
    _, u = geometry.direction_grid(64)
    lhs = geometry.support_function(t * v, u)
    rhs = t * geometry.support_function(v, u)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-13 * t * (1 + np.abs(v).max()))


def test_steiner_containment_10k_random_polygons():
    rng = np.random.default_rng(12345)
    outside = 0
    for _ in range(10_000):
        m = rng.integers(1, 9)
        pts = rng.standard_cauchy((m, 2))
        v = Polytope(pts).vertices
        s = geometry.steiner_point(v)
        diam = 2 * geometry.sup_norm(v - v.mean(axis=0))
        if not geometry.contains(v, s, tol=2 * math.pi**2 / 720**2 * diam + 1e-9):
            outside += 1
        if not geometry.contains(v, geometry.steiner_point_exact(v), tol=1e-9 * (1 + diam)):
            outside += 1
    assert outside == 0


def test_area_perimeter():
    sq = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float)
    assert geometry.area(sq) == 4.0
    assert geometry.perimeter(sq) == 8.0
    assert geometry.perimeter(np.array([[0, 0], [3, 4]], dtype=float)) == 10.0
    assert abs(geometry.exact_mean_width(sq) - 8 / (2 * math.pi)) < 1e-15


def test_inscribed_radius_and_degenerate():
    sq = Polytope([[-1, -1], [1, -1], [1, 1], [-1, 1]])
    assert abs(geometry.inscribed_radius(sq.vertices) - 1.0) < 1e-12
    with pytest.raises(DegeneratePolytope):
        set_functional_values([Polytope([[0, 0], [1, 1]])], ["inscribed_radius"])


def test_pipeline_on_disks():
    K = [Polytope(geometry.regular_polygon(64, r)) for r in np.linspace(1, 50, 200)]
    report, vals = set_functional_pipeline(K, k=50)
    assert report["steiner_containment"]["pass"]
    assert np.allclose(vals["steiner"], 0.0, atol=1e-9)
    assert np.allclose(vals["v2"], [geometry.area(k.vertices) for k in K])
