import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from hull_lab.errors import DimensionMismatchError, NoSeparationError
from hull_lab.geometry import (
    PointSet,
    contains,
    convex_hull_2d,
    hull_distance,
    point_in_polygon,
    polygon_distance,
    separate,
)

TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def seg_dist(q, a, b):
    ab = b - a
    t = np.clip(np.dot(q - a, ab) / np.dot(ab, ab), 0, 1)
    return np.linalg.norm(q - a - t * ab)


def signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def test_interior_point_dropped():
    hull = convex_hull_2d([[0, 0], [1, 0], [0, 1], [0.2, 0.2]])
    got = {tuple(v) for v in hull.hull_vertices_2d}
    assert got == {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)}
    assert signed_area(hull.hull_vertices_2d) > 0


def test_segment_hull():
    v = convex_hull_2d([[1, 0], [-1, 0]]).hull_vertices_2d
    assert {tuple(p) for p in v} == {(1.0, 0.0), (-1.0, 0.0)}


def test_circle_points_all_extreme():
    t = 2 * np.pi * np.arange(100) / 100
    pts = np.column_stack([np.cos(t), np.sin(t)])
    v = convex_hull_2d(pts).hull_vertices_2d
    assert len(v) == 100
    # oracle: no point is a convex combination of the others (LP feasibility)
    for i in range(0, 100, 7):
        others = np.delete(pts, i, axis=0)
        A_eq = np.vstack([others.T, np.ones(len(others))])
        b_eq = np.append(pts[i], 1.0)
        res = linprog(np.zeros(len(others)), A_eq=A_eq, b_eq=b_eq, bounds=(0, None))
        assert res.status == 2  # infeasible


def test_collinear_points_removed():
    pts = [[0, 0], [0.5, 0], [1, 0], [1, 1], [0.5, 1], [0, 1], [0, 0.5]]
    assert len(convex_hull_2d(pts).hull_vertices_2d) == 4


def test_dimension_errors():
    with pytest.raises(DimensionMismatchError):
        convex_hull_2d(np.zeros((4, 3)))
    with pytest.raises(ValueError):
        PointSet(np.array([[0.0, np.nan]]))


def test_hull_distance_examples():
    assert hull_distance((0.2, 0.2), TRI) == pytest.approx(0.0, abs=1e-10)
    assert hull_distance((0, 1), [[1, 0], [-1, 0]]) == pytest.approx(1.0, abs=1e-10)
    # brute force over a dense barycentric grid
    s = np.linspace(0, 1, 401)
    a, b = np.meshgrid(s, s)
    keep = a + b <= 1
    cloud = np.column_stack([a[keep], b[keep]])
    brute = np.linalg.norm(cloud - [2.0, 0.0], axis=1).min()
    assert hull_distance((2, 0), [[1, 0], [0, 1], [0, 0]]) == pytest.approx(brute, abs=1e-6)
    assert brute == pytest.approx(1.0)


def test_contains_examples():
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 3.0], [0.0, 2.0]])
    assert contains(pts.mean(axis=0), pts)
    assert not contains((0, 0.5), [[1, 0], [-1, 0]], tol=1e-9)
    assert contains(pts[2], pts)


def test_separate_examples():
    w = separate((0, 1), [[1, 0], [-1, 0]])
    assert np.allclose(w.direction, [0, -1])
    assert w.threshold == pytest.approx(-0.5)
    assert w.margin == pytest.approx(0.5)

    w = separate((2, 0), [[0, 0], [1, 0], [0, 1]])
    assert np.allclose(w.direction, [-1, 0], atol=1e-9)
    assert w.threshold == pytest.approx(-1.5, abs=1e-9)
    assert w.margin == pytest.approx(0.5, abs=1e-9)

    w = separate((0, -5), [[0, 0], [1, 0], [1, 1], [0, 1]])
    assert np.allclose(w.direction, [0, 1], atol=1e-9)


def test_separate_contained_point():
    with pytest.raises(NoSeparationError):
        separate((0.2, 0.2), TRI)


coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False).map(lambda v: round(v, 6))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=3, max_size=25),
       st.tuples(coords, coords))
def test_distance_matches_polygon(points, q):
    pts = np.array(points)
    verts = convex_hull_2d(pts).hull_vertices_2d
    d_fw = hull_distance(q, pts, 1e-12)
    if len(verts) >= 3:
        d_poly = polygon_distance(np.array([q]), verts)[0]
    elif len(verts) == 2:
        d_poly = seg_dist(np.array(q), verts[0], verts[1])
    else:
        d_poly = np.linalg.norm(np.array(q) - verts[0])
    assert d_fw == pytest.approx(d_poly, abs=1e-7 * max(1.0, d_poly))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=20),
       st.tuples(coords, coords))
def test_separation_witness(points, q):
    pts = np.array(points)
    if hull_distance(q, pts, 1e-12) < 1e-6:
        return
    w = separate(q, pts)
    assert np.linalg.norm(w.direction) == pytest.approx(1.0)
    assert np.all(pts @ w.direction >= w.threshold - 1e-9)
    assert np.dot(w.direction, q) <= w.threshold - w.margin + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=3, max_size=20))
def test_hull_is_ccw_and_covers(points):
    pts = np.array(points)
    hull = convex_hull_2d(pts)
    v = hull.hull_vertices_2d
    if len(v) < 3:
        return
    assert signed_area(v) > 0
    assert np.all(point_in_polygon(pts, v, tol=1e-9))
