import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import ConvexHull

from infpot.errors import NotAPoint, ValidationError, ZeroSeparation
from infpot.geometry import (ConvexRing, Disk, Ellipse, Point, Polygon, Segment, boundary_distance,
                             contains, corner_angles, diameter, high_ridge, inscribed_disk, is_stadium,
                             rectangle, regular_polygon, separation)

SQUARE = rectangle(-1, -1, 1, 1)
DISK = Disk((0, 0), 1)
ELLIPSE = Ellipse((0, 0), 1.5, 1.0)


def capsule(a, n_arc=64):
    """Polygon circumscribing the unit-clearance stadium of the segment (+-a, 0)."""
    d = math.pi / n_arc
    R = 1.0 / math.cos(d / 2)
    right = [(a + R * math.cos(-math.pi / 2 + (k + 0.5) * d), R * math.sin(-math.pi / 2 + (k + 0.5) * d))
             for k in range(n_arc)]
    left = [(-a + R * math.cos(math.pi / 2 + (k + 0.5) * d), R * math.sin(math.pi / 2 + (k + 0.5) * d))
            for k in range(n_arc)]
    return Polygon(tuple(right + left)), R - 1.0


def test_contains():
    assert contains(DISK, (0, 0))
    assert contains(SQUARE, (1, 1))
    assert not contains(SQUARE, (1.01, 0))


def test_boundary_distance_examples():
    assert boundary_distance(SQUARE, (0, 0)) == pytest.approx(1.0, abs=1e-15)
    assert boundary_distance(DISK, (0.25, 0)) == pytest.approx(0.75, abs=1e-15)
    assert boundary_distance(ELLIPSE, (0, 0)) == pytest.approx(1.0, abs=1e-12)


def _ellipse_dense(e, n=400_000):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    c, s = math.cos(e.rotation), math.sin(e.rotation)
    lx, ly = e.a * np.cos(t), e.b * np.sin(t)
    return np.column_stack([e.center[0] + c * lx - s * ly, e.center[1] + s * lx + c * ly])


@settings(max_examples=40, deadline=None)
@given(st.floats(-2.5, 2.5), st.floats(-2.0, 2.0), st.floats(0.0, 3.0))
def test_ellipse_distance_matches_dense_sampling(x, y, rot):
    e = Ellipse((0.1, -0.2), 1.5, 0.7, rot)
    P = _ellipse_dense(e)
    ref = float(np.min(np.hypot(P[:, 0] - x, P[:, 1] - y)))
    got = float(e.boundary_distance(np.array([x, y])))
    # dense sampling overestimates by at most (arc step)^2 / 8 / radius of curvature
    assert got <= ref + 1e-12
    assert got >= ref - 1e-6


def test_separation_examples():
    assert separation(ConvexRing(DISK, Point((0, 0)))) == pytest.approx(1.0)
    assert separation(ConvexRing(SQUARE, Point((0, 0)))) == pytest.approx(1.0)
    assert separation(ConvexRing(ELLIPSE, Point((0, 0)))) == pytest.approx(1.0, abs=1e-12)


def test_separation_inner_ellipse_against_sampling():
    ring = ConvexRing(SQUARE, Ellipse((0.2, 0.1), 0.5, 0.3, 0.4))
    P = _ellipse_dense(ring.inner, 200_000)
    ref = float(np.min(SQUARE.boundary_distance(P)))
    assert ring.separation == pytest.approx(ref, abs=1e-9)


def test_zero_separation_and_invalid_bodies():
    with pytest.raises(ZeroSeparation):
        ConvexRing(SQUARE, Point((1.0, 0.0)))
    with pytest.raises(ValidationError):
        ConvexRing(SQUARE, Point((1.5, 0.0)))
    with pytest.raises(ValidationError):
        Polygon(((0, 0), (1, 0), (0.2, 0.2), (0, 1)))
    with pytest.raises(ValidationError):
        Polygon(((0, 0), (0, 1), (1, 0)))  # clockwise
    with pytest.raises(ValidationError):
        Disk((0, 0), 0.0)
    with pytest.raises(ValidationError):
        Segment(((0, 0), (0, 0)))


def test_diameter_examples():
    assert diameter(SQUARE) == pytest.approx(2 * math.sqrt(2))
    assert diameter(DISK) == pytest.approx(2.0)
    assert diameter(Segment(((-0.7, 0), (0.7, 0)))) == pytest.approx(1.4)
    assert diameter(ELLIPSE) == pytest.approx(3.0)


@st.composite
def convex_polygons(draw):
    n = draw(st.integers(5, 25))
    seed = draw(st.integers(0, 10_000))
    P = np.random.default_rng(seed).normal(size=(n, 2))
    H = ConvexHull(P)
    V = P[H.vertices]  # scipy returns 2-D hulls counterclockwise
    return Polygon(tuple(map(tuple, V)))


@settings(max_examples=50, deadline=None)
@given(convex_polygons())
def test_polygon_diameter_matches_brute_force(poly):
    V = np.array(poly.vertices)
    brute = np.max(np.linalg.norm(V[:, None] - V[None], axis=-1))
    assert diameter(poly) == pytest.approx(brute, rel=1e-12)


def test_high_ridge_examples():
    H = high_ridge(SQUARE)
    assert H.kind == "point" and H.clearance == pytest.approx(1.0)
    assert np.allclose(H.body.center, (0, 0), atol=1e-9)
    H = high_ridge(rectangle(-2, -1, 2, 1))
    assert H.kind == "segment" and H.clearance == pytest.approx(1.0)
    E = sorted(H.body.endpoints)
    assert np.allclose(E, [(-1, 0), (1, 0)], atol=1e-9)
    H = high_ridge(DISK)
    assert H.kind == "point" and H.clearance == 1.0


@settings(max_examples=20, deadline=None)
@given(convex_polygons())
def test_high_ridge_clearance_is_max_of_distance(poly):
    H = high_ridge(poly)
    x0, y0, x1, y1 = poly.bbox
    h = max(x1 - x0, y1 - y0) / 400
    xs = np.arange(x0, x1, h)
    ys = np.arange(y0, y1, h)
    X = np.stack(np.meshgrid(xs, ys, indexing="ij"), -1)
    d = -poly.sdf(X)
    assert d.max() <= H.clearance + 1e-9
    assert d.max() >= H.clearance - h
    # the ridge itself sits at full clearance
    pts = H.body.boundary_points(8) if H.kind == "segment" else np.array([H.body.center])
    assert np.allclose(poly.boundary_distance(pts), H.clearance, atol=1e-7)


def test_is_stadium():
    assert is_stadium(ConvexRing(DISK, Point((0, 0))))
    assert not is_stadium(ConvexRing(SQUARE, Point((0, 0))))
    assert not is_stadium(ConvexRing(DISK, Point((0.1, 0))))
    cap, excess = capsule(0.8)
    assert is_stadium(ConvexRing(cap, Segment(((-0.8, 0), (0.8, 0)))), tol=2 * excess)
    # Gamma shorter than the ridge: not a stadium
    assert not is_stadium(ConvexRing(cap, Segment(((-0.5, 0), (0.5, 0)))), tol=2 * excess)


def test_rectangle_ring_is_not_a_stadium():
    # its corners lie sqrt(2) from the ridge segment while the clearance is 1
    ring = ConvexRing(rectangle(-2, -1, 2, 1), Segment(((-1, 0), (1, 0))))
    assert not is_stadium(ring)
    assert np.max(ring.inner.distance(np.array(ring.outer.vertices))) == pytest.approx(math.sqrt(2))


def test_corner_angles():
    assert [a for _, a in corner_angles(SQUARE)] == pytest.approx([math.pi / 2] * 4)
    assert [a for _, a in corner_angles(regular_polygon(6))] == pytest.approx([2 * math.pi / 3] * 6)
    assert corner_angles(DISK) == []


def test_inscribed_disk():
    d = inscribed_disk(ConvexRing(ELLIPSE, Point((0, 0))))
    assert d.radius == pytest.approx(1.0) and d.center == (0.0, 0.0)
    d = inscribed_disk(ConvexRing(SQUARE, Point((0, 0))))
    assert d.radius == pytest.approx(1.0)
    d = inscribed_disk(ConvexRing(Disk((0, 0), 2), Point((0.5, 0))))
    assert d.radius == pytest.approx(1.5) and d.center == (0.5, 0.0)
    with pytest.raises(NotAPoint):
        inscribed_disk(ConvexRing(SQUARE, Segment(((-0.5, 0), (0.5, 0)))))


BODIES = [SQUARE, DISK, ELLIPSE, Ellipse((0.3, 0.1), 1.2, 0.5, 0.7), regular_polygon(7, 1.3, (0.2, 0.0), 0.1)]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(range(len(BODIES))), st.lists(st.floats(-1.5, 1.5), min_size=4, max_size=4))
def test_midpoint_of_interior_points_is_interior(k, c):
    body = BODIES[k]
    a, b = np.array(c[:2]), np.array(c[2:])
    if body.sdf(a) < 0 and body.sdf(b) < 0:
        assert body.sdf(0.5 * (a + b)) < 0


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(range(len(BODIES))), st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_boundary_distance_is_one_lipschitz(k, c):
    body = BODIES[k]
    a, b = np.array(c[:2]), np.array(c[2:])
    da, db = float(body.boundary_distance(a)), float(body.boundary_distance(b))
    assert abs(da - db) <= np.linalg.norm(a - b) + 1e-9
