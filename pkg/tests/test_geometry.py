"""Convex geometry primitives against brute-force and closed-form checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homoplan.geometry import (
    GeometryError,
    OverlapError,
    as_points,
    convex_hull,
    ensure_ccw,
    inflate_polygon,
    is_convex_ccw,
    line_polygon_interval,
    point_in_polygon,
    point_polygon_distance,
    points_in_polygon,
    points_polygon_distance,
    polygon_area,
    polygon_pair_distance,
    polygon_perimeter,
    polygons_intersect,
    polyline_arclengths,
    segment_blocks,
    segment_polygon_free,
    segments_cross_segment,
)
from oracles import convex_pair_witness, point_segment_distance, random_convex


def square(cx=0.0, cy=0.0, half=0.5):
    return np.array([[cx - half, cy - half], [cx + half, cy - half],
                     [cx + half, cy + half], [cx - half, cy + half]])


def test_as_points_rejects_bad_shapes():
    with pytest.raises(GeometryError):
        as_points([1.0, 2.0, 3.0])
    with pytest.raises(GeometryError):
        as_points(np.zeros((3, 3)))


def test_area_perimeter_and_orientation():
    sq = square()
    assert polygon_area(sq) == pytest.approx(1.0)
    assert polygon_perimeter(sq) == pytest.approx(4.0)
    cw = sq[::-1]
    assert polygon_area(cw) == pytest.approx(-1.0)
    assert polygon_area(ensure_ccw(cw)) == pytest.approx(1.0)


def test_convexity_check():
    assert is_convex_ccw(square())
    concave = np.array([[0, 0], [2, 0], [2, 2], [1, 0.5], [0, 2]], dtype=float)
    assert not is_convex_ccw(ensure_ccw(concave))
    assert not is_convex_ccw(np.array([[0.0, 0.0], [1.0, 0.0]]))
    dup = np.array([[0, 0], [1, 0], [1, 0], [0, 1]], dtype=float)
    assert not is_convex_ccw(dup)


def test_point_membership_boundary_inclusive():
    sq = square()
    assert point_in_polygon([0.0, 0.0], sq)
    assert point_in_polygon([0.5, 0.0], sq)  # on an edge
    assert point_in_polygon([0.5, 0.5], sq)  # on a vertex
    assert not point_in_polygon([0.50001, 0.0], sq)


def test_vectorised_membership_matches_scalar():
    rng = np.random.default_rng(3)
    poly = random_convex(rng, np.zeros(2), 1.0)
    pts = rng.uniform(-1.5, 1.5, (300, 2))
    batch = points_in_polygon(pts, poly)
    single = np.array([point_in_polygon(p, poly) for p in pts])
    assert np.array_equal(batch, single)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_signed_distance_sign_agrees_with_membership(x, y):
    sq = square()
    d, nearest = point_polygon_distance([x, y], sq)
    inside = point_in_polygon([x, y], sq)
    assert (d <= 0) == inside
    assert abs(d) == pytest.approx(float(np.hypot(x - nearest[0], y - nearest[1])), abs=1e-12)


def test_points_polygon_distance_matches_edge_enumeration():
    rng = np.random.default_rng(11)
    poly = random_convex(rng, np.zeros(2), 0.8)
    pts = rng.uniform(-2, 2, (100, 2))
    dist, nearest = points_polygon_distance(pts, poly)
    n = len(poly)
    for p, d in zip(pts, dist):
        brute = min(point_segment_distance(p, poly[i], poly[(i + 1) % n]) for i in range(n))
        assert abs(d) == pytest.approx(brute, abs=1e-12)


def test_pair_distance_matches_vertex_edge_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 60:
        A = random_convex(rng, rng.uniform(-1, 1, 2), rng.uniform(0.2, 0.6))
        B = random_convex(rng, rng.uniform(1.5, 3.5, 2), rng.uniform(0.2, 0.6))
        if polygons_intersect(A, B):
            continue
        d, pa, pb = polygon_pair_distance(A, B)
        d_ref, _, _ = convex_pair_witness(A, B)
        assert d == pytest.approx(d_ref, abs=1e-10)
        assert float(np.hypot(*(pb - pa))) == pytest.approx(d, abs=1e-10)
        checked += 1


def test_pair_distance_parallel_faces_centres_witness():
    # facing unit squares: the witness must sit at the overlap midpoint
    d, pa, pb = polygon_pair_distance(square(0.5, 0.5), square(1.9, 0.5))
    assert d == pytest.approx(0.4)
    assert pa == pytest.approx([1.0, 0.5])
    assert pb == pytest.approx([1.4, 0.5])


def test_pair_distance_rejects_overlap():
    with pytest.raises(OverlapError):
        polygon_pair_distance(square(), square(0.5, 0.0))
    with pytest.raises(OverlapError):  # exact touch
        polygon_pair_distance(square(), square(1.0, 0.0))


def test_line_interval_frozen():
    sq = square(0.5, 0.5)
    assert line_polygon_interval([0.2, 0.5], [1.0, 0.0], sq) == pytest.approx((-0.2, 0.8))
    assert line_polygon_interval([0.2, 2.5], [1.0, 0.0], sq) is None


def test_line_interval_endpoints_lie_on_boundary():
    rng = np.random.default_rng(5)
    poly = random_convex(rng, np.zeros(2), 1.0)
    hits = 0
    for _ in range(100):
        p = rng.uniform(-2, 2, 2)
        ang = rng.uniform(0, 2 * np.pi)
        u = np.array([np.cos(ang), np.sin(ang)])
        iv = line_polygon_interval(p, u, poly)
        if iv is None:
            assert not point_in_polygon(p, poly)
            continue
        t0, t1 = iv
        assert t0 <= t1 + 1e-12
        for t in (t0, t1):
            d, _ = point_polygon_distance(p + t * u, poly)
            assert abs(d) < 1e-9
        hits += 1
    assert hits > 10


def test_segment_blocks_open_segment_semantics():
    sq = square(0.5, 0.5)
    assert segment_blocks([-1.0, 0.5], [2.0, 0.5], sq)
    assert not segment_blocks([-1.0, 2.0], [2.0, 2.0], sq)
    # grazing along an edge touches but never enters the interior
    assert not segment_blocks([-1.0, 0.0], [2.0, 0.0], sq)
    assert segment_polygon_free([-1.0, 2.0], [2.0, 2.0], [sq])
    assert not segment_polygon_free([-1.0, 0.5], [2.0, 0.5], [sq])


def test_convex_hull_is_ccw_and_tight():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, (40, 2))
    hull = convex_hull(pts)
    assert is_convex_ccw(hull)
    assert np.all(points_in_polygon(pts, hull, eps=1e-9))


def test_inflate_contains_dilation_and_stays_tight():
    sq = square()
    r = 0.2
    grown = inflate_polygon(sq, r)
    assert is_convex_ccw(grown)
    # every point within r of the square must be inside the grown polygon
    rng = np.random.default_rng(4)
    on_sq = rng.uniform(-0.5, 0.5, (200, 2))
    ang = rng.uniform(0, 2 * np.pi, 200)
    shifted = on_sq + (r - 1e-9) * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    assert np.all(points_in_polygon(shifted, grown, eps=1e-9))
    # and the overshoot is bounded by the chord pushed to r / cos(step/2)
    d, _ = points_polygon_distance(grown, sq)
    bound = r / np.cos(0.5 * (np.pi / 2) / 8)
    assert d.max() <= bound + 1e-9
    assert d.min() >= r - 1e-9


def test_inflate_zero_and_negative():
    sq = square()
    assert np.array_equal(inflate_polygon(sq, 0.0), sq)
    with pytest.raises(GeometryError):
        inflate_polygon(sq, -0.1)


def test_arclengths_frozen():
    pts = np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 6.0]])
    assert polyline_arclengths(pts) == pytest.approx([0.0, 5.0, 7.0])


def test_segments_cross_segment():
    a0 = np.array([[0.0, -1.0], [2.0, -1.0], [0.0, 1.0]])
    a1 = np.array([[0.0, 1.0], [2.0, 1.0], [1.0, 1.0]])
    t, s, valid = segments_cross_segment(a0, a1, [-1.0, 0.0], [1.0, 0.0])
    assert valid.tolist() == [True, False, False]  # second misses, third is parallel
    assert t[0] == pytest.approx(0.5)
    assert s[0] == pytest.approx(0.5)
