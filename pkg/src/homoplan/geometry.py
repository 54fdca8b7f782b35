"""Convex 2D geometry primitives shared by the planning modules."""

import numpy as np
from scipy.spatial import ConvexHull

from . import _kernels

_EPS = 1e-9


class GeometryError(ValueError):
    pass


class OverlapError(GeometryError):
    """Raised when an operation requires disjoint polygons."""


def as_points(points) -> np.ndarray:
    a = np.asarray(points, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise GeometryError(f"expected (n, 2) point array, got shape {a.shape}")
    return np.ascontiguousarray(a)


def polygon_area(verts: np.ndarray) -> float:
    """Signed shoelace area; positive for CCW."""
    x = verts[:, 0]
    y = verts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_perimeter(verts: np.ndarray) -> float:
    d = np.roll(verts, -1, axis=0) - verts
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def ensure_ccw(verts: np.ndarray) -> np.ndarray:
    return verts if polygon_area(verts) >= 0.0 else verts[::-1].copy()


def is_convex_ccw(verts: np.ndarray, eps: float = 1e-9) -> bool:
    """Convexity check for a CCW polygon; collinear runs are tolerated."""
    n = len(verts)
    if n < 3:
        return False
    e = np.roll(verts, -1, axis=0) - verts
    if np.any(np.hypot(e[:, 0], e[:, 1]) < eps):
        return False  # duplicate consecutive vertices
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool(np.all(cross >= -eps)) and polygon_area(verts) > eps


def point_in_polygon(p, verts: np.ndarray, eps: float = 0.0) -> bool:
    """Membership in a convex CCW polygon, boundary-inclusive when eps >= 0."""
    p = np.asarray(p, dtype=float)
    e = np.roll(verts, -1, axis=0) - verts
    r = p[None, :] - verts
    cross = e[:, 0] * r[:, 1] - e[:, 1] * r[:, 0]
    return bool(np.all(cross >= -eps * np.hypot(e[:, 0], e[:, 1]) - 1e-15))


def points_in_polygon(points: np.ndarray, verts: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Vectorised convex membership test for many points."""
    e = np.roll(verts, -1, axis=0) - verts
    scale = np.hypot(e[:, 0], e[:, 1])
    r = points[:, None, :] - verts[None, :, :]
    cross = e[None, :, 0] * r[:, :, 1] - e[None, :, 1] * r[:, :, 0]
    return np.all(cross >= -eps * scale[None, :] - 1e-15, axis=1)


def points_polygon_distance(points: np.ndarray, verts: np.ndarray):
    """Signed distance from points to a convex polygon (negative inside).

    Returns (dist (n,), nearest (n, 2)) where nearest is the closest
    boundary point.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a = verts
    b = np.roll(verts, -1, axis=0)
    d = b - a
    len2 = np.einsum("ij,ij->i", d, d)
    len2 = np.where(len2 < 1e-18, 1.0, len2)
    r = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("ijk,jk->ij", r, d) / len2[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * d[None, :, :]
    diff = points[:, None, :] - proj
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    idx = np.argmin(dist2, axis=1)
    rows = np.arange(len(points))
    nearest = proj[rows, idx]
    dist = np.sqrt(dist2[rows, idx])
    inside = points_in_polygon(points, verts)
    dist = np.where(inside, -dist, dist)
    return dist, nearest


def point_polygon_distance(p, verts: np.ndarray):
    """Signed distance and nearest boundary point for a single point."""
    dist, nearest = points_polygon_distance(np.asarray(p, dtype=float)[None, :], verts)
    return float(dist[0]), nearest[0]


def polygons_intersect(A: np.ndarray, B: np.ndarray, eps: float = 0.0) -> bool:
    """Separating-axis test for two convex polygons (boundary contact counts)."""
    for P, Q in ((A, B), (B, A)):
        e = np.roll(P, -1, axis=0) - P
        normals = np.stack([e[:, 1], -e[:, 0]], axis=1)
        pmax = np.max(normals @ P.T, axis=1)
        qmin = np.min(normals @ Q.T, axis=1)
        if np.any(qmin - pmax > eps):
            return False
    return True


def _support_interval(verts: np.ndarray, direction: np.ndarray, axis: np.ndarray, tol: float):
    """Extent along `axis` of the face of `verts` extremal in `direction`."""
    proj = verts @ direction
    face = verts[proj >= np.max(proj) - tol]
    s = face @ axis
    return float(np.min(s)), float(np.max(s))


def polygon_pair_distance(A: np.ndarray, B: np.ndarray):
    """Shortest segment between two disjoint convex polygons.

    Returns (distance, point_on_A, point_on_B).  For parallel facing edges
    the witness pair is centred on the overlap interval so the result is
    symmetric and deterministic.  Raises OverlapError when the polygons
    intersect or touch.
    """
    if polygons_intersect(A, B):
        raise OverlapError("polygons intersect or touch; no separating segment")
    d, pa, pb = _kernels.poly_pair_witness(A, B)
    if d < _EPS:
        raise OverlapError("polygons intersect or touch; no separating segment")
    u = (pb - pa) / d
    axis = np.array([-u[1], u[0]])
    tol = 1e-9 * (1.0 + d)
    a_lo, a_hi = _support_interval(A, u, axis, tol)
    b_lo, b_hi = _support_interval(B, -u, axis, tol)
    lo = max(a_lo, b_lo)
    hi = min(a_hi, b_hi)
    if hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        base_a = float(pa @ axis)
        base_b = float(pb @ axis)
        pa = pa + (mid - base_a) * axis
        pb = pb + (mid - base_b) * axis
        d = float(np.hypot(*(pb - pa)))
    return d, pa, pb


def line_polygon_interval(point, direction, verts: np.ndarray):
    """Parameter interval of line point + t*direction inside a convex polygon.

    Returns (t0, t1) or None when the line misses it.
    """
    p = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    t0, t1, hit = _kernels.line_poly_interval(p[0], p[1], d[0], d[1], verts)
    return (t0, t1) if hit else None


def segment_blocks(p0, p1, verts: np.ndarray, eps: float = 1e-9) -> bool:
    """True when the open segment (p0, p1) passes through the polygon interior."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    return bool(_kernels.segment_hits_interior(p0[0], p0[1], p1[0], p1[1], verts, eps))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """CCW hull vertices of a point cloud."""
    hull = ConvexHull(points)
    return np.ascontiguousarray(points[hull.vertices])


def inflate_polygon(verts: np.ndarray, r: float, arc_segments: int = 8) -> np.ndarray:
    """Conservative convex superset of the polygon dilated by a disk of radius r.

    Corner arcs are replaced by `arc_segments` chords pushed out to radius
    r / cos(step/2) so every chord stays tangent-or-outside the true arc;
    the hull of the generated fans therefore contains the exact dilation.
    """
    if r < 0:
        raise GeometryError("inflation radius must be >= 0")
    if r == 0:
        return verts.copy()
    n = len(verts)
    e = np.roll(verts, -1, axis=0) - verts
    elen = np.hypot(e[:, 0], e[:, 1])
    # outward normal of CCW edge i
    normals = np.stack([e[:, 1], -e[:, 0]], axis=1) / elen[:, None]
    pts = []
    for i in range(n):
        n_prev = normals[i - 1]
        n_next = normals[i]
        a0 = np.arctan2(n_prev[1], n_prev[0])
        turn = np.arctan2(n_next[1], n_next[0]) - a0
        while turn < -1e-12:
            turn += 2.0 * np.pi
        m = max(1, arc_segments)
        step = turn / m
        rr = r / np.cos(0.5 * step) if step > 0 else r
        angles = a0 + step * np.arange(m + 1)
        fan = verts[i] + rr * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        pts.append(fan)
    return convex_hull(np.vstack(pts))


def polyline_arclengths(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each polyline vertex, starting at 0."""
    d = np.diff(points, axis=0)
    return np.concatenate([[0.0], np.cumsum(np.hypot(d[:, 0], d[:, 1]))])


def segment_polygon_free(p0: np.ndarray, p1: np.ndarray, polys, eps: float = 1e-9) -> bool:
    """True when the open segment avoids the interior of every polygon."""
    for P in polys:
        if segment_blocks(p0, p1, P, eps):
            return False
    return True


def segments_cross_segment(a0: np.ndarray, a1: np.ndarray, b0, b1):
    """Intersection parameters of many segments (a0[i], a1[i]) with one segment (b0, b1).

    Returns (t, s, valid): t along the a-segments, s along b, valid where the
    segments are non-parallel and both parameters land in [0, 1].
    """
    d = a1 - a0
    e = np.asarray(b1, dtype=float) - np.asarray(b0, dtype=float)
    denom = d[:, 0] * e[1] - d[:, 1] * e[0]
    r = np.asarray(b0, dtype=float)[None, :] - a0
    ok = np.abs(denom) > 1e-15
    safe = np.where(ok, denom, 1.0)
    t = (r[:, 0] * e[1] - r[:, 1] * e[0]) / safe
    s = (r[:, 0] * d[:, 1] - r[:, 1] * d[:, 0]) / safe
    valid = ok & (t >= 0.0) & (t <= 1.0) & (s >= 0.0) & (s <= 1.0)
    return t, s, valid
