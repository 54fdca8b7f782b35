"""Complete-passage detection between inflated obstacle pairs.

A passage is a triple of segments (entrance, narrowest, exit) spanning the
gap between two obstacles.  Starting from the shortest segment between the
pair, a perpendicular line is shifted sideways in steps of kappa until it
stops hitting one of the obstacles or the gap it cuts exceeds l_max; the
last line on each side gives the entrance and exit.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import geometry
from .config import DetectionParams


def _seg(a) -> np.ndarray:
    s = np.asarray(a, dtype=float).reshape(2, 2)
    return s


def _verts(obj) -> np.ndarray:
    return obj.vertices if hasattr(obj, "vertices") else geometry.as_points(obj)


@dataclass
class CompletePassage:
    """Passage between obstacles s and c (indices into the obstacle list).

    Segments run from the s-side point to the c-side point.  `axis` is the
    unit shifting direction; the entrance lies on the +axis side of the
    narrowest segment and the exit on the -axis side.
    """

    s: int
    c: int
    entrance: np.ndarray
    narrowest: np.ndarray
    exit: np.ndarray
    width: float
    axis: np.ndarray = field(init=False)
    off_entrance: float = field(init=False)
    off_exit: float = field(init=False)
    region: np.ndarray = field(init=False)

    def __post_init__(self):
        self.entrance = _seg(self.entrance)
        self.narrowest = _seg(self.narrowest)
        self.exit = _seg(self.exit)
        gap = self.narrowest[1] - self.narrowest[0]
        norm = float(np.hypot(*gap))
        m_hat = gap / norm if norm > 0 else np.array([1.0, 0.0])
        axis = np.array([-m_hat[1], m_hat[0]])
        mid_n = self.narrowest.mean(axis=0)
        mid_e = self.entrance.mean(axis=0)
        mid_x = self.exit.mean(axis=0)
        # orient the axis toward the entrance side
        if float((mid_e - mid_n) @ axis) < 0:
            axis = -axis
        self.axis = axis
        self.off_entrance = abs(float((mid_e - mid_n) @ axis))
        self.off_exit = abs(float((mid_x - mid_n) @ axis))
        pts = np.vstack([self.entrance, self.narrowest, self.exit])
        self.region = _hull_or_sliver(pts, axis)

    @property
    def key(self) -> tuple:
        return (self.s, self.c)

    def spans_for_crossing(self, direction: int) -> tuple:
        """(distance entered before, distance left after) the narrowest line
        for a path crossing along +axis (direction=+1) or -axis (-1)."""
        if direction >= 0:
            return self.off_exit, self.off_entrance
        return self.off_entrance, self.off_exit

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "c": self.c,
            "entrance": self.entrance.tolist(),
            "narrowest": self.narrowest.tolist(),
            "exit": self.exit.tolist(),
            "width": float(self.width),
        }


def _hull_or_sliver(pts: np.ndarray, axis: np.ndarray) -> np.ndarray:
    try:
        return geometry.convex_hull(pts)
    except (QhullError, ValueError):
        pad = 1e-6 * axis
        return geometry.convex_hull(np.vstack([pts + pad, pts - pad]))


@dataclass
class PassageSet:
    passages: list

    def __len__(self):
        return len(self.passages)

    def __iter__(self):
        return iter(self.passages)

    def __getitem__(self, i):
        return self.passages[i]

    def by_pair(self) -> dict:
        return {p.key: p for p in self.passages}

    def to_json(self) -> str:
        return json.dumps({"passages": [p.to_dict() for p in self.passages]}, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "PassageSet":
        data = json.loads(text)
        out = []
        for pd in data["passages"]:
            out.append(
                CompletePassage(
                    s=int(pd["s"]),
                    c=int(pd["c"]),
                    entrance=pd["entrance"],
                    narrowest=pd["narrowest"],
                    exit=pd["exit"],
                    width=float(pd["width"]),
                )
            )
        return cls(out)


def shortest_segment(A, B):
    """Shortest segment between two disjoint convex polygons.

    Returns (point_on_A, point_on_B, distance).  Parallel facing edges give
    the midpoint of the overlap; overlapping polygons raise OverlapError.
    """
    d, pa, pb = geometry.polygon_pair_distance(_verts(A), _verts(B))
    return pa, pb, d


def _aabb_near(seg_a: np.ndarray, seg_b: np.ndarray, verts: np.ndarray, pad: float) -> bool:
    lo = np.minimum(seg_a, seg_b) - pad
    hi = np.maximum(seg_a, seg_b) + pad
    return bool(np.all(verts.max(axis=0) >= lo) and np.all(verts.min(axis=0) <= hi))


def is_passage_valid(obstacles, s: int, c: int, _witness=None) -> bool:
    """True when the open shortest segment between obstacles s and c passes
    no third obstacle's interior (grazing a boundary does not block)."""
    if _witness is None:
        pa, pb, _ = shortest_segment(obstacles[s], obstacles[c])
    else:
        pa, pb = _witness
    for k, obs in enumerate(obstacles):
        if k in (s, c):
            continue
        v = _verts(obs)
        if not _aabb_near(pa, pb, v, 0.0):
            continue
        if geometry.segment_blocks(pa, pb, v):
            return False
    return True


def _gap_on_line(p0: np.ndarray, m_hat: np.ndarray, A: np.ndarray, B: np.ndarray):
    """Free gap between the chords line(p0, m_hat) cuts through A and B.

    Returns (point_on_A, point_on_B, gap) or None when a condition fails:
    the line misses either obstacle or the chords are not separated.
    """
    ia = geometry.line_polygon_interval(p0, m_hat, A)
    if ia is None:
        return None
    ib = geometry.line_polygon_interval(p0, m_hat, B)
    if ib is None:
        return None
    s0, s1 = ia
    c0, c1 = ib
    if s1 <= c0 + 1e-12:
        pa = p0 + s1 * m_hat
        pb = p0 + c0 * m_hat
        return pa, pb, float(c0 - s1)
    if c1 <= s0 + 1e-12:
        pa = p0 + s0 * m_hat
        pb = p0 + c1 * m_hat
        return pa, pb, float(s0 - c1)
    return None


def detect_complete_passage(obstacles, s: int, c: int, params: DetectionParams | None = None, _witness=None):
    """Entrance/narrowest/exit triple for the pair (s, c), or None.

    The shifted segments always span between the two obstacles' boundaries;
    shifting stops as soon as the line stops cutting both obstacles or the
    gap exceeds l_max, and the last valid segment on each side is reported
    (degenerating to the narrowest segment when no shift is possible).
    """
    params = params or DetectionParams()
    A = _verts(obstacles[s])
    B = _verts(obstacles[c])
    if _witness is None:
        pa, pb, width = shortest_segment(A, B)
    else:
        pa, pb, width = _witness
    if width > params.l_max:
        return None
    m_hat = (pb - pa) / width
    axis = np.array([-m_hat[1], m_hat[0]])
    sides = []
    max_steps = int(np.ceil(60.0 / params.kappa))
    for sign in (+1.0, -1.0):
        last = (pa.copy(), pb.copy())
        for m in range(1, max_steps + 1):
            p0 = pa + sign * m * params.kappa * axis
            hit = _gap_on_line(p0, m_hat, A, B)
            if hit is None or hit[2] > params.l_max:
                break
            last = (hit[0], hit[1])
        sides.append(np.stack(last))
    entrance, exit_seg = sides
    return CompletePassage(s=s, c=c, entrance=entrance, narrowest=np.stack([pa, pb]), exit=exit_seg, width=width)


def detect_all_passages(obstacles, params: DetectionParams | None = None, walls=()) -> PassageSet:
    """All complete passages between valid obstacle pairs, ordered by (s, c).

    `walls` are extra polygons (e.g. workspace boundary slabs) appended after
    the obstacles; they pair with obstacles but not with each other, so wall
    corridors are scored like any other passage.  Overlapping pairs are
    sealed and yield no passage.
    """
    params = params or DetectionParams()
    found = []
    polys = list(obstacles) + list(walls)
    n = len(polys)
    n_solid = len(obstacles)
    for s in range(n):
        for c in range(s + 1, n):
            if s >= n_solid:
                continue
            try:
                pa, pb, d = shortest_segment(polys[s], polys[c])
            except geometry.OverlapError:
                continue  # touching or overlapping pair is sealed
            if d > params.l_max:
                continue
            if not is_passage_valid(polys, s, c, _witness=(pa, pb)):
                continue
            p = detect_complete_passage(polys, s, c, params, _witness=(pa, pb, d))
            if p is not None:
                found.append(p)
    return PassageSet(found)
