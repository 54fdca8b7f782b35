"""Global planner: width- and conflict-aware optimal search on the roadmap.

A candidate path is scored by

    cost = length - lambda_p * min_crossed_width + lambda_h * conflict_sum

where the conflict sum compares this agent's passage occupancy times
(derived from the path at reference speed v_bar) against the time maps of
higher-priority agents.  The search works on the contracted roadmap with
Pareto label dominance that stays exact for this path-dependent cost; on
small graphs the returned cost equals exhaustive simple-path enumeration.
"""

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .config import PlannerParams
from .voronoi import attach_endpoints, contract_graph

_EPS = 1e-12


class PlanError(RuntimeError):
    pass


@dataclass
class PassageTimeMap:
    """Occupancy spans per passage key (s, c); multiple crossings keep
    multiple spans."""

    agent: int = 0
    version: int = 0
    spans: dict = field(default_factory=dict)

    def copy(self) -> "PassageTimeMap":
        return PassageTimeMap(self.agent, self.version, {k: list(v) for k, v in self.spans.items()})


def conflict_index(span, other_map: PassageTimeMap, key, alpha: float) -> float:
    """Conflict between one occupancy span and another agent's map entry.

    0 when the other agent never crosses the passage; 1 when the spans
    overlap (touching counts); exp(alpha * gap) otherwise, with alpha < 0 so
    the index decays with temporal separation.  Multiple spans on the other
    side score by the worst one, keeping the index within [0, 1].
    """
    entries = other_map.spans.get(tuple(key))
    if not entries:
        return 0.0
    t1, t2 = span
    best = 0.0
    for a, b in entries:
        if t1 <= b and a <= t2:
            return 1.0
        delta = abs(max(t1, a) - min(t2, b))
        ci = math.exp(alpha * delta)
        if ci > best:
            best = ci
    return best


def score_path(time_map: PassageTimeMap, higher_maps, alpha: float) -> float:
    """Total conflict of a path's time map against higher-priority maps."""
    total = 0.0
    for key, spans in time_map.spans.items():
        for span in spans:
            for other in higher_maps:
                total += conflict_index(span, other, key, alpha)
    return total


@dataclass
class PathCrossing:
    passage: int
    key: tuple
    arc: float
    direction: int


@dataclass
class CostBreakdown:
    length: float
    min_width: float
    conflict: float
    total: float


class ReferencePath:
    """Timestamped polyline handed to the tracker and used for time maps."""

    def __init__(self, points, stamps, crossings=None, v_bar: float = 0.5):
        self.points = np.asarray(points, dtype=float).reshape(-1, 2)
        self.arcs = geometry.polyline_arclengths(self.points)
        self.stamps = np.asarray(stamps, dtype=float).reshape(-1)
        if len(self.stamps) != len(self.points):
            raise ValueError("one timestamp per waypoint required")
        self.crossings = list(crossings or [])
        self.v_bar = float(v_bar)

    @property
    def length(self) -> float:
        return float(self.arcs[-1])

    @property
    def t0(self) -> float:
        return float(self.stamps[0])

    @property
    def t_end(self) -> float:
        return float(self.stamps[-1])

    def position_at(self, t: float) -> np.ndarray:
        x = np.interp(t, self.stamps, self.points[:, 0])
        y = np.interp(t, self.stamps, self.points[:, 1])
        return np.array([x, y])

    def time_at_arc(self, arc: float) -> float:
        """Timestamp at an arc length, extrapolating with the path speed."""
        if len(self.arcs) == 1 or self.length <= 0:
            return float(self.stamps[0])
        if arc < self.arcs[0]:
            return float(self.stamps[0] + (arc - self.arcs[0]) / self.v_bar)
        if arc > self.arcs[-1]:
            return float(self.stamps[-1] + (arc - self.arcs[-1]) / self.v_bar)
        return float(np.interp(arc, self.arcs, self.stamps))

    def position_at_arc(self, arc: float) -> np.ndarray:
        x = np.interp(arc, self.arcs, self.points[:, 0])
        y = np.interp(arc, self.arcs, self.points[:, 1])
        return np.array([x, y])

    def nearest_arc(self, p) -> float:
        """Arc length of the closest point on the polyline to p."""
        p = np.asarray(p, dtype=float)
        if len(self.points) == 1:
            return 0.0
        a = self.points[:-1]
        d = self.points[1:] - a
        len2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-18)
        t = np.clip(np.einsum("ij,ij->i", p[None, :] - a, d) / len2, 0.0, 1.0)
        proj = a + t[:, None] * d
        dist2 = np.einsum("ij,ij->i", proj - p[None, :], proj - p[None, :])
        k = int(np.argmin(dist2))
        return float(self.arcs[k] + t[k] * np.sqrt(len2[k]))

    def advance_arc(self, p, arc_prev: float, back: float = 0.3, ahead: float = 0.6) -> float:
        """Progress along the path: nearest arc to p restricted to a window
        around the previous arc, so projections cannot jump across folds."""
        p = np.asarray(p, dtype=float)
        if len(self.points) == 1:
            return 0.0
        lo = arc_prev - back
        hi = arc_prev + ahead
        a = self.points[:-1]
        d = self.points[1:] - a
        seg_lo = self.arcs[:-1]
        seg_hi = self.arcs[1:]
        mask = (seg_hi >= lo) & (seg_lo <= hi)
        if not np.any(mask):
            return float(np.clip(arc_prev, 0.0, self.length))
        a = a[mask]
        d = d[mask]
        seg_lo = seg_lo[mask]
        len2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-18)
        seg_len = np.sqrt(len2)
        t = np.clip(np.einsum("ij,ij->i", p[None, :] - a, d) / len2, 0.0, 1.0)
        # clamp the parameter so the chosen point stays inside the arc window
        t = np.clip(t, (lo - seg_lo) / seg_len, (hi - seg_lo) / seg_len)
        t = np.clip(t, 0.0, 1.0)
        proj = a + t[:, None] * d
        dist2 = np.einsum("ij,ij->i", proj - p[None, :], proj - p[None, :])
        k = int(np.argmin(dist2))
        return float(seg_lo[k] + t[k] * seg_len[k])

    def retimed(self, t_now: float, arc_now: float, v_new: float) -> "ReferencePath":
        """Same geometry, stamps re-anchored so arc_now is reached at t_now
        and the remainder runs at v_new."""
        v_new = max(v_new, 1e-6)
        stamps = t_now + (self.arcs - arc_now) / v_new
        out = ReferencePath(self.points.copy(), stamps, list(self.crossings), v_bar=v_new)
        return out


def build_time_map(path: ReferencePath, passages, v_bar: float | None = None, agent: int = 0, version: int = 1) -> PassageTimeMap:
    """Occupancy span per crossing: the narrowest line is met at the stored
    arc; the span extends backwards/forwards by the passage's own
    entrance/exit offsets, clamped at the path start.  With v_bar given the
    path is treated as running at that uniform speed from its first stamp.
    """
    spans: dict = {}
    for cr in path.crossings:
        p = passages[cr.passage]
        off_before, off_after = p.spans_for_crossing(cr.direction)
        if v_bar is not None:
            t0 = path.stamps[0]
            t1 = t0 + (cr.arc - off_before - path.arcs[0]) / v_bar
            t2 = t0 + (cr.arc + off_after - path.arcs[0]) / v_bar
        else:
            t1 = path.time_at_arc(cr.arc - off_before)
            t2 = path.time_at_arc(cr.arc + off_after)
        t1 = max(t1, float(path.stamps[0]))
        if t2 < t1:
            t1, t2 = t2, t1
        spans.setdefault(p.key, []).append((float(t1), float(t2)))
    for lst in spans.values():
        lst.sort()
    return PassageTimeMap(agent=agent, version=version, spans=spans)


@dataclass
class SearchStats:
    pops: int = 0
    labels: int = 0
    capped: bool = False


@dataclass
class PlanResult:
    path: ReferencePath
    time_map: PassageTimeMap
    cost: CostBreakdown
    stats: SearchStats


class _Label:
    __slots__ = ("node", "length", "f_p", "f_h", "visited", "parent", "edge", "rev", "alive")

    def __init__(self, node, length, f_p, f_h, visited, parent, edge, rev):
        self.node = node
        self.length = length
        self.f_p = f_p
        self.f_h = f_h
        self.visited = visited
        self.parent = parent
        self.edge = edge
        self.rev = rev
        self.alive = True


def _chain_events(chain, reverse: bool):
    """Crossings of a chain in traversal order: (passage, offset, direction)."""
    if not reverse:
        return chain.crossings
    out = [(p, chain.length - off, -dr) for (p, off, dr) in chain.crossings]
    out.reverse()
    return out


def plan_path(start, target, graph, passage_set, higher_maps, params: PlannerParams | None = None,
              obstacles=(), t0: float = 0.0) -> PlanResult:
    """Optimal reference path from start to target on the annotated roadmap.

    Minimises length - lambda_p * f_P + lambda_h * f_H over simple graph
    paths, where f_P is the narrowest width crossed (w_default when nothing
    is crossed) and f_H sums conflict indices against `higher_maps` with
    crossing times t0 + arc / v_bar.  Returns the timestamped path, its
    passage time map and the cost breakdown.
    """
    params = params or PlannerParams()
    g2, sid, tid = attach_endpoints(graph, start, target, obstacles)
    cg = contract_graph(g2, keep=(sid, tid))
    node_of = {v: i for i, v in enumerate(cg.nodes)}
    s_node = node_of[sid]
    t_node = node_of[tid]
    target_pt = np.asarray(target, dtype=float)

    plist = list(passage_set)
    widths = [p.width for p in plist]
    offs = [(p.spans_for_crossing(+1), p.spans_for_crossing(-1)) for p in plist]
    conflicts = []
    for p in plist:
        lists = []
        for m in higher_maps:
            entries = m.spans.get(p.key)
            if entries:
                lists.append(entries)
        conflicts.append(lists)
    use_time = params.lambda_h != 0.0 and any(conflicts)
    use_width = params.lambda_p != 0.0
    alpha = params.alpha
    v_bar = params.v_bar
    lam_p = params.lambda_p
    lam_h = params.lambda_h
    w0 = params.w_default

    def ci_sum(t1, t2, lists):
        total = 0.0
        for entries in lists:
            best = 0.0
            for a, b in entries:
                if t1 <= b and a <= t2:
                    best = 1.0
                    break
                ci = math.exp(alpha * abs(max(t1, a) - min(t2, b)))
                if ci > best:
                    best = ci
            total += best
        return total

    h_cost = np.hypot(cg.coords[:, 0] - target_pt[0], cg.coords[:, 1] - target_pt[1])
    labels: list = [[] for _ in cg.nodes]
    heap = []
    seq = 0

    def push(lbl: _Label):
        nonlocal seq
        g = lbl.length - lam_p * lbl.f_p + lam_h * lbl.f_h
        heapq.heappush(heap, (g + h_cost[lbl.node], lbl.length, lbl.node, seq, lbl))
        seq += 1

    def dominated(n: _Label) -> bool:
        for m in labels[n.node]:
            if not m.alive:
                continue
            if m.length > n.length + _EPS:
                continue
            if use_width and m.f_p < n.f_p - _EPS:
                continue
            if use_time:
                if m.f_h > n.f_h + _EPS:
                    continue
                if abs(m.length - n.length) > _EPS:
                    continue
                if (m.visited & n.visited) != m.visited:
                    continue
            return True
        return False

    def absorb(n: _Label):
        kept = []
        for m in labels[n.node]:
            if not m.alive:
                continue
            drop = (
                n.length <= m.length + _EPS
                and (not use_width or n.f_p >= m.f_p - _EPS)
                and (
                    not use_time
                    or (n.f_h <= m.f_h + _EPS and abs(m.length - n.length) <= _EPS and (n.visited & m.visited) == n.visited)
                )
            )
            if drop:
                m.alive = False
            else:
                kept.append(m)
        kept.append(n)
        labels[n.node] = kept

    root = _Label(s_node, 0.0, w0, 0.0, 1 << s_node, None, None, False)
    absorb(root)
    push(root)
    stats = SearchStats()
    goal = None
    while heap:
        _, _, _, _, lbl = heapq.heappop(heap)
        if not lbl.alive:
            continue
        stats.pops += 1
        if stats.pops > params.max_pops:
            stats.capped = True
            raise PlanError(f"search cap of {params.max_pops} label pops exceeded")
        if lbl.node == t_node:
            goal = lbl
            break
        for eid in cg.adjacency[lbl.node]:
            ch = cg.edges[eid]
            rev = ch.v == lbl.node and ch.u != ch.v
            nxt = ch.u if rev else ch.v
            if nxt == lbl.node:
                continue  # self-loop cannot stay simple
            if use_time and (lbl.visited >> nxt) & 1:
                continue
            f_p = lbl.f_p
            f_h = lbl.f_h
            for (p_idx, off, dr) in _chain_events(ch, rev):
                w = widths[p_idx]
                if w < f_p:
                    f_p = w
                if use_time and conflicts[p_idx]:
                    arc = lbl.length + off
                    ob, oa = offs[p_idx][0 if dr >= 0 else 1]
                    t1 = max(t0, t0 + (arc - ob) / v_bar)
                    t2 = t0 + (arc + oa) / v_bar
                    f_h += ci_sum(t1, t2, conflicts[p_idx])
            nlbl = _Label(
                nxt,
                lbl.length + ch.length,
                f_p,
                f_h,
                lbl.visited | (1 << nxt),
                lbl,
                eid,
                rev,
            )
            stats.labels += 1
            if dominated(nlbl):
                continue
            absorb(nlbl)
            push(nlbl)
    if goal is None:
        raise PlanError("target not reachable on the roadmap")

    # reconstruct the full-resolution polyline and crossing list
    hops = []
    l = goal
    while l.parent is not None:
        hops.append((l.edge, l.rev))
        l = l.parent
    hops.reverse()
    vids = [cg.nodes[s_node]]
    crossings = []
    acc = 0.0
    for eid, rev in hops:
        ch = cg.edges[eid]
        vp = ch.vertex_path[::-1] if rev else ch.vertex_path
        vids.extend(vp[1:])
        for (p_idx, off, dr) in _chain_events(ch, rev):
            crossings.append(PathCrossing(p_idx, plist[p_idx].key, acc + off, dr))
        acc += ch.length
    points = g2.vertices[np.array(vids, dtype=np.int64)] if len(vids) > 1 else g2.vertices[vids[0]][None, :]
    arcs = geometry.polyline_arclengths(points)
    stamps = t0 + arcs / v_bar
    path = ReferencePath(points, stamps, crossings, v_bar=v_bar)
    time_map = build_time_map(path, plist)
    total = goal.length - lam_p * goal.f_p + lam_h * goal.f_h
    cost = CostBreakdown(length=goal.length, min_width=goal.f_p, conflict=goal.f_h, total=total)
    return PlanResult(path=path, time_map=time_map, cost=cost, stats=stats)
