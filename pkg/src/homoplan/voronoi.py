"""Free-space roadmap: Voronoi diagram of inflated obstacle boundaries.

Obstacle boundaries (and the workspace boundary, acting as an exterior
pseudo-obstacle) are sampled densely; the point-site Voronoi diagram is
pruned to ridges separating different owners that lie in free space.  The
result is a graph of maximal-clearance edges.  Edges are annotated with the
passages they cross so the planner can track widths and crossing times.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Voronoi

from . import geometry
from .config import GraphParams


class GraphError(RuntimeError):
    pass


@dataclass
class PassageCrossing:
    """One passage crossing on an edge: index into the passage list, fraction
    along the edge in [0, 1], sign of travel relative to the passage axis."""

    passage: int
    fraction: float
    direction: int


class VoronoiGraph:
    def __init__(self, vertices, edges, owners=None):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        self.lengths = np.hypot(d[:, 0], d[:, 1])
        self.owners = owners if owners is not None else [() for _ in range(len(self.vertices))]
        self.crossings: list = [[] for _ in range(len(self.edges))]
        self.passages = None
        self.adjacency: list = [[] for _ in range(len(self.vertices))]
        for eid, (u, v) in enumerate(self.edges):
            self.adjacency[u].append(eid)
            self.adjacency[v].append(eid)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def other_end(self, eid: int, v: int) -> int:
        u, w = self.edges[eid]
        return int(w if u == v else u)

    def to_debug_json(self) -> str:
        return json.dumps(
            {"vertices": self.vertices.tolist(), "edges": self.edges.tolist()},
            sort_keys=True,
        )


def _sample_boundary(verts: np.ndarray, step: float) -> np.ndarray:
    pts = []
    n = len(verts)
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        length = float(np.hypot(*(b - a)))
        m = max(1, int(np.ceil(length / step)))
        t = np.arange(m) / m
        pts.append(a[None, :] + t[:, None] * (b - a)[None, :])
    return np.vstack(pts)


def _segments_block_any(a: np.ndarray, b: np.ndarray, poly: np.ndarray, eps: float = 1e-9) -> np.ndarray:
    """Vectorised: True where the open segment (a[i], b[i]) dips into poly's interior."""
    d = b - a
    lo = np.zeros(len(a))
    hi = np.ones(len(a))
    n = len(poly)
    alive = np.ones(len(a), dtype=bool)
    for k in range(n):
        v0 = poly[k]
        e = poly[(k + 1) % n] - v0
        elen = np.hypot(e[0], e[1])
        if elen < 1e-15:
            continue
        nx, ny = -e[1] / elen, e[0] / elen
        num = nx * (a[:, 0] - v0[0]) + ny * (a[:, 1] - v0[1]) - eps
        den = nx * d[:, 0] + ny * d[:, 1]
        par = np.abs(den) < 1e-15
        alive &= ~(par & (num < 0.0))
        t = -num / np.where(par, 1.0, den)
        lo = np.where(~par & (den > 0), np.maximum(lo, t), lo)
        hi = np.where(~par & (den < 0), np.minimum(hi, t), hi)
        alive &= lo < hi
        if not alive.any():
            break
    return alive & ((hi - lo) > 1e-12)


def _lattice_graph(lo: np.ndarray, hi: np.ndarray, spacing: float) -> VoronoiGraph:
    """8-connected lattice fallback for obstacle-free workspaces."""
    nx = max(2, int(np.floor((hi[0] - lo[0]) / spacing)) + 1)
    ny = max(2, int(np.floor((hi[1] - lo[1]) / spacing)) + 1)
    xs = np.linspace(lo[0], hi[0], nx)
    ys = np.linspace(lo[1], hi[1], ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([gx.ravel(), gy.ravel()], axis=1)

    def vid(i, j):
        return i * ny + j

    edges = []
    for i in range(nx):
        for j in range(ny):
            for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
                i2, j2 = i + di, j + dj
                if 0 <= i2 < nx and 0 <= j2 < ny:
                    edges.append((vid(i, j), vid(i2, j2)))
    return VoronoiGraph(verts, np.array(edges, dtype=np.int64))


def build_graph(obstacles, bounds_min, bounds_max, params: GraphParams | None = None) -> VoronoiGraph:
    """Maximal-clearance roadmap of the free space between inflated obstacles.

    With no obstacles an 8-connected lattice at `resolution` is returned.
    The workspace boundary contributes sites as an exterior pseudo-obstacle
    so corridors along walls are represented.
    """
    params = params or GraphParams()
    lo = np.asarray(bounds_min, dtype=float)
    hi = np.asarray(bounds_max, dtype=float)
    polys = [o.vertices if hasattr(o, "vertices") else geometry.as_points(o) for o in obstacles]
    if not polys:
        return _lattice_graph(lo, hi, params.resolution)
    step = params.resolution / 2.0
    sites = []
    owner = []
    rect = np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
    wall = _sample_boundary(rect, step)
    sites.append(wall)
    owner.append(np.full(len(wall), -1))
    for i, v in enumerate(polys):
        s = _sample_boundary(v, step)
        sites.append(s)
        owner.append(np.full(len(s), i))
    sites = np.vstack(sites)
    owner = np.concatenate(owner)

    vor = Voronoi(sites)
    rp = np.asarray(vor.ridge_points)
    rv = np.asarray(vor.ridge_vertices)
    finite = np.all(rv >= 0, axis=1)
    diff = owner[rp[:, 0]] != owner[rp[:, 1]]
    cand = rv[finite & diff]
    pair_owner = np.stack([owner[rp[finite & diff, 0]], owner[rp[finite & diff, 1]]], axis=1)
    if len(cand) == 0:
        raise GraphError("no free-space ridges found")

    coords = vor.vertices
    ok_vertex = np.all((coords >= lo - 1e-9) & (coords <= hi + 1e-9), axis=1)
    for v in polys:
        inside = geometry.points_in_polygon(coords, v, eps=0.0)
        ok_vertex &= ~inside
    keep = ok_vertex[cand[:, 0]] & ok_vertex[cand[:, 1]]
    cand = cand[keep]
    pair_owner = pair_owner[keep]
    a = coords[cand[:, 0]]
    b = coords[cand[:, 1]]
    seg_ok = np.ones(len(cand), dtype=bool)
    for v in polys:
        seg_ok &= ~_segments_block_any(a, b, v)
    cand = cand[seg_ok]
    pair_owner = pair_owner[seg_ok]

    used = np.unique(cand)
    remap = -np.ones(len(coords), dtype=np.int64)
    remap[used] = np.arange(len(used))
    edges = remap[cand]
    edges = np.sort(edges, axis=1)
    edges_unique = np.unique(edges, axis=0)
    edges_unique = edges_unique[edges_unique[:, 0] != edges_unique[:, 1]]
    g = VoronoiGraph(coords[used], edges_unique)
    owners = [set() for _ in range(len(used))]
    for row, (u, v) in enumerate(edges):
        if u == v:
            continue
        for vid in (u, v):
            owners[vid].update(int(o) for o in pair_owner[row])
    g.owners = [tuple(sorted(s)) for s in owners]
    return g


def annotate_crossings(graph: VoronoiGraph, passage_set) -> None:
    """Mark each edge with the passages it crosses.

    A crossing exists where the edge endpoints straddle the passage's
    narrowest-segment line inside the passage region.  Endpoints exactly on
    the line count as the positive side, so a crossing at a shared vertex
    lands on exactly one of the two touching edges no matter how their
    endpoints are stored.
    """
    graph.passages = passage_set
    graph.crossings = [[] for _ in range(graph.n_edges)]
    if graph.n_edges == 0:
        return
    a = graph.vertices[graph.edges[:, 0]]
    b = graph.vertices[graph.edges[:, 1]]
    for p_idx, p in enumerate(passage_set):
        n0 = p.narrowest[0]
        axis = p.axis
        sa = (a - n0) @ axis
        sb = (b - n0) @ axis
        ok = (sa < 0.0) != (sb < 0.0)
        if not ok.any():
            continue
        idx = np.nonzero(ok)[0]
        t = sa[idx] / (sa[idx] - sb[idx])
        pts = a[idx] + t[:, None] * (b[idx] - a[idx])
        inside = geometry.points_in_polygon(pts, p.region, eps=1e-9)
        for row, eid in enumerate(idx):
            if inside[row]:
                direction = 1 if sb[eid] > sa[eid] else -1
                graph.crossings[eid].append(PassageCrossing(p_idx, float(t[row]), direction))
    for lst in graph.crossings:
        lst.sort(key=lambda cr: (cr.fraction, cr.passage))


def _annotate_edge(graph: VoronoiGraph, eid: int) -> None:
    """Annotate a single (newly added) edge against the stored passage set."""
    if graph.passages is None:
        return
    a = graph.vertices[graph.edges[eid, 0]]
    b = graph.vertices[graph.edges[eid, 1]]
    out = []
    for p_idx, p in enumerate(graph.passages):
        sa = float((a - p.narrowest[0]) @ p.axis)
        sb = float((b - p.narrowest[0]) @ p.axis)
        if (sa < 0.0) == (sb < 0.0):
            continue
        t = sa / (sa - sb)
        pt = a + t * (b - a)
        if geometry.point_in_polygon(pt, p.region, eps=1e-9):
            out.append(PassageCrossing(p_idx, t, 1 if sb > sa else -1))
    out.sort(key=lambda cr: (cr.fraction, cr.passage))
    graph.crossings[eid] = out


class AttachError(RuntimeError):
    pass


def drop_blocked_edges(graph: VoronoiGraph, centers, radii) -> VoronoiGraph:
    """Copy of the graph without edges passing within radii of the centers.

    Vertices and passage annotations are preserved; used to route around
    agents parked on the roadmap.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    radii = np.asarray(radii, dtype=float).reshape(-1)
    keep = np.ones(graph.n_edges, dtype=bool)
    if len(centers) and graph.n_edges:
        a = graph.vertices[graph.edges[:, 0]]
        d = graph.vertices[graph.edges[:, 1]] - a
        dd = np.einsum("ij,ij->i", d, d)
        for c, r in zip(centers, radii):
            t = np.clip(((c - a) * d).sum(axis=1) / np.where(dd > 1e-18, dd, 1.0), 0.0, 1.0)
            closest = a + t[:, None] * d
            keep &= np.hypot(*(closest - c).T) >= r
    g = VoronoiGraph(graph.vertices.copy(), graph.edges[keep], list(graph.owners))
    g.crossings = [list(graph.crossings[e]) for e in np.nonzero(keep)[0]]
    g.passages = graph.passages
    return g


def attach_endpoints(graph: VoronoiGraph, start, target, obstacles=()) -> tuple:
    """Copy the graph with start/target connected by collision-free segments.

    Returns (new_graph, start_id, target_id).  A point coinciding with an
    existing vertex reuses it; otherwise the nearest vertex reachable by a
    straight segment that avoids every obstacle interior is linked.
    """
    polys = [o.vertices if hasattr(o, "vertices") else geometry.as_points(o) for o in obstacles]
    g = VoronoiGraph(graph.vertices.copy(), graph.edges.copy(), list(graph.owners))
    g.crossings = [list(c) for c in graph.crossings]
    g.passages = graph.passages
    ids = []
    for label, p in (("start", start), ("target", target)):
        p = np.asarray(p, dtype=float).reshape(2)
        d2 = np.einsum("ij,ij->i", g.vertices - p, g.vertices - p)
        nearest = int(np.argmin(d2))
        if d2[nearest] < 1e-18:
            ids.append(nearest)
            continue
        order = np.argsort(d2, kind="stable")
        hook = -1
        for cand in order[:500]:
            if not g.adjacency[cand]:
                continue
            q = g.vertices[cand]
            if geometry.segment_polygon_free(p, q, polys):
                hook = int(cand)
                break
        if hook < 0:
            raise AttachError(f"no collision-free connector for {label} at {p.tolist()}")
        new_id = g.n_vertices
        g.vertices = np.vstack([g.vertices, p[None, :]])
        g.owners.append(())
        g.adjacency.append([])
        g.edges = np.vstack([g.edges, [[min(hook, new_id), max(hook, new_id)]]])
        g.lengths = np.append(g.lengths, float(np.sqrt(d2[hook])))
        eid = g.n_edges - 1
        g.adjacency[hook].append(eid)
        g.adjacency[new_id].append(eid)
        g.crossings.append([])
        _annotate_edge(g, eid)
        ids.append(new_id)
    return g, ids[0], ids[1]


@dataclass
class ChainEdge:
    """Contracted degree-2 chain between two junction nodes.

    Crossings are (passage index, arc offset from the u end, direction when
    travelled u->v).  vertex_path holds original graph vertex ids.
    """

    u: int
    v: int
    length: float
    vertex_path: list
    crossings: list


class ContractedGraph:
    def __init__(self, nodes, coords, edges):
        self.nodes = nodes  # original vertex ids
        self.coords = coords
        self.edges = edges  # list[ChainEdge] with u/v as *node indices*
        self.adjacency = [[] for _ in nodes]
        for eid, ce in enumerate(edges):
            self.adjacency[ce.u].append(eid)
            if ce.v != ce.u:
                self.adjacency[ce.v].append(eid)


def contract_graph(graph: VoronoiGraph, keep=()) -> ContractedGraph:
    """Collapse degree-2 chains into single weighted edges.

    Vertices in `keep` always become junction nodes.  Pure-cycle components
    are anchored at their smallest vertex id.
    """
    keep = set(int(k) for k in keep)
    deg = np.array([len(adj) for adj in graph.adjacency])
    junction = (deg != 2) | np.isin(np.arange(graph.n_vertices), sorted(keep))
    # anchor pure cycles
    seen = junction.copy()
    for v0 in range(graph.n_vertices):
        if seen[v0] or deg[v0] != 2:
            continue
        comp = [v0]
        seen[v0] = True
        stack = [v0]
        while stack:
            v = stack.pop()
            for eid in graph.adjacency[v]:
                w = graph.other_end(eid, v)
                if not seen[w] and not junction[w]:
                    seen[w] = True
                    comp.append(w)
                    stack.append(w)
        junction[min(comp)] = True

    nodes = [int(v) for v in np.nonzero(junction)[0]]
    node_index = {v: i for i, v in enumerate(nodes)}
    consumed = np.zeros(graph.n_edges, dtype=bool)
    chains = []
    for v in nodes:
        for eid in sorted(graph.adjacency[v]):
            if consumed[eid]:
                continue
            path = [v]
            crossings = []
            acc = 0.0
            cur = v
            e = eid
            while True:
                consumed[e] = True
                u0, v0 = graph.edges[e]
                forward = int(u0) == cur
                nxt = int(v0) if forward else int(u0)
                elen = float(graph.lengths[e])
                for cr in graph.crossings[e]:
                    f = cr.fraction if forward else 1.0 - cr.fraction
                    dr = cr.direction if forward else -cr.direction
                    crossings.append((cr.passage, acc + f * elen, dr))
                acc += elen
                path.append(nxt)
                cur = nxt
                if junction[cur]:
                    break
                nxt_edges = [k for k in graph.adjacency[cur] if k != e]
                if not nxt_edges:
                    break  # dead end of a chain (shouldn't happen at deg==2)
                e = nxt_edges[0]
            crossings.sort(key=lambda c: (c[1], c[0]))
            chains.append(ChainEdge(node_index[v], node_index.get(cur, -1), acc, path, crossings))
    for ce in chains:
        if ce.v < 0:
            raise GraphError("chain walk ended off-junction")
    coords = graph.vertices[np.array(nodes, dtype=np.int64)] if nodes else np.zeros((0, 2))
    return ContractedGraph(nodes, coords, chains)
