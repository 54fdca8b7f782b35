"""Independent reference implementations used by the test suite.

Each oracle recomputes a quantity the package produces, using a different
algorithm (exhaustive enumeration, dense sampling, first-order descent), so
agreement is evidence of correctness rather than shared bugs.
"""

import math

import numpy as np
from scipy.spatial.distance import cdist


# ---------------------------------------------------------------------------
# global planner: exhaustive simple-path enumeration


def enumerate_best_cost(graph, sid, tid, passages, higher_maps, params, t0=0.0):
    """Minimum path cost over all simple vertex paths from sid to tid.

    Walks the raw (uncontracted) graph depth-first and prices every path
    from scratch: length - lambda_p * min crossed width + lambda_h * summed
    conflict, with crossing times t0 + arc / v_bar. Returns None when no
    path exists.
    """
    widths = [p.width for p in passages]
    offs = [(p.spans_for_crossing(+1), p.spans_for_crossing(-1)) for p in passages]
    keys = [p.key for p in passages]
    lam_p, lam_h = params.lambda_p, params.lambda_h
    alpha, v_bar, w0 = params.alpha, params.v_bar, params.w_default

    def crossing_conflict(arc, p_idx, direction):
        if lam_h == 0.0:
            return 0.0
        ob, oa = offs[p_idx][0 if direction >= 0 else 1]
        t1 = max(t0, t0 + (arc - ob) / v_bar)
        t2 = t0 + (arc + oa) / v_bar
        total = 0.0
        for m in higher_maps:
            entries = m.spans.get(keys[p_idx])
            if not entries:
                continue
            best = 0.0
            for a, b in entries:
                if t1 <= b and a <= t2:
                    best = 1.0
                    break
                best = max(best, math.exp(alpha * abs(max(t1, a) - min(t2, b))))
            total += best
        return total

    best = [None]
    visited = np.zeros(graph.n_vertices, dtype=bool)

    def walk(v, length, f_p, f_h):
        if v == tid:
            cost = length - lam_p * f_p + lam_h * f_h
            if best[0] is None or cost < best[0]:
                best[0] = cost
            return
        for eid in graph.adjacency[v]:
            a, b = graph.edges[eid]
            nxt = int(b if a == v else a)
            if nxt == v or visited[nxt]:
                continue
            elen = float(graph.lengths[eid])
            fp2, fh2 = f_p, f_h
            for cr in graph.crossings[eid]:
                frac = cr.fraction if a == v else 1.0 - cr.fraction
                direction = cr.direction if a == v else -cr.direction
                fp2 = min(fp2, widths[cr.passage])
                fh2 += crossing_conflict(length + frac * elen, cr.passage, direction)
            visited[nxt] = True
            walk(nxt, length + elen, fp2, fh2)
            visited[nxt] = False

    visited[sid] = True
    walk(sid, 0.0, w0, 0.0)
    return best[0]


# ---------------------------------------------------------------------------
# passages: dense boundary sampling and fine-step line shifting


def sample_boundary(verts, step):
    """Points along the polygon boundary at most `step` apart."""
    pts = []
    n = len(verts)
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        length = float(np.hypot(*(b - a)))
        m = max(1, int(math.ceil(length / step)))
        for k in range(m):
            pts.append(a + (k / m) * (b - a))
    return np.asarray(pts)


def boundary_min_distance(A, B, step=2e-3):
    """Shortest boundary-to-boundary distance and its sample pair."""
    pa = sample_boundary(A, step)
    pb = sample_boundary(B, step)
    d = cdist(pa, pb)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    return float(d[i, j]), pa[i], pb[j]


def _clip_line(p0, m_hat, verts):
    """[t_lo, t_hi] chord of the line p0 + t*m_hat through a convex CCW
    polygon, found by intersecting edge halfplanes; None when it misses."""
    lo, hi = -np.inf, np.inf
    n = len(verts)
    for i in range(n):
        v0 = verts[i]
        e = verts[(i + 1) % n] - v0
        nrm = np.array([-e[1], e[0]])
        num = float(nrm @ (p0 - v0))
        den = float(nrm @ m_hat)
        if abs(den) < 1e-12:
            if num < 0.0:
                return None
            continue
        t = -num / den
        if den > 0.0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
        if lo > hi:
            return None
    if not np.isfinite(lo) or not np.isfinite(hi):
        return None
    return lo, hi


def shifted_passage(A, B, l_max, step):
    """Entrance/narrowest/exit by brute-force line shifting at `step`.

    The narrowest segment comes from the exact vertex-edge witness; the
    shifted segments keep the last line offset where both polygons are still
    cut and the gap between their chords stays within l_max. Segments run
    A-side to B-side. Returns (entrance, narrowest, exit, offsets, width,
    axis) or None when the pair is wider than l_max; offsets are the signed
    axis displacements of the two kept lines from the narrowest.
    """
    width, pa, pb = convex_pair_witness(A, B)
    if width > l_max:
        return None
    m_hat = (pb - pa) / width
    axis = np.array([-m_hat[1], m_hat[0]])

    def gap_at(p0):
        ia = _clip_line(p0, m_hat, A)
        ib = _clip_line(p0, m_hat, B)
        if ia is None or ib is None:
            return None
        if ia[1] <= ib[0] + 1e-12:
            return p0 + ia[1] * m_hat, p0 + ib[0] * m_hat, ib[0] - ia[1]
        if ib[1] <= ia[0] + 1e-12:
            return p0 + ia[0] * m_hat, p0 + ib[1] * m_hat, ia[0] - ib[1]
        return None

    sides = []
    offsets = []
    for sign in (+1.0, -1.0):
        last = (pa.copy(), pb.copy())
        kept = 0
        m = 1
        while m * step <= 60.0:
            hit = gap_at(pa + sign * m * step * axis)
            if hit is None or hit[2] > l_max:
                break
            last = (hit[0], hit[1])
            kept = m
            m += 1
        sides.append(np.stack(last))
        offsets.append(sign * kept * step)
    return sides[0], np.stack([pa, pb]), sides[1], tuple(offsets), width, axis


# ---------------------------------------------------------------------------
# QP: dual projected gradient (FISTA) for feasible inequality QPs


def projected_gradient_qp(P, q, G, g, max_iter=200000, tol=1e-10):
    """High-accuracy reference solution of min 1/2 x'Px + q'x, Gx <= g.

    Runs accelerated projected gradient on the dual (projection onto y >= 0
    is a clamp), which shares no machinery with the operator-splitting
    solver under test. Requires a feasible problem; returns (x, objective).
    """
    P = np.asarray(P, dtype=float)
    q = np.asarray(q, dtype=float)
    G = np.asarray(G, dtype=float)
    g = np.asarray(g, dtype=float)
    m = len(g)
    if m == 0:
        x = np.linalg.solve(P, -q)
        return x, float(0.5 * x @ P @ x + q @ x)
    Pinv_GT = np.linalg.solve(P, G.T)
    Pinv_q = np.linalg.solve(P, q)
    H = G @ Pinv_GT
    c = G @ Pinv_q + g
    L = float(np.linalg.eigvalsh(H).max())
    eta = 1.0 / max(L, 1e-12)
    y = np.zeros(m)
    w = y.copy()
    t = 1.0
    for it in range(max_iter):
        grad = H @ w + c
        y_new = np.maximum(w - eta * grad, 0.0)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        w = y_new + ((t - 1.0) / t_new) * (y_new - y)
        # restart on non-monotone dual progress keeps FISTA stable
        if (y_new - y) @ grad > 0.0:
            w = y_new
            t_new = 1.0
        y = y_new
        t = t_new
        if it % 200 == 0:
            x = -(Pinv_q + Pinv_GT @ y)
            r = G @ x - g
            if r.max(initial=-np.inf) <= tol and abs(y @ r) <= tol:
                break
    x = -(Pinv_q + Pinv_GT @ y)
    return x, float(0.5 * x @ P @ x + q @ x)


# ---------------------------------------------------------------------------
# shared geometry helpers


def point_segment_distance(p, a, b):
    """Exact distance from a point to a segment."""
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    d = b - a
    dd = float(d @ d)
    t = float((p - a) @ d) / dd if dd > 1e-18 else 0.0
    t = min(max(t, 0.0), 1.0)
    return float(np.hypot(*(a + t * d - p)))


def convex_pair_distance(A, B):
    """Exact distance between convex polygon boundaries via vertex-edge
    enumeration (the minimum is always attained at a vertex of one hull)."""
    return convex_pair_witness(A, B)[0]


def convex_pair_witness(A, B):
    """Exact (distance, point_on_A, point_on_B) via vertex-edge enumeration.

    Independent of the package's edge-edge clamped enumeration. When the
    minimum is attained by several distinct feature pairs (parallel facing
    edges), the returned witness is one of them; callers needing uniqueness
    should check witness_is_unique first.
    """
    best = (np.inf, None, None)
    for swap, (P, Q) in enumerate(((A, B), (B, A))):
        for p in P:
            for i in range(len(Q)):
                a, b = Q[i], Q[(i + 1) % len(Q)]
                d = b - a
                dd = float(d @ d)
                t = float((p - a) @ d) / dd if dd > 1e-18 else 0.0
                t = min(max(t, 0.0), 1.0)
                foot = a + t * d
                dist = float(np.hypot(*(foot - p)))
                if dist < best[0]:
                    best = (dist, foot, p) if swap else (dist, p, foot)
    return best


def witness_is_unique(A, B, separation=1e-3, slack=1e-9):
    """True when every near-minimal feature pair yields the same witness.

    Degenerate pairs (parallel facing edges) admit a continuum of shortest
    segments; no oracle convention is canonical there, so endpoint
    comparisons skip them.
    """
    d0, pa0, pb0 = convex_pair_witness(A, B)
    hits = []
    for swap, (P, Q) in enumerate(((A, B), (B, A))):
        for p in P:
            for i in range(len(Q)):
                a, b = Q[i], Q[(i + 1) % len(Q)]
                dseg = b - a
                dd = float(dseg @ dseg)
                t = float((p - a) @ dseg) / dd if dd > 1e-18 else 0.0
                t = min(max(t, 0.0), 1.0)
                foot = a + t * dseg
                dist = float(np.hypot(*(foot - p)))
                if dist <= d0 + slack:
                    w = (foot, p) if swap else (p, foot)
                    hits.append(w)
    for wa, wb in hits:
        if np.hypot(*(wa - pa0)) > separation or np.hypot(*(wb - pb0)) > separation:
            return False
    return True


def random_convex(rng, center, radius, n=8):
    """Random convex polygon: hull of points on a jittered circle."""
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = rng.uniform(0.4 * radius, radius, n)
    pts = np.asarray(center) + np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
    from scipy.spatial import ConvexHull

    return pts[ConvexHull(pts).vertices]
