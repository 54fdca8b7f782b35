"""Pure-numpy implementations of the kernel API.

Mirrors ``_core.pyx`` function by function; used when the compiled
extension is unavailable.  Scan orders and update formulas match the
compiled kernel so both backends return the same witnesses and iterate
counts up to floating-point noise.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve

_TINY = 1e-12


def poly_pair_witness(A: np.ndarray, B: np.ndarray):
    """Closest points between two convex polygon boundaries.

    Exact edge-pair enumeration.  Returns (distance, pa, pb) where pa lies
    on A's boundary and pb on B's.  First minimal pair in (A-edge, B-edge)
    scan order wins ties.
    """
    a1 = A
    a2 = np.roll(A, -1, axis=0)
    b1 = B
    b2 = np.roll(B, -1, axis=0)
    d1 = a2 - a1
    d2 = b2 - b1

    aa = np.einsum("ij,ij->i", d1, d1)
    ee = np.einsum("ij,ij->i", d2, d2)
    r = a1[:, None, :] - b1[None, :, :]
    cc = np.einsum("ik,ijk->ij", d1, r)
    ff = np.einsum("jk,ijk->ij", d2, r)
    bb = np.einsum("ik,jk->ij", d1, d2)

    denom = aa[:, None] * ee[None, :] - bb * bb
    s = np.where(denom > _TINY, (bb * ff - cc * ee[None, :]) / np.where(denom > _TINY, denom, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    e_safe = np.where(ee > _TINY, ee, 1.0)[None, :]
    t = (bb * s + ff) / e_safe
    # re-clamp s where t left [0, 1]
    a_safe = np.where(aa > _TINY, aa, 1.0)[:, None]
    s_low = np.clip(-cc / a_safe, 0.0, 1.0)
    s_high = np.clip((bb - cc) / a_safe, 0.0, 1.0)
    s = np.where(t < 0.0, s_low, np.where(t > 1.0, s_high, s))
    t = np.clip(t, 0.0, 1.0)

    pa = a1[:, None, :] + s[:, :, None] * d1[:, None, :]
    pb = b1[None, :, :] + t[:, :, None] * d2[None, :, :]
    diff = pa - pb
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    flat = int(np.argmin(dist2))
    i, j = divmod(flat, dist2.shape[1])
    d = float(np.sqrt(dist2[i, j]))
    return d, pa[i, j].copy(), pb[i, j].copy()


def line_poly_interval(px: float, py: float, dx: float, dy: float, P: np.ndarray):
    """Clip the line p + t*d against a convex CCW polygon.

    Returns (t_lo, t_hi, hit).  Boundary-inclusive; (0, 0, False) when the
    line misses the polygon.
    """
    lo = -np.inf
    hi = np.inf
    n = P.shape[0]
    for k in range(n):
        v0x, v0y = P[k, 0], P[k, 1]
        v1 = P[(k + 1) % n]
        ex = v1[0] - v0x
        ey = v1[1] - v0y
        # interior is left of the CCW edge: inward normal (-ey, ex)
        nx, ny = -ey, ex
        num = nx * (px - v0x) + ny * (py - v0y)
        den = nx * dx + ny * dy
        if abs(den) < _TINY:
            if num < 0.0:
                return 0.0, 0.0, False
            continue
        t = -num / den
        if den > 0.0:
            if t > lo:
                lo = t
        else:
            if t < hi:
                hi = t
        if lo > hi:
            return 0.0, 0.0, False
    if not np.isfinite(lo) or not np.isfinite(hi):
        return 0.0, 0.0, False
    return float(lo), float(hi), True


def segment_hits_interior(ax: float, ay: float, bx: float, by: float, P: np.ndarray, eps: float) -> bool:
    """True when the open segment (a, b) dips into the eps-interior of P.

    Grazing contacts (tangent touch of the boundary) do not count.
    """
    dx = bx - ax
    dy = by - ay
    lo = 0.0
    hi = 1.0
    n = P.shape[0]
    for k in range(n):
        v0x, v0y = P[k, 0], P[k, 1]
        v1 = P[(k + 1) % n]
        ex = v1[0] - v0x
        ey = v1[1] - v0y
        elen = np.hypot(ex, ey)
        if elen < _TINY:
            continue
        nx, ny = -ey / elen, ex / elen
        num = nx * (ax - v0x) + ny * (ay - v0y) - eps
        den = nx * dx + ny * dy
        if abs(den) < _TINY:
            if num < 0.0:
                return False
            continue
        t = -num / den
        if den > 0.0:
            if t > lo:
                lo = t
        else:
            if t < hi:
                hi = t
        if lo >= hi:
            return False
    return (hi - lo) > 1e-12


def admm_qp(
    P: np.ndarray,
    q: np.ndarray,
    G: np.ndarray,
    g: np.ndarray,
    x: np.ndarray,
    z: np.ndarray,
    y: np.ndarray,
    soft_rho: np.ndarray | None = None,
    sigma: float = 1e-6,
    alpha: float = 1.6,
    rho0: float = 0.1,
    eps_abs: float = 1e-6,
    eps_rel: float = 1e-6,
    max_iter: int = 2000,
    check_every: int = 25,
):
    """Operator-splitting solver for min 1/2 x'Px + q'x s.t. Gx <= g.

    Rows with soft_rho[i] > 0 trade the inequality for the quadratic
    penalty soft_rho[i]/2 * max(Gx - g, 0)_i^2.  Internally each such row
    gains a slack s >= 0 with G_i x - s_i <= g_i and cost soft_rho/2 s^2,
    so the penalty curvature sits in the x-update; the slack block is
    diagonal and is eliminated by Schur complement, keeping the factored
    matrix n by n.  x, z, y are warm-start buffers updated in place; on
    exit z and y describe the original rows.  Returns (status, iters,
    r_prim, r_dual); status 0 means converged, 1 means the iteration cap
    was reached.
    """
    m, n = G.shape
    GT = G.T
    rho = float(rho0)
    if soft_rho is None:
        soft_rho = np.zeros(m)
    soft = soft_rho > 0.0
    if soft.any():
        return _admm_qp_soft(
            P, q, G, g, x, z, y, soft_rho, sigma, alpha, rho, eps_abs, eps_rel, max_iter, check_every
        )

    def factor(rho_val):
        M = P + sigma * np.eye(n)
        if m:
            M = M + rho_val * GT @ G
        return cho_factor(M, lower=True)

    chol = factor(rho)
    r_prim = np.inf
    r_dual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        rhs = sigma * x - q + GT @ (rho * z - y) if m else sigma * x - q
        xt = cho_solve(chol, rhs)
        zt = G @ xt
        x[:] = alpha * xt + (1.0 - alpha) * x
        zr = alpha * zt + (1.0 - alpha) * z
        if m:
            w = zr + y / rho
            z_new = np.minimum(w, g)
            y += rho * (zr - z_new)
            z[:] = z_new

        if it % check_every == 0 or it == max_iter:
            Gx = G @ x
            Px = P @ x
            GTy = GT @ y
            r_prim = float(np.max(np.abs(Gx - z))) if m else 0.0
            r_dual = float(np.max(np.abs(Px + q + GTy)))
            sp = max(float(np.max(np.abs(Gx))) if m else 0.0, float(np.max(np.abs(z))) if m else 0.0)
            sd = max(float(np.max(np.abs(Px))), float(np.max(np.abs(GTy))), float(np.max(np.abs(q))))
            if r_prim <= eps_abs + eps_rel * sp and r_dual <= eps_abs + eps_rel * sd:
                return 0, it, r_prim, r_dual
            num = r_prim / max(sp, 1e-12)
            den = r_dual / max(sd, 1e-12)
            ratio = float(np.sqrt(num / max(den, 1e-18)))
            if m and (ratio > 5.0 or ratio < 0.2):
                rho = min(max(rho * ratio, 1e-6), 1e6)
                chol = factor(rho)
    return 1, it, r_prim, r_dual


def _admm_qp_soft(P, q, G, g, x, z, y, soft_rho, sigma, alpha, rho, eps_abs, eps_rel, max_iter, check_every):
    """Slack-extended splitting iteration with the slack block eliminated.

    Extended rows are the m originals (soft ones read G_i x - s_i <= g_i)
    followed by one positivity row -s_i <= 0 per soft row.
    """
    m, n = G.shape
    GT = G.T
    S = np.flatnonzero(soft_rho > 0.0)
    ns = S.size
    Gs = G[S]
    GsT = Gs.T
    ws = soft_rho[S]
    s = np.maximum(Gs @ x - g[S], 0.0)
    # z was seeded as min(Gx, g), which already equals Gs x - s on soft rows
    ze = np.concatenate([z, -s])
    ye = np.concatenate([y, np.zeros(ns)])
    ge = np.concatenate([g, np.zeros(ns)])

    def factor(rho_val):
        dinv = 1.0 / (ws + sigma + 2.0 * rho_val)
        M = P + sigma * np.eye(n) + rho_val * GT @ G - (rho_val * rho_val) * (GsT * dinv) @ Gs
        return cho_factor(M, lower=True), dinv

    chol, dinv = factor(rho)
    r_prim = np.inf
    r_dual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        tm = rho * ze[:m] - ye[:m]
        tp = rho * ze[m:] - ye[m:]
        rx = sigma * x - q + GT @ tm
        rs = sigma * s - tm[S] - tp
        xt = cho_solve(chol, rx + rho * (GsT @ (dinv * rs)))
        st = dinv * (rs + rho * (Gs @ xt))
        vm = G @ xt
        vm[S] -= st
        x[:] = alpha * xt + (1.0 - alpha) * x
        s = alpha * st + (1.0 - alpha) * s
        zr = alpha * np.concatenate([vm, -st]) + (1.0 - alpha) * ze
        w = zr + ye / rho
        z_new = np.minimum(w, ge)
        ye += rho * (zr - z_new)
        ze = z_new

        if it % check_every == 0 or it == max_iter:
            vm = G @ x
            vm[S] -= s
            v = np.concatenate([vm, -s])
            Px = P @ x
            GTy = GT @ ye[:m]
            dual_x = Px + q + GTy
            dual_s = ws * s - ye[:m][S] - ye[m:]
            r_prim = float(np.max(np.abs(v - ze)))
            r_dual = max(float(np.max(np.abs(dual_x))), float(np.max(np.abs(dual_s), initial=0.0)))
            sp = max(float(np.max(np.abs(v))), float(np.max(np.abs(ze))))
            sd = max(
                float(np.max(np.abs(Px))),
                float(np.max(np.abs(ws * s), initial=0.0)),
                float(np.max(np.abs(GTy))),
                float(np.max(np.abs(ye[:m][S] + ye[m:]), initial=0.0)),
                float(np.max(np.abs(q))),
            )
            if r_prim <= eps_abs + eps_rel * sp and r_dual <= eps_abs + eps_rel * sd:
                z[:] = ze[:m]
                y[:] = ye[:m]
                return 0, it, r_prim, r_dual
            num = r_prim / max(sp, 1e-12)
            den = r_dual / max(sd, 1e-12)
            ratio = float(np.sqrt(num / max(den, 1e-18)))
            if ratio > 5.0 or ratio < 0.2:
                rho = min(max(rho * ratio, 1e-6), 1e6)
                chol, dinv = factor(rho)
    z[:] = ze[:m]
    y[:] = ye[:m]
    return 1, it, r_prim, r_dual
