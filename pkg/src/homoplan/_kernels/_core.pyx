# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: operator-splitting QP and convex-polygon primitives.

Mirrors ``pyfallback.py`` function by function.  Scan orders and update
formulas match the fallback so both backends return the same witnesses
and iterate counts up to floating-point noise.
"""

import numpy as np

from libc.math cimport INFINITY, fabs, hypot, isfinite, sqrt

cdef double TINY = 1e-12


def poly_pair_witness(A, B):
    """Closest points between two convex polygon boundaries.

    Exact edge-pair enumeration.  Returns (distance, pa, pb) where pa lies
    on A's boundary and pb on B's.  First minimal pair in (A-edge, B-edge)
    scan order wins ties.
    """
    cdef double[:, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] Bv = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t na = Av.shape[0], nb = Bv.shape[0], i, j, i2, j2
    cdef double a1x, a1y, d1x, d1y, aa, a_safe
    cdef double b1x, b1y, d2x, d2y, ee, e_safe
    cdef double rx, ry, cc, ff, bb, denom, s, t
    cdef double pax, pay, pbx, pby, ddx, ddy, dist2
    cdef double best = INFINITY, bax = 0.0, bay = 0.0, bbx = 0.0, bby = 0.0
    for i in range(na):
        i2 = i + 1 if i + 1 < na else 0
        a1x = Av[i, 0]
        a1y = Av[i, 1]
        d1x = Av[i2, 0] - a1x
        d1y = Av[i2, 1] - a1y
        aa = d1x * d1x + d1y * d1y
        a_safe = aa if aa > TINY else 1.0
        for j in range(nb):
            j2 = j + 1 if j + 1 < nb else 0
            b1x = Bv[j, 0]
            b1y = Bv[j, 1]
            d2x = Bv[j2, 0] - b1x
            d2y = Bv[j2, 1] - b1y
            ee = d2x * d2x + d2y * d2y
            e_safe = ee if ee > TINY else 1.0
            rx = a1x - b1x
            ry = a1y - b1y
            cc = d1x * rx + d1y * ry
            ff = d2x * rx + d2y * ry
            bb = d1x * d2x + d1y * d2y
            denom = aa * ee - bb * bb
            if denom > TINY:
                s = (bb * ff - cc * ee) / denom
                if s < 0.0:
                    s = 0.0
                elif s > 1.0:
                    s = 1.0
            else:
                s = 0.0
            t = (bb * s + ff) / e_safe
            # re-clamp s where t left [0, 1]
            if t < 0.0:
                s = -cc / a_safe
                t = 0.0
            elif t > 1.0:
                s = (bb - cc) / a_safe
                t = 1.0
            if s < 0.0:
                s = 0.0
            elif s > 1.0:
                s = 1.0
            pax = a1x + s * d1x
            pay = a1y + s * d1y
            pbx = b1x + t * d2x
            pby = b1y + t * d2y
            ddx = pax - pbx
            ddy = pay - pby
            dist2 = ddx * ddx + ddy * ddy
            if dist2 < best:
                best = dist2
                bax = pax
                bay = pay
                bbx = pbx
                bby = pby
    return sqrt(best), np.array([bax, bay]), np.array([bbx, bby])


def line_poly_interval(double px, double py, double dx, double dy, P):
    """Clip the line p + t*d against a convex CCW polygon.

    Returns (t_lo, t_hi, hit).  Boundary-inclusive; (0, 0, False) when the
    line misses the polygon.
    """
    cdef double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = Pv.shape[0], k, k2
    cdef double lo = -INFINITY, hi = INFINITY
    cdef double v0x, v0y, ex, ey, nx, ny, num, den, t
    for k in range(n):
        k2 = k + 1 if k + 1 < n else 0
        v0x = Pv[k, 0]
        v0y = Pv[k, 1]
        ex = Pv[k2, 0] - v0x
        ey = Pv[k2, 1] - v0y
        # interior is left of the CCW edge: inward normal (-ey, ex)
        nx = -ey
        ny = ex
        num = nx * (px - v0x) + ny * (py - v0y)
        den = nx * dx + ny * dy
        if fabs(den) < TINY:
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
    if not isfinite(lo) or not isfinite(hi):
        return 0.0, 0.0, False
    return lo, hi, True


def segment_hits_interior(double ax, double ay, double bx, double by, P, double eps):
    """True when the open segment (a, b) dips into the eps-interior of P.

    Grazing contacts (tangent touch of the boundary) do not count.
    """
    cdef double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = Pv.shape[0], k, k2
    cdef double dx = bx - ax, dy = by - ay
    cdef double lo = 0.0, hi = 1.0
    cdef double v0x, v0y, ex, ey, elen, nx, ny, num, den, t
    for k in range(n):
        k2 = k + 1 if k + 1 < n else 0
        v0x = Pv[k, 0]
        v0y = Pv[k, 1]
        ex = Pv[k2, 0] - v0x
        ey = Pv[k2, 1] - v0y
        elen = hypot(ex, ey)
        if elen < TINY:
            continue
        nx = -ey / elen
        ny = ex / elen
        num = nx * (ax - v0x) + ny * (ay - v0y) - eps
        den = nx * dx + ny * dy
        if fabs(den) < TINY:
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


cdef int _chol_inplace(double[:, ::1] M, Py_ssize_t n) noexcept nogil:
    """Lower Cholesky in place; -1 when a pivot is not positive."""
    cdef Py_ssize_t i, j, k
    cdef double acc
    for j in range(n):
        acc = M[j, j]
        for k in range(j):
            acc -= M[j, k] * M[j, k]
        if acc <= 0.0:
            return -1
        M[j, j] = sqrt(acc)
        for i in range(j + 1, n):
            acc = M[i, j]
            for k in range(j):
                acc -= M[i, k] * M[j, k]
            M[i, j] = acc / M[j, j]
    return 0


cdef void _chol_solve(double[:, ::1] L, double[::1] b, Py_ssize_t n) noexcept nogil:
    """Solve (L L') v = b in place given the lower factor."""
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(n):
        acc = b[i]
        for k in range(i):
            acc -= L[i, k] * b[k]
        b[i] = acc / L[i, i]
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for k in range(i + 1, n):
            acc -= L[k, i] * b[k]
        b[i] = acc / L[i, i]


cdef int _factor_hard(double[:, ::1] M, double[:, ::1] P, double[:, ::1] GtG,
                      double sigma, double rho, Py_ssize_t n, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t a, b
    for a in range(n):
        for b in range(n):
            M[a, b] = P[a, b] + (rho * GtG[a, b] if m > 0 else 0.0)
        M[a, a] += sigma
    return _chol_inplace(M, n)


def admm_qp(P, q, G, g, x, z, y, soft_rho=None, double sigma=1e-6, double alpha=1.6,
            double rho0=0.1, double eps_abs=1e-6, double eps_rel=1e-6,
            int max_iter=2000, int check_every=25):
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
    cdef double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[:, ::1] Gv = np.ascontiguousarray(G, dtype=np.float64).reshape(len(g), len(q))
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef double[::1] xv = x
    cdef double[::1] zv = z
    cdef double[::1] yv = y
    cdef Py_ssize_t m = Gv.shape[0], n = Pv.shape[0]
    if soft_rho is not None and np.any(np.asarray(soft_rho) > 0.0):
        return _admm_soft(Pv, qv, Gv, gv, xv, zv, yv,
                          np.ascontiguousarray(soft_rho, dtype=np.float64),
                          sigma, alpha, rho0, eps_abs, eps_rel, max_iter, check_every)
    return _admm_hard(Pv, qv, Gv, gv, xv, zv, yv,
                      sigma, alpha, rho0, eps_abs, eps_rel, max_iter, check_every)


cdef _admm_hard(double[:, ::1] P, double[::1] q, double[:, ::1] G, double[::1] g,
                double[::1] x, double[::1] z, double[::1] y,
                double sigma, double alpha, double rho,
                double eps_abs, double eps_rel, int max_iter, int check_every):
    cdef Py_ssize_t m = G.shape[0], n = P.shape[0], i, k, a, b
    cdef double[:, ::1] GtG = np.zeros((n, n))
    cdef double[:, ::1] M = np.empty((n, n))
    cdef double[::1] xt = np.empty(n)
    cdef double[::1] Px = np.empty(n)
    cdef double[::1] GTy = np.empty(n)
    cdef double[::1] Gx = np.empty(m) if m else np.empty(0)
    cdef double r_prim = INFINITY, r_dual = INFINITY
    cdef double acc, tmk, zt, zr, w, zn, sp, sd, num, den, ratio, v
    cdef int it = 0
    for k in range(m):
        for a in range(n):
            for b in range(n):
                GtG[a, b] += G[k, a] * G[k, b]
    if _factor_hard(M, P, GtG, sigma, rho, n, m) != 0:
        raise np.linalg.LinAlgError("QP matrix is not positive definite")
    while it < max_iter:
        it += 1
        # rhs = sigma*x - q + GT @ (rho*z - y)
        for i in range(n):
            xt[i] = sigma * x[i] - q[i]
        for k in range(m):
            tmk = rho * z[k] - y[k]
            for i in range(n):
                xt[i] += G[k, i] * tmk
        _chol_solve(M, xt, n)
        for k in range(m):
            zt = 0.0
            for i in range(n):
                zt += G[k, i] * xt[i]
            zr = alpha * zt + (1.0 - alpha) * z[k]
            w = zr + y[k] / rho
            zn = w if w < g[k] else g[k]
            y[k] += rho * (zr - zn)
            z[k] = zn
        for i in range(n):
            x[i] = alpha * xt[i] + (1.0 - alpha) * x[i]

        if it % check_every == 0 or it == max_iter:
            r_prim = 0.0
            sp = 0.0
            for k in range(m):
                acc = 0.0
                for i in range(n):
                    acc += G[k, i] * x[i]
                Gx[k] = acc
                v = fabs(acc - z[k])
                if v > r_prim:
                    r_prim = v
                if fabs(acc) > sp:
                    sp = fabs(acc)
                if fabs(z[k]) > sp:
                    sp = fabs(z[k])
            sd = 0.0
            r_dual = 0.0
            for i in range(n):
                acc = 0.0
                for k in range(n):
                    acc += P[i, k] * x[k]
                Px[i] = acc
                if fabs(acc) > sd:
                    sd = fabs(acc)
            for i in range(n):
                acc = 0.0
                for k in range(m):
                    acc += G[k, i] * y[k]
                GTy[i] = acc
                if fabs(acc) > sd:
                    sd = fabs(acc)
            for i in range(n):
                if fabs(q[i]) > sd:
                    sd = fabs(q[i])
                v = fabs(Px[i] + q[i] + GTy[i])
                if v > r_dual:
                    r_dual = v
            if r_prim <= eps_abs + eps_rel * sp and r_dual <= eps_abs + eps_rel * sd:
                return 0, it, r_prim, r_dual
            num = r_prim / (sp if sp > 1e-12 else 1e-12)
            den = r_dual / (sd if sd > 1e-12 else 1e-12)
            ratio = sqrt(num / (den if den > 1e-18 else 1e-18))
            if m > 0 and (ratio > 5.0 or ratio < 0.2):
                rho = ratio * rho
                if rho < 1e-6:
                    rho = 1e-6
                elif rho > 1e6:
                    rho = 1e6
                if _factor_hard(M, P, GtG, sigma, rho, n, m) != 0:
                    raise np.linalg.LinAlgError("QP matrix is not positive definite")
    return 1, it, r_prim, r_dual


cdef int _factor_soft(double[:, ::1] M, double[:, ::1] P, double[:, ::1] GtG,
                      double[:, ::1] Gs, double[::1] ws, double[::1] dinv,
                      double sigma, double rho, Py_ssize_t n, Py_ssize_t ns) noexcept nogil:
    cdef Py_ssize_t a, b, si
    cdef double coef
    for si in range(ns):
        dinv[si] = 1.0 / (ws[si] + sigma + 2.0 * rho)
    for a in range(n):
        for b in range(n):
            M[a, b] = P[a, b] + rho * GtG[a, b]
        M[a, a] += sigma
    for si in range(ns):
        coef = rho * rho * dinv[si]
        for a in range(n):
            for b in range(n):
                M[a, b] -= coef * Gs[si, a] * Gs[si, b]
    return _chol_inplace(M, n)


cdef _admm_soft(double[:, ::1] P, double[::1] q, double[:, ::1] G, double[::1] g,
                double[::1] x, double[::1] z, double[::1] y, double[::1] soft_rho,
                double sigma, double alpha, double rho,
                double eps_abs, double eps_rel, int max_iter, int check_every):
    """Slack-extended splitting iteration with the slack block eliminated.

    Extended rows are the m originals (soft ones read G_i x - s_i <= g_i)
    followed by one positivity row -s_i <= 0 per soft row.
    """
    cdef Py_ssize_t m = G.shape[0], n = P.shape[0], i, k, a, b, si
    S_arr = np.flatnonzero(np.asarray(soft_rho) > 0.0).astype(np.intp)
    cdef Py_ssize_t[::1] S = S_arr
    cdef Py_ssize_t ns = S.shape[0]
    cdef double[:, ::1] Gs = np.ascontiguousarray(np.asarray(G)[S_arr])
    cdef double[::1] ws = np.ascontiguousarray(np.asarray(soft_rho)[S_arr])
    cdef double[:, ::1] GtG = np.zeros((n, n))
    cdef double[:, ::1] M = np.empty((n, n))
    cdef double[::1] dinv = np.empty(ns)
    cdef double[::1] s = np.empty(ns)
    cdef double[::1] ze = np.empty(m + ns)
    cdef double[::1] ye = np.empty(m + ns)
    cdef double[::1] ge = np.empty(m + ns)
    cdef double[::1] xt = np.empty(n)
    cdef double[::1] st = np.empty(ns)
    cdef double[::1] rs = np.empty(ns)
    cdef double[::1] tm = np.empty(m)
    cdef double[::1] vm = np.empty(m)
    cdef double[::1] Px = np.empty(n)
    cdef double[::1] GTy = np.empty(n)
    cdef double r_prim = INFINITY, r_dual = INFINITY
    cdef double acc, tp, zr, w, zn, sp, sd, num, den, ratio, v
    cdef int it = 0
    for k in range(m):
        for a in range(n):
            for b in range(n):
                GtG[a, b] += G[k, a] * G[k, b]
    for si in range(ns):
        acc = -g[S[si]]
        for i in range(n):
            acc += Gs[si, i] * x[i]
        s[si] = acc if acc > 0.0 else 0.0
    # z was seeded as min(Gx, g), which already equals Gs x - s on soft rows
    for k in range(m):
        ze[k] = z[k]
        ye[k] = y[k]
        ge[k] = g[k]
    for si in range(ns):
        ze[m + si] = -s[si]
        ye[m + si] = 0.0
        ge[m + si] = 0.0
    if _factor_soft(M, P, GtG, Gs, ws, dinv, sigma, rho, n, ns) != 0:
        raise np.linalg.LinAlgError("QP matrix is not positive definite")
    while it < max_iter:
        it += 1
        for i in range(n):
            xt[i] = sigma * x[i] - q[i]
        for k in range(m):
            tm[k] = rho * ze[k] - ye[k]
            for i in range(n):
                xt[i] += G[k, i] * tm[k]
        for si in range(ns):
            tp = rho * ze[m + si] - ye[m + si]
            rs[si] = sigma * s[si] - tm[S[si]] - tp
            acc = rho * dinv[si] * rs[si]
            for i in range(n):
                xt[i] += Gs[si, i] * acc
        _chol_solve(M, xt, n)
        for si in range(ns):
            acc = 0.0
            for i in range(n):
                acc += Gs[si, i] * xt[i]
            st[si] = dinv[si] * (rs[si] + rho * acc)
        for k in range(m):
            acc = 0.0
            for i in range(n):
                acc += G[k, i] * xt[i]
            vm[k] = acc
        for si in range(ns):
            vm[S[si]] -= st[si]
        for i in range(n):
            x[i] = alpha * xt[i] + (1.0 - alpha) * x[i]
        for k in range(m):
            zr = alpha * vm[k] + (1.0 - alpha) * ze[k]
            w = zr + ye[k] / rho
            zn = w if w < ge[k] else ge[k]
            ye[k] += rho * (zr - zn)
            ze[k] = zn
        for si in range(ns):
            zr = alpha * (-st[si]) + (1.0 - alpha) * ze[m + si]
            w = zr + ye[m + si] / rho
            zn = w if w < 0.0 else 0.0
            ye[m + si] += rho * (zr - zn)
            ze[m + si] = zn
            s[si] = alpha * st[si] + (1.0 - alpha) * s[si]

        if it % check_every == 0 or it == max_iter:
            r_prim = 0.0
            sp = 0.0
            for k in range(m):
                acc = 0.0
                for i in range(n):
                    acc += G[k, i] * x[i]
                vm[k] = acc
            for si in range(ns):
                vm[S[si]] -= s[si]
            for k in range(m):
                v = fabs(vm[k] - ze[k])
                if v > r_prim:
                    r_prim = v
                if fabs(vm[k]) > sp:
                    sp = fabs(vm[k])
                if fabs(ze[k]) > sp:
                    sp = fabs(ze[k])
            for si in range(ns):
                v = fabs(-s[si] - ze[m + si])
                if v > r_prim:
                    r_prim = v
                if fabs(s[si]) > sp:
                    sp = fabs(s[si])
                if fabs(ze[m + si]) > sp:
                    sp = fabs(ze[m + si])
            sd = 0.0
            r_dual = 0.0
            for i in range(n):
                acc = 0.0
                for k in range(n):
                    acc += P[i, k] * x[k]
                Px[i] = acc
                if fabs(acc) > sd:
                    sd = fabs(acc)
            for i in range(n):
                acc = 0.0
                for k in range(m):
                    acc += G[k, i] * ye[k]
                GTy[i] = acc
                if fabs(acc) > sd:
                    sd = fabs(acc)
            for i in range(n):
                if fabs(q[i]) > sd:
                    sd = fabs(q[i])
                v = fabs(Px[i] + q[i] + GTy[i])
                if v > r_dual:
                    r_dual = v
            for si in range(ns):
                v = ws[si] * s[si]
                if fabs(v) > sd:
                    sd = fabs(v)
                w = ye[S[si]] + ye[m + si]
                if fabs(w) > sd:
                    sd = fabs(w)
                v = fabs(v - w)
                if v > r_dual:
                    r_dual = v
            if r_prim <= eps_abs + eps_rel * sp and r_dual <= eps_abs + eps_rel * sd:
                for k in range(m):
                    z[k] = ze[k]
                    y[k] = ye[k]
                return 0, it, r_prim, r_dual
            num = r_prim / (sp if sp > 1e-12 else 1e-12)
            den = r_dual / (sd if sd > 1e-12 else 1e-12)
            ratio = sqrt(num / (den if den > 1e-18 else 1e-18))
            if ratio > 5.0 or ratio < 0.2:
                rho = ratio * rho
                if rho < 1e-6:
                    rho = 1e-6
                elif rho > 1e6:
                    rho = 1e6
                if _factor_soft(M, P, GtG, Gs, ws, dinv, sigma, rho, n, ns) != 0:
                    raise np.linalg.LinAlgError("QP matrix is not positive definite")
    for k in range(m):
        z[k] = ze[k]
        y[k] = ye[k]
    return 1, it, r_prim, r_dual
