"""Inequality-constrained QP solver: operator splitting plus a polish pass.

Problems are min 0.5 x'Px + q'x subject to Gx <= g.  Selected rows may be
marked soft: they are enforced like the others when possible, and when that
fails the solve is repeated with those rows swapped for quadratic penalties
of weight rho_soft, which keeps the tracker feasible in tight spots.  The
splitting iteration lives in the kernels package; this module owns problem
assembly hygiene, the soft re-solve and the active-set polish that sharpens
returned solutions.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels


class QpError(RuntimeError):
    pass


@dataclass
class QpProblem:
    P: np.ndarray
    q: np.ndarray
    G: np.ndarray
    g: np.ndarray
    soft: np.ndarray

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        n = self.q.shape[0]
        self.G = np.asarray(self.G, dtype=float).reshape(-1, n)
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        if self.soft is None:
            self.soft = np.zeros(len(self.g), dtype=bool)
        self.soft = np.asarray(self.soft, dtype=bool).reshape(-1)
        if self.P.shape != (n, n) or len(self.g) != self.G.shape[0] or len(self.soft) != len(self.g):
            raise QpError("inconsistent QP dimensions")

    def objective(self, x) -> float:
        return float(0.5 * x @ self.P @ x + self.q @ x)


@dataclass
class QpSolution:
    x: np.ndarray
    status: str  # solved | soft | max_iter
    iters: int
    r_prim: float
    r_dual: float
    violation: float
    soft_violation: float
    polished: bool


def normalize_rows(G, g, soft):
    """Scale every row to a unit normal and drop numerically empty rows."""
    norms = np.linalg.norm(G, axis=1)
    keep = norms > 1e-12
    G = G[keep] / norms[keep, None]
    return G, g[keep] / norms[keep], soft[keep]


def _polish(P, q, G, g, x, y, soft=None, rho_soft: float = 0.0, active_tol: float = 1e-6):
    """Equality-solve on the active set guessed from the splitting iterate.

    Soft rows found violating enter the objective as their quadratic
    penalty; hard rows near their boundary become equalities.  Accepted
    only when the candidate satisfies the KKT conditions of the penalised
    problem (hard-feasible, multipliers nonnegative, stationary); rows with
    negative multipliers are dropped and the solve repeated a few times.
    """
    n = len(x)
    if soft is None:
        soft = np.zeros(len(g), dtype=bool)
    hard = ~soft
    H = P
    qh = q
    if soft.any():
        viol = soft & (G @ x - g > 0.0)
        if viol.any():
            Gv = G[viol]
            H = P + rho_soft * (Gv.T @ Gv)
            qh = q - rho_soft * (Gv.T @ g[viol])
    slack = g - G @ x
    act = np.flatnonzero(hard & ((slack < active_tol) | (y > active_tol)))
    lam = np.zeros(0)
    for _ in range(4):
        if act.size == 0:
            try:
                xp = np.linalg.solve(H, -qh)
            except np.linalg.LinAlgError:
                return None
            lam = np.zeros(0)
        else:
            Ga = G[act]
            m = Ga.shape[0]
            kkt = np.zeros((n + m, n + m))
            kkt[:n, :n] = H
            kkt[:n, n:] = Ga.T
            kkt[n:, :n] = Ga
            rhs = np.concatenate([-qh, g[act]])
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            xp = sol[:n]
            lam = sol[n:]
        if not np.all(np.isfinite(xp)):
            return None
        if lam.size == 0 or lam.min() >= -1e-9:
            break
        act = act[lam > -1e-9]
    else:
        return None
    resid = G @ xp - g if len(g) else np.zeros(0)
    if hard.any() and resid[hard].max() > 1e-8:
        return None
    # stationarity of the true penalised objective at the candidate
    grad = P @ xp + q
    if soft.any():
        grad = grad + rho_soft * (G[soft].T @ np.maximum(resid[soft], 0.0))
    if act.size:
        grad = grad + G[act].T @ np.maximum(lam, 0.0)
    if np.abs(grad).max() > 1e-6 * max(1.0, np.abs(q).max()):
        return None
    return xp


def _equilibrate(P, q, G, g, rounds: int = 10):
    """Ruiz scaling of the stacked data so the splitting iteration is well
    conditioned; returns scaled copies plus the variable/row/cost scales."""
    n = len(q)
    m = len(g)
    d = np.ones(n)
    e = np.ones(m)
    Ps, qs, Gs, gs = P.copy(), q.copy(), G.copy(), g.copy()
    for _ in range(rounds):
        col = np.abs(Ps).max(axis=0)
        if m:
            col = np.maximum(col, np.abs(Gs).max(axis=0))
        dj = 1.0 / np.sqrt(np.where(col > 1e-12, col, 1.0))
        Ps *= dj[:, None] * dj[None, :]
        qs *= dj
        d *= dj
        if m:
            Gs *= dj[None, :]
            row = np.abs(Gs).max(axis=1)
            ei = 1.0 / np.sqrt(np.where(row > 1e-12, row, 1.0))
            Gs *= ei[:, None]
            gs *= ei
            e *= ei
    scale = max(float(np.abs(qs).max(initial=0.0)), float(np.abs(Ps).max(initial=0.0)))
    c = 1.0 / scale if scale > 1e-12 else 1.0
    Ps *= c
    qs *= c
    return Ps, qs, Gs, gs, d, e, c


def _run(P, q, G, g, x0, max_iter, eps_abs, eps_rel, polish, soft=None, rho_soft: float = 0.0):
    n = len(q)
    m = len(g)
    Ps, qs, Gs, gs, d, e, c = _equilibrate(P, q, G, g)
    x = np.array(x0, dtype=float).reshape(-1) / d
    z = np.minimum(Gs @ x, gs) if m else np.zeros(0)
    y = np.zeros(m)
    soft_rho = None
    if soft is not None and soft.any():
        # penalty weight mapped into the scaled problem: rows scale by e,
        # violations by e, the cost by c, so the weight scales by c / e^2
        soft_rho = np.where(soft, c * rho_soft / (e * e), 0.0)
    status, iters, r_prim, r_dual = _kernels.admm_qp(
        Ps, qs, Gs, gs, x, z, y, soft_rho=soft_rho,
        eps_abs=eps_abs, eps_rel=eps_rel, max_iter=max_iter,
    )
    x = d * x
    y = e * y / c
    polished = False
    if polish and status == 0:
        xp = _polish(P, q, G, g, x, y, soft=soft, rho_soft=rho_soft)
        if xp is not None:
            x = xp
            polished = True
    return x, status, iters, r_prim, r_dual, polished


def solve_qp(prob: QpProblem, warm_x=None, rho_soft: float = 1e4, max_iter: int = 2000,
             eps_abs: float = 1e-6, eps_rel: float = 1e-6, polish: bool = True,
             phase1_iter: int = 400) -> QpSolution:
    """Solve the QP, warm-started from `warm_x` when given.

    Phase 1 enforces every row.  If that does not converge cleanly (the row
    set may be inconsistent), phase 2 re-solves with the soft rows turned
    into quadratic penalties of weight rho_soft, which is always feasible.
    status 'soft' flags that the relaxation was needed.
    """
    n = len(prob.q)
    x0 = np.array(warm_x, dtype=float).reshape(-1) if warm_x is not None else np.zeros(n)
    if x0.shape[0] != n:
        raise QpError("warm start has wrong dimension")
    has_soft = bool(prob.soft.any())
    p1_cap = phase1_iter if has_soft else max_iter
    x, status, iters, r_prim, r_dual, polished = _run(
        prob.P, prob.q, prob.G, prob.g, x0, p1_cap, eps_abs, eps_rel, polish,
    )
    resid = prob.G @ x - prob.g if len(prob.g) else np.zeros(1)
    used_soft = False
    if has_soft and (status != 0 or resid.max() > 1e-4):
        used_soft = True
        x, status, iters, r_prim, r_dual, polished = _run(
            prob.P, prob.q, prob.G, prob.g, x, max_iter, eps_abs, eps_rel, polish,
            soft=prob.soft, rho_soft=rho_soft,
        )
        resid = prob.G @ x - prob.g if len(prob.g) else np.zeros(1)
    hard = ~prob.soft
    violation = float(resid[hard].max()) if hard.any() else 0.0
    soft_violation = float(resid[prob.soft].max()) if has_soft else 0.0
    if status != 0:
        out_status = "max_iter"
    elif used_soft:
        out_status = "soft"
    else:
        out_status = "solved"
    return QpSolution(
        x=x,
        status=out_status,
        iters=iters,
        r_prim=r_prim,
        r_dual=r_dual,
        violation=violation,
        soft_violation=soft_violation,
        polished=polished,
    )
