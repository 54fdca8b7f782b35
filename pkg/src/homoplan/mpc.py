"""Receding-horizon tracker: double-integrator QP over a condensed horizon.

The decision variable is the stacked acceleration sequence; positions are
affine in it, so tracking cost plus separating-plane constraints (other
agents, obstacle corridor, workspace box) condense into a dense QP.
Acceleration and velocity limits are inscribed polygon cones and stay hard;
position rows are soft so the solver always has an answer, with a braking
fallback if it still fails.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import geometry
from .config import DynamicsParams, MpcParams, MpcWeights
from .qp import QpProblem, normalize_rows, solve_qp


@lru_cache(maxsize=16)
def dynamics_operators(K: int, h: float):
    """Maps from stacked accelerations to step positions and velocities.

    p_k = p_0 + k h v_0 + sum_{j<k} h^2 (k - j - 1/2) u_j and
    v_k = v_0 + h sum_{j<k} u_j for k = 1..K.
    """
    k = np.arange(1, K + 1)[:, None]
    j = np.arange(K)[None, :]
    mask = j < k
    Tp = np.where(mask, h * h * (k - j - 0.5), 0.0)
    Tv = np.where(mask, h, 0.0)
    Ap = np.kron(Tp, np.eye(2))
    Av = np.kron(Tv, np.eye(2))
    for arr in (Tp, Tv, Ap, Av):
        arr.setflags(write=False)
    return Tp, Tv, Ap, Av


@lru_cache(maxsize=8)
def cone_normals(sides: int) -> np.ndarray:
    """Unit normals of a regular polygon cone; bounding n_i . u <= c keeps
    ||u|| <= c / cos(pi/sides), so use c = limit * cos(pi/sides) to inscribe."""
    ang = 2.0 * np.pi * np.arange(sides) / sides
    out = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    out.setflags(write=False)
    return out


def propagate(p0, v0, u, h: float):
    """Roll the double integrator forward; returns (K+1,2) positions and
    velocities including the initial state."""
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    K = u.shape[0]
    pos = np.empty((K + 1, 2))
    vel = np.empty((K + 1, 2))
    pos[0] = p0
    vel[0] = v0
    for k in range(K):
        pos[k + 1] = pos[k] + h * vel[k] + 0.5 * h * h * u[k]
        vel[k + 1] = vel[k] + h * u[k]
    return pos, vel


@dataclass
class Trajectory:
    """Executed/broadcast plan: piecewise-quadratic positions from t0."""

    t0: float
    h: float
    p0: np.ndarray
    v0: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float).reshape(2)
        self.v0 = np.asarray(self.v0, dtype=float).reshape(2)
        self.u = np.asarray(self.u, dtype=float).reshape(-1, 2)
        self._pos, self._vel = propagate(self.p0, self.v0, self.u, self.h)

    @classmethod
    def static(cls, t0: float, h: float, p0, steps: int = 1) -> "Trajectory":
        return cls(t0, h, p0, np.zeros(2), np.zeros((steps, 2)))

    @property
    def steps(self) -> int:
        return self.u.shape[0]

    @property
    def t_end(self) -> float:
        return self.t0 + self.steps * self.h

    @property
    def positions(self) -> np.ndarray:
        return self._pos

    @property
    def velocities(self) -> np.ndarray:
        return self._vel

    def position_at(self, t: float) -> np.ndarray:
        tau = t - self.t0
        if tau <= 0.0:
            return self._pos[0].copy()
        K = self.steps
        if tau >= K * self.h:
            return self._pos[K].copy()
        k = min(int(tau / self.h), K - 1)
        s = tau - k * self.h
        return self._pos[k] + s * self._vel[k] + 0.5 * s * s * self.u[k]

    def velocity_at(self, t: float) -> np.ndarray:
        tau = t - self.t0
        if tau <= 0.0:
            return self._vel[0].copy()
        K = self.steps
        if tau >= K * self.h:
            return np.zeros(2)
        k = min(int(tau / self.h), K - 1)
        return self._vel[k] + (tau - k * self.h) * self.u[k]

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "h": self.h,
            "p0": [float(v) for v in self.p0],
            "v0": [float(v) for v in self.v0],
            "u": [[float(a) for a in row] for row in self.u],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(d["t0"], d["h"], np.array(d["p0"]), np.array(d["v0"]), np.array(d["u"]))


@dataclass
class StepConstraint:
    """Halfplane a . p_k <= b on the position at one horizon step."""

    step: int
    a: np.ndarray
    b: float
    soft: bool = True
    tag: str = ""


def tractive_points(path, t_now: float, K: int, h: float) -> np.ndarray:
    """Reference positions at the next K step times along the timestamped
    path (clamped at its end)."""
    return np.stack([path.position_at(t_now + k * h) for k in range(1, K + 1)])


def plan_positions(prev: Trajectory | None, p0, t_now: float, K: int, h: float) -> np.ndarray:
    """Previous plan sampled at this horizon's step times, used as the
    linearisation base; falls back to the current position."""
    out = np.empty((K + 1, 2))
    out[0] = p0
    if prev is None:
        out[1:] = p0
    else:
        for k in range(1, K + 1):
            out[k] = prev.position_at(t_now + k * h)
    return out


def bvc_constraints(base: np.ndarray, neighbors, t_now: float, K: int, h: float,
                    r_self: float, margin: float, cutoff: float) -> list:
    """Separating halfplane against each neighbour at each step: both agents
    cutting at the midpoint of their predicted positions keeps centre
    separation at r_i + r_j + margin."""
    rows = []
    for traj, r_other in neighbors:
        back = 0.5 * (r_self + r_other + margin)
        for k in range(1, K + 1):
            pj = traj.position_at(t_now + k * h)
            mine = base[k]
            d = pj - mine
            dist = float(np.hypot(d[0], d[1]))
            if dist > cutoff:
                continue
            if dist < 1e-9:
                d = np.array([1.0, 0.0])
                dist = 1.0
            a = d / dist
            b = float(a @ (0.5 * (mine + pj))) - back
            rows.append(StepConstraint(k, a, b, soft=True, tag="bvc"))
    return rows


def corridor_constraints(base: np.ndarray, obstacles, K: int, n_near: int,
                         near_radius: float, margin: float) -> list:
    """Halfplane per nearby obstacle pushing each step point outside it.

    Uses the nearest boundary point of the inflated obstacle; points that
    ended up inside get the outward direction so the constraint recovers
    them.  Degenerate (on-boundary) witnesses fall back to the centroid
    direction.
    """
    if not obstacles:
        return []
    pts = base[1:]
    dists = np.empty((len(obstacles), len(pts)))
    nearest = np.empty((len(obstacles), len(pts), 2))
    for i, poly in enumerate(obstacles):
        d, c = geometry.points_polygon_distance(pts, poly)
        dists[i] = d
        nearest[i] = c
    rows = []
    for k in range(1, K + 1):
        dk = dists[:, k - 1]
        order = np.argsort(dk, kind="stable")
        taken = 0
        for i in order:
            if taken >= n_near or dk[i] > near_radius:
                break
            x = base[k]
            c = nearest[i, k - 1]
            d = dk[i]
            if abs(d) < 1e-9:
                n = x - np.mean(obstacles[i], axis=0)
                nn = float(np.hypot(n[0], n[1]))
                n = n / nn if nn > 1e-12 else np.array([1.0, 0.0])
            else:
                n = (x - c) / d
            rows.append(StepConstraint(k, -n, float(-(n @ c)) - margin, soft=True, tag="corridor"))
            taken += 1
    return rows


def bounds_constraints(K: int, lo, hi) -> list:
    rows = []
    for k in range(1, K + 1):
        rows.append(StepConstraint(k, np.array([1.0, 0.0]), float(hi[0]), soft=True, tag="bounds"))
        rows.append(StepConstraint(k, np.array([-1.0, 0.0]), float(-lo[0]), soft=True, tag="bounds"))
        rows.append(StepConstraint(k, np.array([0.0, 1.0]), float(hi[1]), soft=True, tag="bounds"))
        rows.append(StepConstraint(k, np.array([0.0, -1.0]), float(-lo[1]), soft=True, tag="bounds"))
    return rows


@dataclass
class MpcSolution:
    status: str  # solved | soft | fallback
    u: np.ndarray
    trajectory: Trajectory
    iters: int
    violation: float
    soft_violation: float


def braking_input(v0, K: int, h: float, u_limit: float) -> np.ndarray:
    """Maximal straight-line deceleration to rest within the cone bound."""
    u = np.zeros((K, 2))
    v = np.asarray(v0, dtype=float).copy()
    for k in range(K):
        want = -v / h
        mag = float(np.hypot(want[0], want[1]))
        if mag < 1e-12:
            break
        if mag > u_limit:
            want = want * (u_limit / mag)
        u[k] = want
        v = v + h * want
    return u


def assemble_qp(p0, v0, refs, constraints, dyn: DynamicsParams, weights: MpcWeights,
                mpc: MpcParams) -> QpProblem:
    """Condense tracking cost and constraints into a QP over accelerations."""
    K = mpc.horizon
    h = dyn.h
    _, _, Ap, Av = dynamics_operators(K, h)
    p0 = np.asarray(p0, dtype=float).reshape(2)
    v0 = np.asarray(v0, dtype=float).reshape(2)
    kk = np.arange(1, K + 1)
    pos_free = p0[None, :] + (kk * h)[:, None] * v0[None, :]

    w = np.full(K, weights.q)
    w[-1] = weights.q_terminal
    W = np.repeat(w, 2)
    err0 = (pos_free - np.asarray(refs, dtype=float)).reshape(-1)
    P = 2.0 * (Ap.T @ (W[:, None] * Ap) + weights.r * np.eye(2 * K))
    q = 2.0 * (Ap.T @ (W * err0))

    sides = mpc.cone_sides
    N = cone_normals(sides)
    shrink = math.cos(math.pi / sides)
    rows_G = []
    rows_g = []
    rows_soft = []

    # acceleration cone: acts on u_k directly
    for k in range(K):
        block = np.zeros((sides, 2 * K))
        block[:, 2 * k:2 * k + 2] = N
        rows_G.append(block)
        rows_g.append(np.full(sides, dyn.u_max * shrink))
        rows_soft.append(np.zeros(sides, dtype=bool))
    # velocity cone at each step
    v_bound = dyn.v_max * shrink
    for k in range(1, K + 1):
        block = N @ Av[2 * (k - 1):2 * k]
        rows_G.append(block)
        rows_g.append(v_bound - N @ v0)
        rows_soft.append(np.zeros(sides, dtype=bool))
    # position halfplanes
    for c in constraints:
        k = c.step
        rows_G.append((c.a @ Ap[2 * (k - 1):2 * k])[None, :])
        rows_g.append(np.array([c.b - float(c.a @ pos_free[k - 1])]))
        rows_soft.append(np.array([c.soft]))

    G = np.vstack(rows_G)
    g = np.concatenate(rows_g)
    soft = np.concatenate(rows_soft)
    G, g, soft = normalize_rows(G, g, soft)
    return QpProblem(P, q, G, g, soft)


def solve_mpc(t_now: float, p0, v0, refs, constraints, dyn: DynamicsParams,
              weights: MpcWeights, mpc: MpcParams, warm_u=None) -> MpcSolution:
    """One tracker solve; falls back to braking when the QP cannot deliver a
    usable input."""
    K = mpc.horizon
    prob = assemble_qp(p0, v0, refs, constraints, dyn, weights, mpc)
    warm = np.asarray(warm_u, dtype=float).reshape(-1) if warm_u is not None else None
    sol = solve_qp(
        prob,
        warm_x=warm,
        rho_soft=mpc.rho_soft,
        max_iter=mpc.max_iter,
        eps_abs=mpc.eps_abs,
        eps_rel=mpc.eps_rel,
    )
    usable = sol.status in ("solved", "soft") or sol.violation <= 2e-3
    if usable and np.all(np.isfinite(sol.x)):
        u = sol.x.reshape(K, 2)
        status = "solved" if sol.status == "solved" else "soft"
    else:
        u = braking_input(v0, K, dyn.h, dyn.u_max * math.cos(math.pi / mpc.cone_sides))
        status = "fallback"
    traj = Trajectory(t_now, dyn.h, p0, v0, u)
    return MpcSolution(
        status=status,
        u=u,
        trajectory=traj,
        iters=sol.iters,
        violation=sol.violation,
        soft_violation=sol.soft_violation,
    )
