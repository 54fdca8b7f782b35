"""Deterministic multi-agent runtime: broadcast bus, per-agent loop, audit.

Each tick runs three phases.  First, agents with a raised replan flag plan
sequentially in priority (index) order, so a freshly published time map is
visible to every lower-priority agent planning in the same tick.  Second,
every agent independently builds constraints from the committed bus
snapshot, solves its tracking QP, executes one control interval against the
exact double-integrator plant and runs the replan check; everything it
publishes is staged.  Third, staged messages are committed in index order
and the trace lines are written.  Because the middle phase reads only
immutable snapshots and writes only per-agent slots, lockstep and threaded
execution produce byte-identical traces.
"""

import json
import math
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from .config import ScenarioParams
from .mpc import (
    Trajectory,
    bounds_constraints,
    braking_input,
    bvc_constraints,
    corridor_constraints,
    plan_positions,
    solve_mpc,
    tractive_points,
)
from .planner import (
    PassageTimeMap,
    PlanError,
    ReferencePath,
    build_time_map,
    plan_path,
    score_path,
)
from .voronoi import drop_blocked_edges
from .world import PlanningWorld, Scenario, build_planning_world

ARRIVAL_SPEED = 0.1
V_NEW_WINDOW = 1.0
V_NEW_FLOOR = 0.02
STALL_TICKS = 5
DETOUR_LOOKAHEAD = 2.0


class Bus:
    """Latest-value broadcast channel with strictly increasing versions."""

    def __init__(self):
        self.maps: dict = {}
        self.trajs: dict = {}
        self.map_versions: dict = {}
        self.traj_versions: dict = {}

    def publish_map(self, tick: int, sender: int, tm: PassageTimeMap, log: list) -> None:
        v = self.map_versions.get(sender, 0) + 1
        tm.agent = sender
        tm.version = v
        self.map_versions[sender] = v
        self.maps[sender] = tm
        log.append({"tick": tick, "sender": sender, "kind": "map", "version": v})

    def publish_traj(self, tick: int, sender: int, traj: Trajectory, log: list) -> None:
        v = self.traj_versions.get(sender, 0) + 1
        self.traj_versions[sender] = v
        self.trajs[sender] = traj
        log.append({"tick": tick, "sender": sender, "kind": "traj", "version": v})

    def maps_before(self, index: int) -> list:
        return [self.maps[j] for j in sorted(self.maps) if j < index]

    def map_versions_before(self, index: int) -> dict:
        return {j: v for j, v in self.map_versions.items() if j < index}


def _live_map(tm: PassageTimeMap, t_now: float) -> PassageTimeMap:
    """Remaining occupancy only: drop finished spans, clamp started ones."""
    spans = {}
    for key, lst in tm.spans.items():
        live = [(max(t1, t_now), t2) for (t1, t2) in lst if t2 >= t_now]
        if live:
            spans[key] = live
    return PassageTimeMap(tm.agent, tm.version, spans)


def _disc_polygon(center, radius: float, sides: int = 8) -> np.ndarray:
    """CCW regular polygon containing the disc."""
    ang = (np.arange(sides) + 0.5) * (2.0 * math.pi / sides)
    rr = radius / math.cos(math.pi / sides)
    return np.asarray(center, dtype=float) + rr * np.stack([np.cos(ang), np.sin(ang)], axis=1)


class _Agent:
    """Mutable per-agent loop state; phase two touches only its own slots."""

    def __init__(self, spec, h: float):
        self.spec = spec
        self.index = spec.index
        self.p = spec.start.copy()
        self.v = np.zeros(2)
        self.mode = "run"
        self.replan_flag = True
        self.parked = False
        self.path: ReferencePath | None = None
        self.time_map: PassageTimeMap | None = None
        self.traj: Trajectory | None = None
        self.warm_u = None
        self.arc = 0.0
        self.progress = deque()
        self.seen_versions: dict = {}
        self.stall_count = 0
        self.detour = False
        self.n_replans = 0
        self.n_fallbacks = 0
        self.arrival_time: float | None = None
        self.plan_times: list = []
        self.solve_times: list = []
        self.staged_traj: Trajectory | None = None
        self.staged_map: PassageTimeMap | None = None
        self.trace_line: dict | None = None
        self.last_iters = 0
        self.last_fallback = False

    @property
    def active(self) -> bool:
        return self.mode == "run"


@dataclass
class AgentResult:
    index: int
    reached: bool
    arrival_time: float | None
    length: float
    n_replans: int
    n_fallbacks: int

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "reached": self.reached,
            "arrival_time": self.arrival_time,
            "length": self.length,
            "n_replans": self.n_replans,
            "n_fallbacks": self.n_fallbacks,
        }


@dataclass
class SafetyReport:
    """Independent reconstruction of the run at sub-tick resolution."""

    ok: bool
    min_agent_distance: float
    min_obstacle_clearance: float
    min_bounds_margin: float
    lengths: dict
    n_samples: int
    violations: list = field(default_factory=list)


@dataclass
class RunResult:
    scenario: str
    mode: str
    n_agents: int
    all_reached: bool
    swarm_rate: float
    makespan: float | None
    total_length: float
    n_replans: int
    min_agent_distance: float
    min_obstacle_clearance: float
    safety_ok: bool
    ticks: int
    sim_time: float
    wall_time: float
    plan_ms_max: float
    plan_ms_mean: float
    solve_ms_max: float
    solve_ms_mean: float
    agents: list

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "agents"}
        d["agents"] = [a.to_dict() for a in self.agents]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_row(self) -> dict:
        """Flat scalars for one CSV row of a batch."""
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "agents": self.n_agents,
            "reached": sum(1 for a in self.agents if a.reached),
            "all_reached": int(self.all_reached),
            "swarm_rate": self.swarm_rate,
            "makespan": "" if self.makespan is None else self.makespan,
            "total_length": self.total_length,
            "n_replans": self.n_replans,
            "min_agent_distance": self.min_agent_distance,
            "min_obstacle_clearance": self.min_obstacle_clearance,
            "safety_ok": int(self.safety_ok),
            "plan_ms_max": self.plan_ms_max,
            "solve_ms_max": self.solve_ms_max,
            "wall_s": self.wall_time,
            "ticks": self.ticks,
        }


CSV_FIELDS = [
    "scenario", "arm", "seed", "mode", "agents", "reached", "all_reached",
    "swarm_rate", "makespan", "total_length", "n_replans",
    "min_agent_distance", "min_obstacle_clearance", "safety_ok",
    "plan_ms_max", "solve_ms_max", "wall_s", "ticks",
]


class Runner:
    """Executes one scenario to completion or timeout."""

    def __init__(self, scenario: Scenario, world: PlanningWorld | None = None,
                 mode: str = "lockstep"):
        if mode not in ("lockstep", "concurrent"):
            raise ValueError(f"unknown mode '{mode}'")
        self.scenario = scenario
        self.params: ScenarioParams = scenario.params
        self.world = world if world is not None else build_planning_world(scenario)
        self.mode = mode
        self.h = self.params.dynamics.h
        self.agents = [_Agent(s, self.h) for s in sorted(scenario.agents, key=lambda a: a.index)]
        self.radii = {a.index: a.radius for a in scenario.agents}
        self.bus = Bus()
        self.lines: list = []
        self.tick = 0
        self._plist = list(self.world.passages)

    # ---- phase one: sequential planning in priority order ----------------

    def _blockers(self, ag: _Agent) -> list:
        """Inactive agents sitting on the path ahead of `ag`, as (p, r_sum)."""
        if ag.path is None:
            return []
        top = float(ag.path.arcs[-1])
        arcs = np.linspace(ag.arc, min(ag.arc + DETOUR_LOOKAHEAD, top), 21)
        pts = np.stack([ag.path.position_at_arc(a) for a in arcs])
        out = []
        for other in self.agents:
            if other is ag or other.active:
                continue
            r_sum = ag.spec.radius + other.spec.radius
            d = float(np.min(np.hypot(pts[:, 0] - other.p[0], pts[:, 1] - other.p[1])))
            if d < r_sum + 0.3:
                out.append((other.p.copy(), r_sum))
        return out

    def _plan(self, ag: _Agent, t: float) -> None:
        higher = self.bus.maps_before(ag.index)
        pp = replace(self.params.planner, v_bar=ag.spec.avg_velocity)
        graph = self.world.graph
        obstacles = self.world.obstacles
        detour = ag.detour
        ag.detour = False
        if detour:
            # route around agents parked on the way; their discs leave the
            # roadmap and block endpoint connectors
            blockers = self._blockers(ag)
            if not blockers:
                ag.replan_flag = False
                return
            margin = self.params.mpc.agent_margin
            graph = drop_blocked_edges(graph, [c for c, _ in blockers],
                                       [r + margin for _, r in blockers])
            obstacles = list(obstacles) + [
                _disc_polygon(c, max(r - 0.05, 0.01)) for c, r in blockers
            ]
        t0 = time.perf_counter()
        try:
            res = plan_path(ag.p, ag.spec.target, graph, self._plist,
                            higher, pp, obstacles=obstacles, t0=t)
        except PlanError:
            if detour:
                # blocked through every corridor right now; keep waiting
                ag.replan_flag = False
                return
            ag.mode = "failed"
            ag.replan_flag = False
            return
        ag.plan_times.append(time.perf_counter() - t0)
        if ag.path is not None:
            ag.n_replans += 1
        ag.path = res.path
        ag.arc = 0.0
        ag.progress.clear()
        ag.progress.append((t, 0.0))
        ag.time_map = res.time_map
        self.bus.publish_map(self.tick, ag.index, res.time_map, self.lines)
        ag.seen_versions = self.bus.map_versions_before(ag.index)
        ag.replan_flag = False

    # ---- phase two: independent constraint building, solve, execute ------

    def _neighbors(self, ag: _Agent, snapshot: dict, t: float) -> list:
        out = []
        cutoff = self.params.mpc.neighbor_radius
        for j in sorted(snapshot):
            if j == ag.index:
                continue
            traj = snapshot[j]
            pj = traj.position_at(t)
            if float(np.hypot(pj[0] - ag.p[0], pj[1] - ag.p[1])) <= cutoff:
                out.append((traj, self.radii[j]))
        return out

    def _step_terminal(self, ag: _Agent, t: float) -> None:
        if ag.parked:
            return
        dyn = self.params.dynamics
        mpc = self.params.mpc
        speed = float(np.hypot(ag.v[0], ag.v[1]))
        if speed > 1e-12:
            u = braking_input(ag.v, mpc.horizon, dyn.h, dyn.u_max * math.cos(math.pi / mpc.cone_sides))
            traj = Trajectory(t, dyn.h, ag.p, ag.v, u)
            ag.staged_traj = traj
            ag.traj = traj
            ag.p = traj.positions[1].copy()
            ag.v = traj.velocities[1].copy()
        else:
            traj = Trajectory.static(t, dyn.h, ag.p)
            ag.staged_traj = traj
            ag.traj = traj
            ag.staged_map = PassageTimeMap(agent=ag.index)
            ag.parked = True

    def _replan_check(self, ag: _Agent, t_next: float) -> None:
        rp = self.params.replan
        ag.arc = ag.path.advance_arc(ag.p, ag.arc)
        ag.progress.append((t_next, ag.arc))
        while len(ag.progress) > 1 and ag.progress[0][0] < t_next - V_NEW_WINDOW - 1e-9:
            ag.progress.popleft()
        if not rp.enabled:
            ag.seen_versions = self.bus.map_versions_before(ag.index)
            return
        sigma = ag.path.position_at(t_next)
        err = float(np.hypot(ag.p[0] - sigma[0], ag.p[1] - sigma[1]))
        v_plan = float(np.hypot(*ag.traj.velocity_at(t_next + self.h)))
        dt = err / max(v_plan, 1e-3)
        higher = self.bus.maps_before(ag.index)
        if dt >= rp.beta:
            t_base, arc_base = ag.progress[0]
            span = t_next - t_base
            v_new = (ag.arc - arc_base) / span if span > 1e-9 else 0.0
            v_new = float(np.clip(v_new, V_NEW_FLOOR, self.params.dynamics.v_max))
            retimed = ag.path.retimed(t_next, ag.arc, v_new)
            live = [cr for cr in retimed.crossings
                    if cr.arc + self._plist[cr.passage].spans_for_crossing(cr.direction)[1] >= ag.arc]
            shim = ReferencePath(retimed.points, retimed.stamps, live, v_bar=v_new)
            new_map = build_time_map(shim, self._plist, agent=ag.index)
            ag.time_map = new_map
            ag.staged_map = new_map
            score = score_path(_live_map(new_map, t_next),
                               [_live_map(m, t_next) for m in higher], self.params.planner.alpha)
            if score > rp.gamma:
                ag.replan_flag = True
            else:
                ag.path = retimed
            if ag.replan_flag or v_new > V_NEW_FLOOR + 1e-9:
                ag.stall_count = 0
            else:
                # pinned to the retiming floor: some obstruction the time maps
                # cannot see (usually a parked agent); try a detour
                ag.stall_count += 1
                if ag.stall_count >= STALL_TICKS:
                    ag.replan_flag = True
                    ag.detour = True
                    ag.stall_count = 0
            ag.seen_versions = self.bus.map_versions_before(ag.index)
        else:
            ag.stall_count = 0
            current = self.bus.map_versions_before(ag.index)
            changed = any(v > ag.seen_versions.get(j, 0) for j, v in current.items())
            if changed:
                score = score_path(_live_map(ag.time_map, t_next),
                                   [_live_map(m, t_next) for m in higher], self.params.planner.alpha)
                if score > rp.gamma:
                    ag.replan_flag = True
            ag.seen_versions = current

    def _step(self, ag: _Agent, snapshot: dict, t: float) -> None:
        ag.staged_traj = None
        ag.staged_map = None
        ag.last_iters = 0
        ag.last_fallback = False
        p_start = ag.p.copy()
        v_start = ag.v.copy()
        if ag.active:
            run = self.params.run
            dist = float(np.hypot(ag.p[0] - ag.spec.target[0], ag.p[1] - ag.spec.target[1]))
            if dist <= run.arrival_tol and float(np.hypot(ag.v[0], ag.v[1])) <= ARRIVAL_SPEED:
                ag.mode = "arrived"
                ag.arrival_time = t
                ag.replan_flag = False
        if ag.active and ag.path is not None:
            dyn = self.params.dynamics
            mpc = self.params.mpc
            K = mpc.horizon
            ag.arc = ag.path.advance_arc(ag.p, ag.arc)
            refs = np.stack([
                ag.path.position_at_arc(ag.arc + ag.spec.avg_velocity * k * self.h)
                for k in range(1, K + 1)
            ])
            base = plan_positions(ag.traj, ag.p, t, K, self.h)
            cons = bvc_constraints(base, self._neighbors(ag, snapshot, t), t, K, self.h,
                                   ag.spec.radius, mpc.agent_margin, mpc.neighbor_radius)
            cons += corridor_constraints(base, self.world.obstacles, K, mpc.n_near,
                                         mpc.near_radius, mpc.obstacle_margin)
            cons += bounds_constraints(K, self.world.bounds_min, self.world.bounds_max)
            t0 = time.perf_counter()
            sol = solve_mpc(t, ag.p, ag.v, refs, cons, dyn, self.params.weights, mpc,
                            warm_u=ag.warm_u)
            ag.solve_times.append(time.perf_counter() - t0)
            ag.last_iters = sol.iters
            ag.last_fallback = sol.status == "fallback"
            if ag.last_fallback:
                ag.n_fallbacks += 1
                ag.warm_u = None
            else:
                flat = sol.u.reshape(-1)
                ag.warm_u = np.concatenate([flat[2:], flat[-2:]])
            ag.staged_traj = sol.trajectory
            ag.traj = sol.trajectory
            ag.p = sol.trajectory.positions[1].copy()
            ag.v = sol.trajectory.velocities[1].copy()
            self._replan_check(ag, t + self.h)
        elif not ag.active:
            self._step_terminal(ag, t)
        ag.trace_line = {
            "tick": self.tick,
            "t": round(t, 9),
            "i": ag.index,
            "p": [float(p_start[0]), float(p_start[1])],
            "v": [float(v_start[0]), float(v_start[1])],
            "mode": ag.mode,
            "replan_flag": bool(ag.replan_flag),
            "solver": {"iters": int(ag.last_iters), "fallback": bool(ag.last_fallback)},
        }

    # ---- main loop --------------------------------------------------------

    def run(self, trace_path: str | None = None) -> RunResult:
        wall0 = time.perf_counter()
        run = self.params.run
        max_ticks = int(round(run.timeout / self.h))
        for ag in self.agents:
            self.bus.publish_traj(0, ag.index, Trajectory.static(0.0, self.h, ag.p), self.lines)
        pool = None
        if self.mode == "concurrent":
            workers = max(1, min(len(self.agents), int(os.environ.get("HOMOPLAN_THREADS", "4"))))
            pool = ThreadPoolExecutor(max_workers=workers)
        try:
            while self.tick < max_ticks and any(ag.active or not ag.parked for ag in self.agents):
                t = self.tick * self.h
                for ag in self.agents:
                    if ag.active and ag.replan_flag:
                        self._plan(ag, t)
                snapshot = dict(self.bus.trajs)
                if pool is not None:
                    list(pool.map(lambda a: self._step(a, snapshot, t), self.agents))
                else:
                    for ag in self.agents:
                        self._step(ag, snapshot, t)
                for ag in self.agents:
                    self.lines.append(ag.trace_line)
                for ag in self.agents:
                    if ag.staged_traj is not None:
                        self.bus.publish_traj(self.tick, ag.index, ag.staged_traj, self.lines)
                    if ag.staged_map is not None:
                        self.bus.publish_map(self.tick, ag.index, ag.staged_map, self.lines)
                self.tick += 1
        finally:
            if pool is not None:
                pool.shutdown()
        t = self.tick * self.h
        for ag in self.agents:
            self.lines.append({
                "tick": self.tick,
                "t": round(t, 9),
                "i": ag.index,
                "p": [float(ag.p[0]), float(ag.p[1])],
                "v": [float(ag.v[0]), float(ag.v[1])],
                "mode": ag.mode,
                "replan_flag": bool(ag.replan_flag),
                "solver": {"iters": 0, "fallback": False},
            })
        if trace_path:
            write_trace(trace_path, self.lines)
        report = safety_audit(self.lines, self.scenario)
        return self._result(report, time.perf_counter() - wall0)

    def _result(self, report: SafetyReport, wall: float) -> RunResult:
        agents = []
        for ag in self.agents:
            agents.append(AgentResult(
                index=ag.index,
                reached=ag.mode == "arrived",
                arrival_time=ag.arrival_time,
                length=report.lengths.get(ag.index, 0.0),
                n_replans=ag.n_replans,
                n_fallbacks=ag.n_fallbacks,
            ))
        all_reached = all(a.reached for a in agents)
        plan_times = [x for ag in self.agents for x in ag.plan_times]
        solve_times = [x for ag in self.agents for x in ag.solve_times]
        return RunResult(
            scenario=self.scenario.name,
            mode=self.mode,
            n_agents=len(agents),
            all_reached=all_reached,
            swarm_rate=sum(a.reached for a in agents) / max(len(agents), 1),
            makespan=max(a.arrival_time for a in agents) if all_reached else None,
            total_length=float(sum(a.length for a in agents)),
            n_replans=sum(a.n_replans for a in agents),
            min_agent_distance=report.min_agent_distance,
            min_obstacle_clearance=report.min_obstacle_clearance,
            safety_ok=report.ok,
            ticks=self.tick,
            sim_time=self.tick * self.h,
            wall_time=wall,
            plan_ms_max=1e3 * max(plan_times, default=0.0),
            plan_ms_mean=1e3 * float(np.mean(plan_times)) if plan_times else 0.0,
            solve_ms_max=1e3 * max(solve_times, default=0.0),
            solve_ms_mean=1e3 * float(np.mean(solve_times)) if solve_times else 0.0,
            agents=agents,
        )


def run_scenario(scenario: Scenario, world: PlanningWorld | None = None,
                 mode: str = "lockstep", trace_path: str | None = None) -> RunResult:
    """Build the planning world if needed and execute the scenario once."""
    return Runner(scenario, world=world, mode=mode).run(trace_path=trace_path)


def write_trace(path: str, lines: list) -> None:
    with open(path, "w") as f:
        for line in lines:
            f.write(json.dumps(line, separators=(",", ":")))
            f.write("\n")


def read_trace(path: str) -> list:
    with open(path) as f:
        return [json.loads(s) for s in f if s.strip()]


def safety_audit(trace, scenario: Scenario, subdiv: int = 10,
                 distance_slack: float = 1e-3) -> SafetyReport:
    """Reconstruct the executed quadratics at h/10 and check separation and
    obstacle clearance (against the raw, uninflated polygons).

    The trace is the ground truth: controls are recovered from consecutive
    velocity samples, so the audit is independent of solver bookkeeping.
    The workspace-bounds margin is reported for inspection but does not
    gate ok: the boundary is a planning constraint, not a collision body,
    and the local planner may concede a few millimetres there under
    congestion rather than violate separation.
    """
    if isinstance(trace, str):
        trace = read_trace(trace)
    states = [ln for ln in trace if "i" in ln]
    by_agent: dict = {}
    for ln in states:
        by_agent.setdefault(ln["i"], []).append(ln)
    radii = {a.index: a.radius for a in scenario.agents}
    h = scenario.params.dynamics.h
    fine: dict = {}
    lengths: dict = {}
    for idx, rows in by_agent.items():
        rows.sort(key=lambda ln: ln["tick"])
        P = np.array([ln["p"] for ln in rows])
        V = np.array([ln["v"] for ln in rows])
        n = len(rows) - 1
        if n < 1:
            fine[idx] = P.copy()
            lengths[idx] = 0.0
            continue
        U = (V[1:] - V[:-1]) / h
        tau = (np.arange(subdiv) / subdiv * h)[None, :, None]
        seg = P[:-1, None, :] + tau * V[:-1, None, :] + 0.5 * tau * tau * U[:, None, :]
        pts = np.concatenate([seg.reshape(-1, 2), P[-1:]])
        fine[idx] = pts
        lengths[idx] = float(np.sum(np.hypot(*(np.diff(pts, axis=0).T))))
    indices = sorted(fine)
    violations = []
    min_pair = math.inf
    for a in range(len(indices)):
        for b in range(a + 1, len(indices)):
            i, j = indices[a], indices[b]
            m = min(len(fine[i]), len(fine[j]))
            d = np.hypot(*(fine[i][:m] - fine[j][:m]).T)
            k = int(np.argmin(d))
            dmin = float(d[k])
            if dmin < min_pair:
                min_pair = dmin
            need = radii[i] + radii[j]
            if dmin < need - distance_slack:
                violations.append({"kind": "agents", "i": i, "j": j,
                                   "t": k * h / subdiv, "distance": dmin, "required": need})
    min_clear = math.inf
    for i in indices:
        pts = fine[i]
        r = radii[i]
        for k, obs in enumerate(scenario.obstacles):
            d, _ = geometry.points_polygon_distance(pts, obs.vertices)
            s = int(np.argmin(d))
            clear = float(d[s]) - r
            if clear < min_clear:
                min_clear = clear
            if clear < -distance_slack:
                violations.append({"kind": "obstacle", "i": i, "obstacle": k,
                                   "t": s * h / subdiv, "clearance": clear})
    min_margin = math.inf
    lo, hi = scenario.bounds_min, scenario.bounds_max
    for i in indices:
        pts = fine[i]
        r = radii[i]
        m = np.minimum(pts - (lo + r), (hi - r) - pts)
        margin = float(np.min(m))
        if margin < min_margin:
            min_margin = margin
    n_samples = max((len(v) for v in fine.values()), default=0)
    return SafetyReport(
        ok=not violations,
        min_agent_distance=min_pair,
        min_obstacle_clearance=min_clear,
        min_bounds_margin=min_margin,
        lengths=lengths,
        n_samples=n_samples,
        violations=violations,
    )
