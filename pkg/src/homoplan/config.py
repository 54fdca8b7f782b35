"""Parameter bundles for detection, planning, tracking and the runtime.

All dataclasses round-trip through plain dicts so scenario files can
override any subset of fields; unknown keys are rejected so typos in
scenario files fail loudly.
"""

from dataclasses import asdict, dataclass, field, fields


class ConfigError(ValueError):
    pass


def _from_dict(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**data)


@dataclass
class DetectionParams:
    """Complete-passage detection: width cap and shifting step (metres)."""

    l_max: float = 0.8
    kappa: float = 0.01


@dataclass
class GraphParams:
    """Roadmap construction resolution (boundary sampling runs at resolution/2)."""

    resolution: float = 0.1


@dataclass
class PlannerParams:
    """Global planner weights.

    lambda_p rewards wide passages, lambda_h penalises conflicts with
    higher-priority agents, alpha (< 0) shapes the conflict decay, v_bar is
    the reference speed used to timestamp paths.  w_default is the passage
    width credited to paths that cross no passage at all.
    """

    lambda_p: float = 50.0
    lambda_h: float = 500.0
    alpha: float = -0.3
    v_bar: float = 0.5
    w_default: float = 0.8
    max_pops: int = 200000


@dataclass
class DynamicsParams:
    """Double-integrator discretisation and norm bounds."""

    h: float = 0.2
    u_max: float = 2.0
    v_max: float = 1.0


@dataclass
class MpcWeights:
    q: float = 1.0
    q_terminal: float = 10.0
    r: float = 0.1


@dataclass
class MpcParams:
    """Horizon, constraint construction and solver settings."""

    horizon: int = 12
    n_near: int = 6
    near_radius: float = 2.0
    neighbor_radius: float = 2.5
    obstacle_margin: float = 0.03
    agent_margin: float = 0.05
    cone_sides: int = 16
    max_iter: int = 2000
    eps_abs: float = 1e-3
    eps_rel: float = 1e-3
    rho_soft: float = 1e4


@dataclass
class ReplanParams:
    """Replanning trigger thresholds: time-error gate beta (s), score gate gamma."""

    beta: float = 1.0
    gamma: float = 1.5
    enabled: bool = True


@dataclass
class RunParams:
    timeout: float = 100.0
    arrival_tol: float = 0.1


@dataclass
class ScenarioParams:
    """Bundle of all tunables carried inside a scenario document."""

    detection: DetectionParams = field(default_factory=DetectionParams)
    graph: GraphParams = field(default_factory=GraphParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    weights: MpcWeights = field(default_factory=MpcWeights)
    mpc: MpcParams = field(default_factory=MpcParams)
    replan: ReplanParams = field(default_factory=ReplanParams)
    run: RunParams = field(default_factory=RunParams)

    @classmethod
    def from_dict(cls, data) -> "ScenarioParams":
        if data is None:
            return cls()
        if not isinstance(data, dict):
            raise ConfigError("params: expected an object")
        groups = {
            "detection": DetectionParams,
            "graph": GraphParams,
            "planner": PlannerParams,
            "dynamics": DynamicsParams,
            "weights": MpcWeights,
            "mpc": MpcParams,
            "replan": ReplanParams,
            "run": RunParams,
        }
        unknown = set(data) - set(groups)
        if unknown:
            raise ConfigError(f"params: unknown groups {sorted(unknown)}")
        kwargs = {name: _from_dict(g, data.get(name), f"params.{name}") for name, g in groups.items()}
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)
