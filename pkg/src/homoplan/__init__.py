"""Multi-agent trajectory planning with passage-aware global paths."""

from .config import (
    ConfigError,
    DetectionParams,
    DynamicsParams,
    GraphParams,
    MpcParams,
    MpcWeights,
    PlannerParams,
    ReplanParams,
    RunParams,
    ScenarioParams,
)
from .geometry import GeometryError, OverlapError
from .mpc import Trajectory, braking_input, solve_mpc
from .passages import CompletePassage, PassageSet, detect_all_passages, detect_complete_passage
from .planner import (
    PassageTimeMap,
    PlanError,
    PlanResult,
    ReferencePath,
    build_time_map,
    conflict_index,
    plan_path,
    score_path,
)
from .qp import QpProblem, QpSolution, solve_qp
from .runtime import (
    Bus,
    Runner,
    RunResult,
    SafetyReport,
    read_trace,
    run_scenario,
    safety_audit,
    write_trace,
)
from .voronoi import VoronoiGraph, annotate_crossings, attach_endpoints, build_graph, contract_graph
from .world import (
    AgentSpec,
    ConvexObstacle,
    PlacementError,
    Scenario,
    ScenarioError,
    inflate_obstacle,
    load_scenario,
    make_preset,
    random_scenario,
    save_scenario,
    validate_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AgentSpec",
    "annotate_crossings",
    "attach_endpoints",
    "braking_input",
    "build_graph",
    "build_time_map",
    "Bus",
    "CompletePassage",
    "ConfigError",
    "conflict_index",
    "contract_graph",
    "ConvexObstacle",
    "detect_all_passages",
    "detect_complete_passage",
    "DetectionParams",
    "DynamicsParams",
    "GeometryError",
    "GraphParams",
    "inflate_obstacle",
    "load_scenario",
    "make_preset",
    "MpcParams",
    "MpcWeights",
    "OverlapError",
    "PassageSet",
    "PassageTimeMap",
    "PlacementError",
    "plan_path",
    "PlanError",
    "PlannerParams",
    "PlanResult",
    "QpProblem",
    "QpSolution",
    "random_scenario",
    "read_trace",
    "ReferencePath",
    "ReplanParams",
    "run_scenario",
    "Runner",
    "RunParams",
    "RunResult",
    "safety_audit",
    "SafetyReport",
    "save_scenario",
    "Scenario",
    "ScenarioError",
    "ScenarioParams",
    "score_path",
    "solve_mpc",
    "solve_qp",
    "Trajectory",
    "validate_scenario",
    "VoronoiGraph",
    "write_trace",
    "__version__",
]
