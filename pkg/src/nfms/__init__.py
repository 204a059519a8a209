"""Mapping and scheduling of chained network functions onto capacity-limited nodes."""

from .greedy import GreedyCriterion, greedy_map
from .hvf import hvf_map
from .lp import Constraint, LinearProgram, LpSolution, Status, solve_lp, solve_milp
from .metrics import MetricsConfig, RunMetrics, confidence_summary, cost, revenue, time_gaps
from .milp import MilpObjectiveConfig, ObjectiveMode, build_milp, decode, milp_map
from .model import (
    FunctionPlacement,
    FunctionSpec,
    InfeasibleCommit,
    MappingSolution,
    NetworkState,
    NodeState,
    Rejected,
    ServiceRequest,
    check_feasibility,
    commit,
    release,
    schedule_assignment,
)
from .oracle import brute_force
from .scenario import ScenarioConfig, generate_arrivals, generate_network
from .sim import SOLVERS, SolverOptions, make_solver, run, simulate
from .tabu import TabuConfig, tabu_search

__version__ = "0.1.0"
