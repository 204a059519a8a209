"""Sequential discrete-event loop: arrivals, solver calls, commits and departures."""

from __future__ import annotations

import json
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

from .greedy import GreedyCriterion, greedy_map
from .hvf import hvf_map
from .metrics import MetricsConfig, RunMetrics, cost, queue_length, revenue, time_gaps
from .milp import MilpLog, MilpObjectiveConfig, milp_map
from .model import (
    MappingSolution,
    NetworkState,
    Rejected,
    ServiceRequest,
    commit,
    release,
)
from .scenario import ScenarioConfig, generate_arrivals, generate_network
from .tabu import TabuConfig, tabu_search

SOLVERS = ("GFP", "GLL", "GBA", "TS", "HVF", "MILP")

Solver = Callable[[NetworkState, ServiceRequest], MappingSolution]


@dataclass
class SolverOptions:
    tabu: TabuConfig = field(default_factory=TabuConfig)
    objective: MilpObjectiveConfig = field(default_factory=MilpObjectiveConfig)
    milp_node_budget: int = 100_000
    seed: int = 0
    lp_backend: str = "highs"


def make_solver(name: str, opts: SolverOptions | None = None) -> Solver:
    """Return ``solve(net, req)`` for one of :data:`SOLVERS`.

    The TS generator is reseeded per request from ``opts.seed`` and the
    request id, so a replay draws the same numbers.
    """
    opts = opts or SolverOptions()
    if name in ("GFP", "GLL", "GBA"):
        crit = GreedyCriterion(name)
        return lambda net, req: greedy_map(net, req, crit)
    if name == "TS":
        return lambda net, req: tabu_search(
            net, req, opts.tabu, random.Random(opts.seed * 1_000_003 + req.id)
        )
    if name == "HVF":
        return lambda net, req: hvf_map(net, req, opts.objective, backend=opts.lp_backend)
    if name == "MILP":

        def solve(net, req):
            log = MilpLog()
            try:
                return milp_map(
                    net, req, opts.objective, node_budget=opts.milp_node_budget, log=log, backend=opts.lp_backend
                )
            finally:
                solve.last_log = log

        solve.last_log = None
        return solve
    raise ValueError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")


@dataclass
class ArrivalRecord:
    request_id: int
    arrival_time: int
    solver: str
    accepted: bool
    reason: str
    flow_time: int | None
    time_gap: int | None
    revenue: float | None
    cost: float | None
    assignment: list[int] | None
    acceptance_ratio: float
    cumulative_revenue: float
    cumulative_cost: float
    queue_length: int
    budget_exhausted: bool = False


@dataclass
class SimulationTrace:
    solver: str
    seed: int
    records: list[ArrivalRecord] = field(default_factory=list)
    metrics: RunMetrics = field(default_factory=RunMetrics)
    audit_violations: list[str] = field(default_factory=list)

    @property
    def wall_ns(self) -> list[int]:
        return self.metrics.computation_time_ns

    def to_jsonl(self) -> str:
        """Deterministic trace text; wall-clock times are left out."""
        lines = [json.dumps(asdict(r), sort_keys=True) for r in self.records]
        return "\n".join(lines) + "\n"


def _audit(net: NetworkState, before: dict[int, int], req: ServiceRequest, out: list[str]) -> None:
    used = sum(n.buffer_capacity - n.available_buffer for n in net.nodes)
    held = net.held_buffer()
    if used != held:
        out.append(f"request {req.id}: buffer in use {used} != held {held}")
    probe = net.copy()
    release(probe, req.id)
    restored = {n.id: n.available_buffer for n in probe.nodes}
    if restored != before:
        out.append(f"request {req.id}: release did not restore buffers")


def simulate(
    net: NetworkState,
    arrivals: Sequence[ServiceRequest],
    solver_name: str,
    solver: Solver,
    *,
    seed: int = 0,
    metrics_cfg: MetricsConfig = MetricsConfig(),
    audit: bool = False,
    on_step: Callable[[NetworkState, ArrivalRecord], None] | None = None,
) -> SimulationTrace:
    """Feed ``arrivals`` to ``solver`` in time order, mutating ``net``."""
    trace = SimulationTrace(solver_name, seed)
    m = trace.metrics
    for req in sorted(arrivals, key=lambda r: (r.arrival_time, r.id)):
        net.advance(req.arrival_time)
        reason = ""
        t0 = time.perf_counter_ns()
        try:
            sol = solver(net, req)
        except Rejected as exc:
            sol, reason = None, exc.reason
        wall = time.perf_counter_ns() - t0
        log = getattr(solver, "last_log", None)
        exhausted = bool(log is not None and log.status is not None and log.status.value == "iteration_limit")

        if sol is not None:
            before = {n.id: n.available_buffer for n in net.nodes} if audit else None
            commit(net, req, sol)
            if audit:
                _audit(net, before, req, trace.audit_violations)
        elif audit:
            used = sum(n.buffer_capacity - n.available_buffer for n in net.nodes)
            if used != net.held_buffer():
                trace.audit_violations.append(f"request {req.id}: buffer drift after rejection")

        m.record(req, sol, wall, metrics_cfg)
        ql = queue_length(net)
        m.queue_length_series.append((req.arrival_time, ql))
        rec = ArrivalRecord(
            request_id=req.id,
            arrival_time=req.arrival_time,
            solver=solver_name,
            accepted=sol is not None,
            reason=reason,
            flow_time=sol.flow_time(req) if sol else None,
            time_gap=time_gaps(req, sol) if sol else None,
            revenue=revenue(req, sol) if sol else None,
            cost=cost(req, sol, metrics_cfg) if sol else None,
            assignment=list(sol.assignment) if sol else None,
            acceptance_ratio=m.acceptance_ratio,
            cumulative_revenue=m.cumulative_revenue,
            cumulative_cost=m.cumulative_cost,
            queue_length=ql,
            budget_exhausted=exhausted,
        )
        trace.records.append(rec)
        if on_step is not None:
            on_step(net, rec)
    return trace


def run(
    cfg: ScenarioConfig,
    solver: str,
    opts: SolverOptions | None = None,
    *,
    audit: bool = False,
    on_step=None,
) -> SimulationTrace:
    opts = opts or SolverOptions(seed=cfg.seed)
    net = generate_network(cfg)
    arrivals = generate_arrivals(cfg)
    return simulate(
        net, arrivals, solver, make_solver(solver, opts), seed=cfg.seed, audit=audit, on_step=on_step
    )
