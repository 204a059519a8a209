"""Position-indexed MILP for mapping one arriving service.

Columns: ``xi[i, j, k]`` (function ``i`` occupies the ``k``-th new slot of
node ``j``), ``t[i]`` (completion of function ``i``) and ``tau[j, k]``
(finish time of slot ``k`` on node ``j``). Row families:

========== ==============================================================
buffer     sum_{i,k} delta_i xi[i,j,k] <= B_j
capability sum_k xi[i,j,k] <= beta_ij
position   sum_i xi[i,j,k] <= 1
assign     sum_{j,k} xi[i,j,k] = 1
chain      t[i] - t[i-1] - sum_{j,k} rho_ij xi[i,j,k] >= 0          (i > 0)
slot_order tau[j,k] - tau[j,k-1] - sum_i rho_ij xi[i,j,k] >= 0        (k > 0)
arrive_t   t[0] - sum_{j,k} (rho_0j + t_a) xi[0,j,k] >= 0
arrive_tau tau[j,0] - sum_i (rho_ij + t_a) xi[i,j,0] >= 0
queue_t    t[i] - sum_{j,k} (rho_ij + pi_j) xi[i,j,k] >= 0
queue_tau  tau[j,k] - sum_i (rho_ij + pi_j) xi[i,j,k] >= 0
link_a     tau[j,k] - t[i] + M xi[i,j,k] <= M
link_b     t[i] - tau[j,k] + M xi[i,j,k] <= M
deadline   t[m-1] <= t_l
========== ==============================================================
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .lp import INT_TOL, LinearProgram, LpSolution, Status, solve_milp
from .model import (
    MappingSolution,
    NetworkState,
    NodeState,
    Rejected,
    ServiceRequest,
    check_feasibility,
    schedule_assignment,
)


class ObjectiveMode(enum.Enum):
    FLOW_TIME = "flow_time"
    MULTI_OBJECTIVE = "multi_objective"


@dataclass
class MilpObjectiveConfig:
    mode: ObjectiveMode = ObjectiveMode.FLOW_TIME
    alpha: float = 1.0
    lam: float = 0.0
    small_delta: float = 1e-3

    def __post_init__(self):
        if self.alpha < 0 or self.lam < 0:
            raise ValueError("objective weights must be non-negative")
        if self.small_delta <= 0:
            raise ValueError("small_delta must be positive")


@dataclass
class MilpVariables:
    xi: dict[tuple[int, int, int], int]
    t: dict[int, int]
    tau: dict[tuple[int, int], int]
    positions_per_node: dict[int, int]
    big_m: float


@dataclass
class MilpLog:
    status: Status | None = None
    nodes: int = 0
    lp_iterations: int = 0
    columns: int = 0
    rows: int = 0


class DecodeError(ValueError):
    """The solution is fractional or does not assign every function once."""


def _slot_count(req: ServiceRequest, node: NodeState, buffer: int, limit: int) -> int:
    # how many of this request's functions could ever share the node
    demands = sorted(f.buffer_demand for f in req.functions if node.can_process(f.label))
    fits = 0
    for d in demands:
        if d > buffer:
            break
        buffer -= d
        fits += 1
    return min(fits, limit)


def build_milp(
    net: NetworkState,
    req: ServiceRequest,
    cfg: MilpObjectiveConfig | None = None,
    *,
    positions: int | None = None,
    prune: bool = True,
    buffer: Mapping[int, int] | None = None,
    tail: Mapping[int, int] | None = None,
) -> tuple[LinearProgram, MilpVariables]:
    """Instantiate the program for ``req`` against the current network.

    ``positions`` caps the slots per node (default: chain length). With
    ``prune`` the columns that the buffer and capability rows would force
    to zero are left out and each node gets only as many slots as its
    buffer can fill; the optimum is unchanged. ``buffer`` and ``tail``
    override each node's available buffer and queue completion time.
    """
    cfg = cfg or MilpObjectiveConfig()
    m = len(req)
    k_max = m if positions is None else positions
    B = {n.id: n.available_buffer for n in net.nodes} if buffer is None else dict(buffer)
    pi = {n.id: n.queue_completion_time for n in net.nodes} if tail is None else dict(tail)
    t_a, t_l = req.arrival_time, req.deadline

    rho_max = sum(
        max((n.processing_time.get(f.label, 0) for n in net.nodes), default=0) for f in req.functions
    )
    big_m = float(t_l + rho_max + max(pi.values(), default=0))

    def usable(i, node):
        f = req.functions[i]
        return node.can_process(f.label) and (not prune or f.buffer_demand <= B[node.id])

    slots = {}
    for node in net.nodes:
        if prune:
            k = _slot_count(req, node, B[node.id], k_max)
            if k:
                slots[node.id] = k
        else:
            slots[node.id] = k_max

    names: list[str] = []
    lower: list[float] = []
    upper: list[float] = []
    binary: list[bool] = []

    def column(name, hi, is_bin):
        names.append(name)
        lower.append(0.0)
        upper.append(hi)
        binary.append(is_bin)
        return len(names) - 1

    xi = {}
    for i in range(m):
        for node in net.nodes:
            if node.id not in slots or (prune and not usable(i, node)):
                continue
            for k in range(slots[node.id]):
                xi[i, node.id, k] = column(f"xi_{i}_{node.id}_{k}", 1.0, True)
    t = {i: column(f"t_{i}", big_m, False) for i in range(m)}
    tau = {
        (j, k): column(f"tau_{j}_{k}", big_m, False) for j, kj in slots.items() for k in range(kj)
    }

    obj = [0.0] * len(names)
    obj[t[m - 1]] = cfg.alpha if cfg.mode is ObjectiveMode.MULTI_OBJECTIVE else 1.0
    offset = -obj[t[m - 1]] * t_a
    if cfg.mode is ObjectiveMode.MULTI_OBJECTIVE and cfg.lam:
        for (i, j, k), col in xi.items():
            obj[col] += cfg.lam * req.functions[i].buffer_demand / (cfg.small_delta + B[j])

    prog = LinearProgram(obj, lower=lower, upper=upper, binary=binary, offset=offset, names=names)
    add = prog.add_constraint
    by_node: dict[int, list[tuple[int, int, int]]] = {}
    by_func: dict[int, list[tuple[int, int, int]]] = {}
    for key in xi:
        by_node.setdefault(key[1], []).append(key)
        by_func.setdefault(key[0], []).append(key)

    def rho(i, j):
        # incapable pairs only appear unpruned, where their xi is forced to 0
        return net.node(j).processing_time.get(req.functions[i].label, 0)

    for j in slots:
        keys = by_node.get(j, [])
        add({xi[key]: req.functions[key[0]].buffer_demand for key in keys}, "<=", B[j], f"buffer_{j}")
    for i in range(m):
        for node in net.nodes:
            j = node.id
            if j not in slots:
                continue
            keys = [key for key in by_func.get(i, []) if key[1] == j]
            beta = 1.0 if node.can_process(req.functions[i].label) else 0.0
            if keys or not prune:
                add({xi[key]: 1.0 for key in keys}, "<=", beta, f"capability_{i}_{j}")
    for j, kj in slots.items():
        for k in range(kj):
            keys = [key for key in by_node.get(j, []) if key[2] == k]
            add({xi[key]: 1.0 for key in keys}, "<=", 1.0, f"position_{j}_{k}")
    for i in range(m):
        add({xi[key]: 1.0 for key in by_func.get(i, [])}, "=", 1.0, f"assign_{i}")
    for i in range(1, m):
        row = {t[i]: 1.0, t[i - 1]: -1.0}
        row.update({xi[key]: -rho(i, key[1]) for key in by_func.get(i, [])})
        add(row, ">=", 0.0, f"chain_{i}")
    for j, kj in slots.items():
        for k in range(1, kj):
            row = {tau[j, k]: 1.0, tau[j, k - 1]: -1.0}
            row.update({xi[key]: -rho(key[0], j) for key in by_node.get(j, []) if key[2] == k})
            add(row, ">=", 0.0, f"slot_order_{j}_{k}")
    row = {t[0]: 1.0}
    row.update({xi[key]: -(rho(0, key[1]) + t_a) for key in by_func.get(0, [])})
    add(row, ">=", 0.0, "arrive_t")
    for j in slots:
        row = {tau[j, 0]: 1.0}
        row.update({xi[key]: -(rho(key[0], j) + t_a) for key in by_node.get(j, []) if key[2] == 0})
        add(row, ">=", 0.0, f"arrive_tau_{j}")
    for i in range(m):
        row = {t[i]: 1.0}
        row.update({xi[key]: -(rho(i, key[1]) + pi[key[1]]) for key in by_func.get(i, [])})
        add(row, ">=", 0.0, f"queue_t_{i}")
    for j, kj in slots.items():
        for k in range(kj):
            row = {tau[j, k]: 1.0}
            row.update(
                {xi[key]: -(rho(key[0], j) + pi[j]) for key in by_node.get(j, []) if key[2] == k}
            )
            add(row, ">=", 0.0, f"queue_tau_{j}_{k}")
    for (i, j, k), col in xi.items():
        add({tau[j, k]: 1.0, t[i]: -1.0, col: big_m}, "<=", big_m, f"link_a_{i}_{j}_{k}")
        add({t[i]: 1.0, tau[j, k]: -1.0, col: big_m}, "<=", big_m, f"link_b_{i}_{j}_{k}")
    add({t[m - 1]: 1.0}, "<=", float(t_l), "deadline")

    return prog, MilpVariables(xi, t, tau, dict(slots), big_m)


def decode(
    sol: LpSolution, variables: MilpVariables, net: NetworkState, req: ServiceRequest
) -> MappingSolution:
    """Turn an integral solution into a schedule.

    Functions are placed on the nodes the solution picks and started as
    early as the queue and chain allow, which removes any slack the solver
    left in intermediate completion times without moving the last one later.
    """
    if sol.values is None:
        raise DecodeError(f"no solution values (status {sol.status.value})")
    x = sol.values
    chosen: dict[int, int] = {}
    for (i, j, _), col in variables.xi.items():
        v = x[col]
        if abs(v - round(v)) > INT_TOL:
            raise DecodeError(f"xi[{i},{j}] = {v:.6g} is fractional")
        if round(v) == 1:
            if i in chosen:
                raise DecodeError(f"function {i} assigned twice")
            chosen[i] = j
    if sorted(chosen) != list(range(len(req))):
        raise DecodeError("some function is unassigned")
    out = schedule_assignment(net, req, [chosen[i] for i in range(len(req))])
    problems = check_feasibility(net, req, out)
    if problems:
        raise DecodeError("; ".join(map(str, problems)))
    return out


def milp_map(
    net: NetworkState,
    req: ServiceRequest,
    cfg: MilpObjectiveConfig | None = None,
    *,
    node_budget: int = 1_000_000,
    positions: int | None = None,
    log: MilpLog | None = None,
    backend: str = "native",
) -> MappingSolution:
    prog, variables = build_milp(net, req, cfg, positions=positions)
    sol = solve_milp(prog, node_budget=node_budget, backend=backend)
    if log is not None:
        log.status = sol.status
        log.nodes = sol.nodes
        log.lp_iterations = sol.iterations
        log.columns = prog.num_vars
        log.rows = len(prog.constraints)
    if sol.status is Status.INFEASIBLE:
        raise Rejected("no feasible mapping")
    if sol.values is None:
        raise Rejected("budget")
    return decode(sol, variables, net, req)


def assignment_values(variables: MilpVariables, values: np.ndarray) -> dict[int, dict[int, float]]:
    """Per function, the largest xi over slots for every node with a column."""
    out: dict[int, dict[int, float]] = {}
    for (i, j, _), col in variables.xi.items():
        row = out.setdefault(i, {})
        row[j] = max(row.get(j, 0.0), float(values[col]))
    return out
