"""Tabu search over function-to-node assignments, minimising flow time.

A solution is fully determined by its assignment: functions are always
scheduled at the earliest time their node and predecessor allow. A move
migrates the function preceded by the largest idle gap to another node.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .model import (
    FunctionPlacement,
    MappingSolution,
    NetworkState,
    Rejected,
    Scratch,
    ServiceRequest,
    candidates,
    schedule_assignment,
)


@dataclass(frozen=True)
class TabuEntry:
    function_index: int
    forbidden_node: int
    expires_at_iteration: int


@dataclass
class TabuConfig:
    max_iterations: int = 500
    stall_limit: int | None = None  # None: chain length m
    # False reproduces the literal pseudocode: move target and
    # neighbourhood are fixed once from the initial solution.
    reselect_each_iteration: bool = True

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")


@dataclass
class TabuLog:
    """Audit record filled in by :func:`tabu_search` when passed in."""

    initial_flow_time: int | None = None
    best_flow_times: list[int] = field(default_factory=list)
    entries: list[tuple[int, TabuEntry]] = field(default_factory=list)  # (created at, entry)
    iterations: int = 0
    stop_reason: str = ""


def _rng(seed) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def random_initial(net: NetworkState, req: ServiceRequest, rng_seed=None) -> MappingSolution:
    rng = _rng(rng_seed)
    scratch = Scratch(net)
    done = req.arrival_time
    placements = []
    for i, func in enumerate(req.functions):
        pool = list(candidates(scratch, func, done, req.deadline))
        if not pool:
            raise Rejected("no feasible initial node", i)
        node, t_e = pool[rng.randrange(len(pool))]
        start = t_e - node.processing_time[func.label]
        scratch.place(node.id, func, t_e)
        placements.append(FunctionPlacement(i, node.id, start, t_e))
        done = t_e
    return MappingSolution(req.id, tuple(placements))


def gaps(sol: MappingSolution, req: ServiceRequest) -> list[int]:
    prev = req.arrival_time
    out = []
    for p in sol.placements:
        out.append(p.start_time - prev)
        prev = p.completion_time
    return out


def biggest_gap_function(sol: MappingSolution, req: ServiceRequest) -> int:
    g = gaps(sol, req)
    return max(range(len(g)), key=lambda i: (g[i], -i))


def _gap_order(sol: MappingSolution, req: ServiceRequest) -> list[int]:
    g = gaps(sol, req)
    return sorted(range(len(g)), key=lambda i: (-g[i], i))


def neighborhood(
    net: NetworkState, req: ServiceRequest, sol: MappingSolution, f: int
) -> list[MappingSolution]:
    """All feasible solutions obtained by moving function ``f`` to another node."""
    func = req.functions[f]
    assignment = list(sol.assignment)
    current = assignment[f]
    load: dict[int, int] = {}
    for i, nid in enumerate(assignment):
        if i != f:
            load[nid] = load.get(nid, 0) + req.functions[i].buffer_demand
    out = []
    for node in net.nodes:
        if node.id == current or not node.can_process(func.label):
            continue
        if node.available_buffer - load.get(node.id, 0) < func.buffer_demand:
            continue
        assignment[f] = node.id
        cand = schedule_assignment(net, req, assignment)
        if cand.completion_time <= req.deadline:
            out.append(cand)
    return out


def _flow(sol: MappingSolution) -> int:
    # arrival time is common to every candidate; completion orders them
    return sol.completion_time


def tabu_search(
    net: NetworkState,
    req: ServiceRequest,
    config: TabuConfig | None = None,
    rng_seed=None,
    log: TabuLog | None = None,
) -> MappingSolution:
    config = config or TabuConfig()
    m = len(req)
    stall_limit = m if config.stall_limit is None else config.stall_limit
    tenure = m - 1

    current = random_initial(net, req, rng_seed)
    best = current
    tabu: list[TabuEntry] = []
    log = log if log is not None else TabuLog()
    log.initial_flow_time = best.flow_time(req)
    log.best_flow_times.append(log.initial_flow_time)

    f = None
    moves: list[MappingSolution] = []
    stall = 0
    it = 0
    reason = "iteration limit"
    while it < config.max_iterations:
        if config.reselect_each_iteration or f is None:
            for f in _gap_order(current, req):
                moves = neighborhood(net, req, current, f)
                if moves:
                    break
            else:
                reason = "empty neighbourhood"
                break
        it += 1
        tabu = [e for e in tabu if e.expires_at_iteration >= it]
        forbidden = {(e.function_index, e.forbidden_node) for e in tabu}

        best_flow = _flow(best)
        # a move beating the best known solution is always allowed (aspiration)
        allowed = [z for z in moves if _flow(z) < best_flow]
        if not allowed:
            # least tabu: prefer moves not blocked by the list
            allowed = [z for z in moves if (f, z.assignment[f]) not in forbidden] or moves
        chosen = min(allowed, key=lambda z: (_flow(z), z.assignment[f]))

        entry = TabuEntry(f, current.assignment[f], it + tenure)
        tabu.append(entry)
        log.entries.append((it, entry))
        current = chosen
        if _flow(current) < best_flow:
            best = current
            stall = 0
        else:
            stall += 1
        log.best_flow_times.append(best.flow_time(req))
        if stall >= stall_limit:
            reason = "stalled"
            break
    log.iterations = it
    log.stop_reason = reason
    return best
