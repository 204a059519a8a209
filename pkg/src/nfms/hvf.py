"""Hard variable fixing: round one function per LP-relaxation round."""

from __future__ import annotations

from .lp import FEAS_TOL, solve_lp
from .milp import MilpObjectiveConfig, assignment_values, build_milp
from .model import (
    FunctionPlacement,
    MappingSolution,
    NetworkState,
    Rejected,
    Scratch,
    ServiceRequest,
)


def hvf_map(
    net: NetworkState,
    req: ServiceRequest,
    cfg: MilpObjectiveConfig | None = None,
    *,
    positions: int | None = None,
    rounds: list[int] | None = None,
    backend: str = "native",
) -> MappingSolution:
    """Map ``req`` by repeatedly solving the relaxation of the unmapped tail.

    Each round drops the functions already fixed: their buffer and queue
    effects are folded into the node constants, and the completion of the
    last fixed function plays the role of the arrival time. The current
    function goes to the node maximising ``xi / max(pi_j, 1)`` among nodes
    with a non-zero relaxed value that still fit its buffer and deadline.
    ``rounds`` collects the number of assignment columns per round.
    """
    scratch = Scratch(net)
    done = req.arrival_time
    placements = []
    for i, func in enumerate(req.functions):
        rest = ServiceRequest(req.id, req.functions[i:], done, req.deadline)
        prog, variables = build_milp(
            net, rest, cfg, positions=positions, buffer=scratch.buffer, tail=scratch.tail
        )
        if rounds is not None:
            rounds.append(len(variables.xi))
        relaxed = solve_lp(prog, backend=backend)
        if not relaxed.optimal:
            raise Rejected(f"relaxation {relaxed.status.value}", i)
        weights = assignment_values(variables, relaxed.values).get(0, {})

        best = None
        best_rank = 0.0
        for node in net.nodes:
            xi = weights.get(node.id, 0.0)
            if xi <= FEAS_TOL or scratch.buffer[node.id] < func.buffer_demand:
                continue
            t_e = node.processing_time[func.label] + max(scratch.tail[node.id], done)
            if t_e > req.deadline:
                continue
            rank = xi / max(scratch.tail[node.id], 1)
            if best is None or rank > best_rank:
                best, best_rank = node, rank
        if best is None:
            raise Rejected("no node with a non-zero relaxed assignment fits", i)
        start = max(scratch.tail[best.id], done)
        done = start + best.processing_time[func.label]
        scratch.place(best.id, func, done)
        placements.append(FunctionPlacement(i, best.id, start, done))
    return MappingSolution(req.id, tuple(placements))
