"""Exhaustive search over assignments, for checking the solvers on small inputs."""

from __future__ import annotations

import itertools
import math
from collections import Counter

from .model import (
    FunctionSpec,
    MappingSolution,
    NetworkState,
    NodeState,
    Rejected,
    ServiceRequest,
    schedule_assignment,
)


class BudgetExceeded(ValueError):
    pass


def assignment_count(net: NetworkState, req: ServiceRequest) -> int:
    return math.prod(
        sum(1 for n in net.nodes if n.can_process(f.label)) for f in req.functions
    )


def brute_force(
    net: NetworkState,
    req: ServiceRequest,
    *,
    positions: int | None = None,
    budget: int = 100_000,
) -> MappingSolution:
    """Minimum flow-time feasible mapping, or :class:`Rejected` if none exists.

    ``positions`` limits how many of the request's functions one node may
    take. Ties go to the lexicographically smallest node-id tuple.
    """
    total = assignment_count(net, req)
    if total > budget:
        raise BudgetExceeded(f"{total} assignments exceed the enumeration budget {budget}")
    options = [[n.id for n in net.nodes if n.can_process(f.label)] for f in req.functions]
    best = None
    for combo in itertools.product(*options):
        if positions is not None and max(Counter(combo).values()) > positions:
            continue
        load = Counter()
        for nid, f in zip(combo, req.functions):
            load[nid] += f.buffer_demand
        if any(load[nid] > net.node(nid).available_buffer for nid in load):
            continue
        sol = schedule_assignment(net, req, combo)
        if sol.completion_time > req.deadline:
            continue
        if best is None or (sol.completion_time, combo) < (best.completion_time, best.assignment):
            best = sol
    if best is None:
        raise Rejected("no feasible assignment")
    return best


def small_instance(rng, *, max_nodes: int = 4, max_functions: int = 4, kinds: int = 4):
    """Random network and request small enough for :func:`brute_force`.

    Buffers lie in [20, 59] against demands in [20, 30], so no node can
    hold more than two of the request's functions.
    """
    nodes = []
    for j in range(rng.randint(1, max_nodes)):
        caps = rng.sample(range(1, kinds + 1), rng.randint(1, min(3, kinds)))
        nodes.append(
            NodeState(
                j,
                {c: rng.randint(15, 30) for c in caps},
                rng.randint(20, 59),
                queue_completion_time=rng.choice([0, 0, 10, 40, 80]),
            )
        )
    funcs = [FunctionSpec(rng.randint(1, kinds), rng.randint(20, 30)) for _ in range(rng.randint(1, max_functions))]
    t_a = rng.randint(0, 30)
    return NetworkState(nodes), ServiceRequest(0, tuple(funcs), t_a, t_a + rng.randint(30, 250))
