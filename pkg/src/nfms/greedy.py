"""Greedy one-shot mapping: each function goes to the best-ranked capable node."""

from __future__ import annotations

import enum

from .model import (
    FunctionPlacement,
    MappingSolution,
    NetworkState,
    Rejected,
    Scratch,
    ServiceRequest,
    candidates,
)


class GreedyCriterion(enum.Enum):
    FAST_PROCESSING = "GFP"
    BEST_AVAILABILITY = "GBA"
    LEAST_LOADED = "GLL"


def _rank_key(criterion: GreedyCriterion, scratch: Scratch, label: int):
    # lower key wins; node id breaks ties
    if criterion is GreedyCriterion.FAST_PROCESSING:
        return lambda node: (node.processing_time[label], node.id)
    if criterion is GreedyCriterion.BEST_AVAILABILITY:
        return lambda node: (scratch.tail[node.id], node.id)
    return lambda node: (-scratch.buffer[node.id], node.id)


def greedy_map(
    net: NetworkState, req: ServiceRequest, criterion: GreedyCriterion
) -> MappingSolution:
    scratch = Scratch(net)
    done = req.arrival_time
    placements = []
    for i, func in enumerate(req.functions):
        pool = [node for node, _ in candidates(scratch, func, done, req.deadline)]
        if not pool:
            raise Rejected("no capable node with buffer and deadline slack", i)
        best = min(pool, key=_rank_key(criterion, scratch, func.label))
        start = max(scratch.tail[best.id], done)
        done = start + best.processing_time[func.label]
        scratch.place(best.id, func, done)
        placements.append(FunctionPlacement(i, best.id, start, done))
    return MappingSolution(req.id, tuple(placements))
