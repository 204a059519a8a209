"""Domain types for online network function mapping and scheduling.

All times and durations are non-negative integers. Function indices are
0-based positions in the service chain.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class CapabilityError(ValueError):
    """Raised when a node is asked to process a function kind it lacks."""


class InfeasibleCommit(ValueError):
    """Raised by :func:`commit` when the solution violates a constraint."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class UnknownService(KeyError):
    pass


class Rejected(Exception):
    """A solver could not map and schedule the request.

    ``function_index`` is the first function that had no admissible node,
    or ``None`` when the failure is not tied to one function (LP
    infeasibility, exhausted search budget).
    """

    def __init__(self, reason: str, function_index: int | None = None):
        self.reason = reason
        self.function_index = function_index
        where = "" if function_index is None else f" at function {function_index}"
        super().__init__(f"rejected{where}: {reason}")


@dataclass(frozen=True)
class FunctionSpec:
    label: int
    buffer_demand: int

    def __post_init__(self):
        if self.buffer_demand <= 0:
            raise ValueError("buffer_demand must be positive")


@dataclass(frozen=True)
class ServiceRequest:
    id: int
    functions: tuple[FunctionSpec, ...]
    arrival_time: int
    deadline: int

    def __post_init__(self):
        if not self.functions:
            raise ValueError("a service needs at least one function")
        if self.deadline < self.arrival_time:
            raise ValueError("deadline precedes arrival")
        object.__setattr__(self, "functions", tuple(self.functions))

    def __len__(self) -> int:
        return len(self.functions)


@dataclass(frozen=True)
class QueueEntry:
    service_id: int
    function_index: int
    start: int
    completion: int
    buffer: int


@dataclass
class NodeState:
    id: int
    processing_time: dict[int, int]
    buffer_capacity: int
    available_buffer: int | None = None
    queue_completion_time: int = 0
    queue: list[QueueEntry] = field(default_factory=list)

    def __post_init__(self):
        if self.available_buffer is None:
            self.available_buffer = self.buffer_capacity
        if not 0 <= self.available_buffer <= self.buffer_capacity:
            raise ValueError(f"node {self.id}: available buffer out of range")
        if any(rho <= 0 for rho in self.processing_time.values()):
            raise ValueError(f"node {self.id}: processing times must be positive")

    @property
    def capabilities(self) -> frozenset[int]:
        return frozenset(self.processing_time)

    def can_process(self, label: int) -> bool:
        return label in self.processing_time

    def rho(self, label: int) -> int:
        try:
            return self.processing_time[label]
        except KeyError:
            raise CapabilityError(f"node {self.id} cannot process function kind {label}") from None


@dataclass
class NetworkState:
    nodes: list[NodeState]
    now: int = 0
    # service id -> entries still holding buffer
    holdings: dict[int, list[tuple[int, QueueEntry]]] = field(default_factory=dict)

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        self._index = {n.id: n for n in self.nodes}

    def node(self, node_id: int) -> NodeState:
        return self._index[node_id]

    def copy(self) -> NetworkState:
        return copy.deepcopy(self)

    def held_buffer(self) -> int:
        return sum(e.buffer for entries in self.holdings.values() for _, e in entries)

    def advance(self, now: int) -> None:
        """Move the clock to ``now`` and free every function completed by then."""
        if now < self.now:
            raise ValueError("simulation clock cannot move backwards")
        self.now = now
        for node in self.nodes:
            done = 0
            while done < len(node.queue) and node.queue[done].completion <= now:
                node.available_buffer += node.queue[done].buffer
                done += 1
            if done:
                del node.queue[:done]
            if not node.queue:
                node.queue_completion_time = max(node.queue_completion_time, now)
        for sid in list(self.holdings):
            left = [(nid, e) for nid, e in self.holdings[sid] if e.completion > now]
            if left:
                self.holdings[sid] = left
            else:
                del self.holdings[sid]


@dataclass(frozen=True)
class FunctionPlacement:
    function_index: int
    node_id: int
    start_time: int
    completion_time: int


@dataclass(frozen=True)
class MappingSolution:
    service_id: int
    placements: tuple[FunctionPlacement, ...]

    @property
    def completion_time(self) -> int:
        return self.placements[-1].completion_time

    def flow_time(self, req: ServiceRequest) -> int:
        return self.completion_time - req.arrival_time

    @property
    def assignment(self) -> tuple[int, ...]:
        return tuple(p.node_id for p in self.placements)


@dataclass(frozen=True)
class Violation:
    kind: str  # capability | buffer | precedence | overlap | deadline | structure
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.detail}"


def earliest_completion(node: NodeState, func: FunctionSpec, predecessor_done: int) -> int:
    return node.rho(func.label) + max(node.queue_completion_time, predecessor_done)


def schedule_assignment(
    net: NetworkState, req: ServiceRequest, node_ids: Sequence[int]
) -> MappingSolution:
    """Place each function at the tail of its node's queue, as early as possible.

    For a fixed assignment this is the minimum-flow-time schedule: a
    function starts when both its node and its predecessor are done.
    Buffer and deadline are not checked here.
    """
    pi = {}
    done = req.arrival_time
    placements = []
    for i, (func, nid) in enumerate(zip(req.functions, node_ids)):
        node = net.node(nid)
        start = max(pi.get(nid, node.queue_completion_time), done)
        done = start + node.rho(func.label)
        pi[nid] = done
        placements.append(FunctionPlacement(i, nid, start, done))
    return MappingSolution(req.id, tuple(placements))


def check_feasibility(
    net: NetworkState, req: ServiceRequest, sol: MappingSolution
) -> list[Violation]:
    """Return every constraint the solution breaks; an empty list means feasible."""
    out: list[Violation] = []
    if sol.service_id != req.id:
        out.append(Violation("structure", "solution belongs to another service"))
    if [p.function_index for p in sol.placements] != list(range(len(req))):
        out.append(Violation("structure", "need exactly one placement per function, in order"))
        return out

    demand: dict[int, int] = {}
    for p, func in zip(sol.placements, req.functions):
        try:
            node = net.node(p.node_id)
        except KeyError:
            out.append(Violation("capability", f"f{p.function_index}: unknown node {p.node_id}"))
            continue
        if not node.can_process(func.label):
            out.append(
                Violation("capability", f"f{p.function_index}: node {node.id} lacks kind {func.label}")
            )
            continue
        if p.completion_time - p.start_time != node.rho(func.label):
            out.append(
                Violation("structure", f"f{p.function_index}: duration differs from processing time")
            )
        demand[node.id] = demand.get(node.id, 0) + func.buffer_demand

    for nid, d in sorted(demand.items()):
        avail = net.node(nid).available_buffer
        if d > avail:
            out.append(Violation("buffer", f"node {nid}: demand {d} > available {avail}"))

    prev = req.arrival_time
    for p in sol.placements:
        if p.start_time < prev:
            out.append(Violation("precedence", f"f{p.function_index} starts at {p.start_time} < {prev}"))
        prev = p.completion_time

    for nid in sorted({p.node_id for p in sol.placements}):
        if nid not in net._index:
            continue
        spans = [(e.start, e.completion) for e in net.node(nid).queue]
        spans += [(p.start_time, p.completion_time) for p in sol.placements if p.node_id == nid]
        spans.sort()
        for (s0, c0), (s1, c1) in zip(spans, spans[1:]):
            if s1 < c0:
                out.append(Violation("overlap", f"node {nid}: [{s0},{c0}) overlaps [{s1},{c1})"))

    if sol.placements and sol.completion_time > req.deadline:
        out.append(
            Violation("deadline", f"completion {sol.completion_time} > deadline {req.deadline}")
        )
    return out


def commit(net: NetworkState, req: ServiceRequest, sol: MappingSolution) -> NetworkState:
    """Apply an accepted solution to ``net`` in place and return it."""
    violations = check_feasibility(net, req, sol)
    if violations:
        raise InfeasibleCommit(violations)
    if req.id in net.holdings:
        raise InfeasibleCommit([Violation("structure", f"service {req.id} already committed")])
    held = []
    for p, func in zip(sol.placements, req.functions):
        node = net.node(p.node_id)
        entry = QueueEntry(req.id, p.function_index, p.start_time, p.completion_time, func.buffer_demand)
        node.queue.append(entry)
        node.queue.sort(key=lambda e: e.start)
        node.available_buffer -= func.buffer_demand
        node.queue_completion_time = max(node.queue_completion_time, p.completion_time)
        held.append((node.id, entry))
    net.holdings[req.id] = held
    return net


def release(net: NetworkState, service_id: int) -> NetworkState:
    """Return the buffer a service still holds and drop its queue entries."""
    try:
        held = net.holdings.pop(service_id)
    except KeyError:
        raise UnknownService(service_id) from None
    for nid, entry in held:
        node = net.node(nid)
        node.available_buffer += entry.buffer
        node.queue.remove(entry)
        node.queue_completion_time = node.queue[-1].completion if node.queue else net.now
    return net


class Scratch:
    """Mutable view of buffers and queue tails used while a solver builds a plan.

    The solver never touches the real :class:`NetworkState`; dropping the
    scratch object is the rollback.
    """

    __slots__ = ("net", "buffer", "tail")

    def __init__(self, net: NetworkState):
        self.net = net
        self.buffer = {n.id: n.available_buffer for n in net.nodes}
        self.tail = {n.id: n.queue_completion_time for n in net.nodes}

    def place(self, node_id: int, func: FunctionSpec, completion: int) -> None:
        self.buffer[node_id] -= func.buffer_demand
        self.tail[node_id] = completion


def candidates(
    scratch: Scratch, func: FunctionSpec, predecessor_done: int, deadline: int
) -> Iterable[tuple[NodeState, int]]:
    """Nodes able to take ``func`` now, with the completion time they would give."""
    for node in scratch.net.nodes:
        rho = node.processing_time.get(func.label)
        if rho is None or scratch.buffer[node.id] < func.buffer_demand:
            continue
        t_e = rho + max(scratch.tail[node.id], predecessor_done)
        if t_e <= deadline:
            yield node, t_e
