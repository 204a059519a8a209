"""Seeded random networks and service arrival streams."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .model import FunctionSpec, NetworkState, NodeState, ServiceRequest

Range = tuple[int, int]


@dataclass
class ScenarioConfig:
    node_count: int = 100
    buffer_range: Range = (75, 100)
    capabilities_per_node_range: Range = (1, 7)
    processing_time_range: Range = (15, 30)
    buffer_demand_range: Range = (20, 30)
    functions_per_service_range: Range = (5, 10)
    deadline_range: Range = (5000, 10000)  # offset from arrival
    function_catalog_size: int = 10
    arrival_rate: float = 1 / 3  # services per time unit
    total_arrivals: int = 1500
    seed: int = 0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name.endswith("_range"):
                lo, hi = getattr(self, f.name)
                if lo > hi:
                    raise ValueError(f"{f.name}: min {lo} exceeds max {hi}")
                setattr(self, f.name, (int(lo), int(hi)))
        if self.function_catalog_size < self.capabilities_per_node_range[1]:
            raise ValueError("catalog smaller than the largest capability set")
        if self.function_catalog_size < self.functions_per_service_range[1]:
            raise ValueError("catalog smaller than the longest service chain")
        if self.processing_time_range[0] <= 0 or self.buffer_demand_range[0] <= 0:
            raise ValueError("processing times and buffer demands must be positive")
        if self.arrival_rate <= 0:
            raise ValueError("arrival_rate must be positive")

    @classmethod
    def desk_scale(cls, **overrides) -> ScenarioConfig:
        """25 nodes and 300 arrivals with the default load per node."""
        base = dict(node_count=25, arrival_rate=(1 / 3) * 25 / 100, total_arrivals=300)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> ScenarioConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    net_seq, arr_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(net_seq), np.random.default_rng(arr_seq)


def _uniform(rng: np.random.Generator, r: Range) -> int:
    return int(rng.integers(r[0], r[1], endpoint=True))


def generate_network(cfg: ScenarioConfig) -> NetworkState:
    rng, _ = _streams(cfg.seed)
    catalog = np.arange(1, cfg.function_catalog_size + 1)
    nodes = []
    for j in range(cfg.node_count):
        capacity = _uniform(rng, cfg.buffer_range)
        kinds = sorted(
            int(k)
            for k in rng.choice(catalog, _uniform(rng, cfg.capabilities_per_node_range), replace=False)
        )
        rho = {k: _uniform(rng, cfg.processing_time_range) for k in kinds}
        nodes.append(NodeState(j, rho, capacity))
    return NetworkState(nodes)


def generate_arrivals(cfg: ScenarioConfig) -> list[ServiceRequest]:
    """Arrival stream with memoryless integer inter-arrival gaps.

    For rates up to one per time unit the gaps are geometric on {1, 2, ...}
    with mean ``1 / arrival_rate`` (a Bernoulli arrival process, so arrival
    times strictly increase). Faster rates floor a continuous Poisson
    process, so several services may share a time unit.
    """
    _, rng = _streams(cfg.seed)
    n = cfg.total_arrivals
    if cfg.arrival_rate <= 1:
        times = np.cumsum(rng.geometric(cfg.arrival_rate, size=n))
    else:
        times = np.floor(np.cumsum(rng.exponential(1 / cfg.arrival_rate, size=n))).astype(np.int64)
    catalog = np.arange(1, cfg.function_catalog_size + 1)
    out = []
    for sid, t_a in enumerate(times):
        m = _uniform(rng, cfg.functions_per_service_range)
        kinds = rng.choice(catalog, m, replace=False)
        funcs = tuple(FunctionSpec(int(k), _uniform(rng, cfg.buffer_demand_range)) for k in kinds)
        t_a = int(t_a)
        out.append(ServiceRequest(sid, funcs, t_a, t_a + _uniform(rng, cfg.deadline_range)))
    return out


def request_to_record(req: ServiceRequest) -> dict:
    return {
        "id": req.id,
        "arrival_time": req.arrival_time,
        "deadline": req.deadline,
        "functions": [[f.label, f.buffer_demand] for f in req.functions],
    }


def request_from_record(rec: dict) -> ServiceRequest:
    funcs = tuple(FunctionSpec(int(k), int(d)) for k, d in rec["functions"])
    return ServiceRequest(int(rec["id"]), funcs, int(rec["arrival_time"]), int(rec["deadline"]))


def node_to_record(node: NodeState) -> dict:
    return {
        "id": node.id,
        "buffer_capacity": node.buffer_capacity,
        "available_buffer": node.available_buffer,
        "queue_completion_time": node.queue_completion_time,
        "processing_time": {str(k): v for k, v in sorted(node.processing_time.items())},
    }


def node_from_record(rec: dict) -> NodeState:
    return NodeState(
        int(rec["id"]),
        {int(k): int(v) for k, v in rec["processing_time"].items()},
        int(rec["buffer_capacity"]),
        rec.get("available_buffer"),
        int(rec.get("queue_completion_time", 0)),
    )


def export_scenario(net: NetworkState, arrivals: Iterable[ServiceRequest], path: str | Path) -> None:
    """Write one JSON record per line: nodes first, then requests in arrival order."""
    with open(path, "w") as fh:
        for node in net.nodes:
            fh.write(json.dumps({"node": node_to_record(node)}, sort_keys=True) + "\n")
        for req in arrivals:
            fh.write(json.dumps({"request": request_to_record(req)}, sort_keys=True) + "\n")


def load_scenario(path: str | Path) -> tuple[NetworkState, list[ServiceRequest]]:
    nodes, reqs = [], []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if "node" in rec:
                nodes.append(node_from_record(rec["node"]))
            else:
                reqs.append(request_from_record(rec["request"]))
    return NetworkState(nodes), reqs
