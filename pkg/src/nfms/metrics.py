"""Per-service economics and run-level accumulators."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

from .model import MappingSolution, NetworkState, ServiceRequest


@dataclass(frozen=True)
class MetricsConfig:
    theta: float = 0.2  # weight on buffer
    varrho: float = 0.2  # weight on occupied time


def revenue(req: ServiceRequest, sol: MappingSolution, net: NetworkState | None = None) -> int:
    """Buffer demanded plus processing time actually used.

    Processing time is read from the placements, so ``net`` is optional.
    """
    return sum(f.buffer_demand for f in req.functions) + sum(
        p.completion_time - p.start_time for p in sol.placements
    )


def cost(req: ServiceRequest, sol: MappingSolution, cfg: MetricsConfig = MetricsConfig()) -> float:
    """Buffer plus the whole occupation time, idle gaps included."""
    buffer = sum(f.buffer_demand for f in req.functions)
    return cfg.theta * buffer + cfg.varrho * sol.flow_time(req)


def time_gaps(req: ServiceRequest, sol: MappingSolution) -> int:
    prev = req.arrival_time
    total = 0
    for p in sol.placements:
        total += p.start_time - prev
        prev = p.completion_time
    return total


def queue_length(net: NetworkState) -> int:
    return sum(
        e.completion - e.start for node in net.nodes for e in node.queue if e.completion > net.now
    )


def confidence_summary(samples, level: float = 0.95) -> tuple[float, float, float]:
    """Mean, sample standard deviation and normal-approximation half-width."""
    xs = [float(x) for x in samples]
    if len(xs) < 2:
        raise ValueError("need at least two samples")
    mean = statistics.fmean(xs)
    sd = statistics.stdev(xs)
    z = 1.96 if level == 0.95 else statistics.NormalDist().inv_cdf(0.5 + level / 2)
    return mean, sd, z * sd / math.sqrt(len(xs))


@dataclass
class RunMetrics:
    arrived: int = 0
    accepted: int = 0
    cumulative_revenue: float = 0.0
    cumulative_cost: float = 0.0
    flow_times: list[int] = field(default_factory=list)
    time_gaps: list[int] = field(default_factory=list)
    queue_length_series: list[tuple[int, int]] = field(default_factory=list)
    computation_time_ns: list[int] = field(default_factory=list)

    @property
    def acceptance_ratio(self) -> float:
        return self.accepted / self.arrived if self.arrived else 0.0

    def record(
        self,
        req: ServiceRequest,
        sol: MappingSolution | None,
        wall_ns: int,
        cfg: MetricsConfig = MetricsConfig(),
    ) -> None:
        self.arrived += 1
        self.computation_time_ns.append(wall_ns)
        if sol is None:
            return
        self.accepted += 1
        self.cumulative_revenue += revenue(req, sol)
        self.cumulative_cost += cost(req, sol, cfg)
        self.flow_times.append(sol.flow_time(req))
        self.time_gaps.append(time_gaps(req, sol))
