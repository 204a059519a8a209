import pytest

from nfms.metrics import MetricsConfig, RunMetrics, confidence_summary, cost, queue_length, revenue, time_gaps
from nfms.model import FunctionPlacement, MappingSolution, NetworkState, commit, release, schedule_assignment
from nfms.scenario import ScenarioConfig
from nfms.sim import run

from conftest import chain, node


def _sol(*spans, node_id=0):
    return MappingSolution(0, tuple(FunctionPlacement(i, node_id, s, c) for i, (s, c) in enumerate(spans)))


def test_revenue():
    req = chain((1, 20), (2, 30))
    assert revenue(req, _sol((0, 15), (15, 35))) == 85
    assert revenue(chain((1, 25)), _sol((0, 15))) == 40


def test_cost():
    req = chain((1, 20), (2, 30))
    assert cost(req, _sol((0, 15), (15, 35))) == pytest.approx(17)
    assert cost(req, _sol((0, 15), (15, 35))) > 0.2 * 50
    assert cost(req, _sol((0, 15), (15, 35)), MetricsConfig(theta=1, varrho=0)) == 50


def test_gap_costs_but_earns_nothing():
    req = chain((1, 20), (2, 30))
    tight, loose = _sol((0, 15), (15, 35)), _sol((0, 15), (25, 45))
    assert revenue(req, tight) == revenue(req, loose)
    assert cost(req, loose) - cost(req, tight) == pytest.approx(0.2 * 10)


def test_time_gaps():
    assert time_gaps(chain((1, 20), (2, 20)), _sol((0, 15), (15, 35))) == 0
    assert time_gaps(chain((1, 20), arrival=4), _sol((6, 21))) == 6 - 4
    req = chain((1, 20), (1, 20), (1, 20))
    assert time_gaps(req, _sol((0, 10), (17, 27), (30, 40))) == 10


def test_queue_length():
    net = NetworkState([node(0, {1: 15, 2: 20})])
    assert queue_length(net) == 0
    req = chain((1, 20), (2, 20))
    commit(net, req, schedule_assignment(net, req, [0, 0]))
    assert queue_length(net) == 35
    release(net, 0)
    assert queue_length(net) == 0


def test_confidence_summary():
    assert confidence_summary([0.4] * 5) == (pytest.approx(0.4), 0.0, 0.0)
    mean, sd, half = confidence_summary([0, 1])
    assert mean == 0.5
    assert sd == pytest.approx(0.70711, abs=1e-5)
    assert half == pytest.approx(0.980, abs=1e-3)
    with pytest.raises(ValueError):
        confidence_summary([1.0])


def test_run_metrics_counts():
    m = RunMetrics()
    assert m.acceptance_ratio == 0.0
    req = chain((1, 20))
    m.record(req, None, 5)
    m.record(req, _sol((0, 15)), 7)
    assert (m.arrived, m.accepted, m.acceptance_ratio) == (2, 1, 0.5)
    assert m.cumulative_revenue == 35
    assert m.computation_time_ns == [5, 7]


def test_gba_spread_matches_published_scale():
    # published: +-0.0285 over 20 runs; same order of magnitude expected
    ratios = [run(ScenarioConfig.desk_scale(seed=s), "GBA").metrics.acceptance_ratio for s in range(20)]
    _, _, half = confidence_summary(ratios)
    assert 0.00285 < half < 0.285
