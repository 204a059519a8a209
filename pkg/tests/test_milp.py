import random

import numpy as np
import pytest

from nfms.greedy import GreedyCriterion, greedy_map
from nfms.lp import LpSolution, Status, solve_lp, solve_milp
from nfms.milp import (
    DecodeError,
    MilpLog,
    MilpObjectiveConfig,
    ObjectiveMode,
    build_milp,
    decode,
    milp_map,
)
from nfms.model import NetworkState, Rejected, check_feasibility
from nfms.oracle import brute_force, small_instance

from conftest import chain, node


def _families(prog):
    out = {}
    for con in prog.constraints:
        fam = con.name.rstrip("0123456789_")
        out[fam] = out.get(fam, 0) + 1
    return out


@pytest.mark.parametrize("prune", [True, False])
def test_smallest_program_by_hand(prune):
    net = NetworkState([node(0, {1: 15})])
    prog, v = build_milp(net, chain((1, 20)), prune=prune)
    assert prog.num_vars == 3
    assert sum(prog.binary) == 1
    # one row per family, two link rows, no chain or slot-order rows
    assert _families(prog) == {
        "buffer": 1,
        "capability": 1,
        "position": 1,
        "assign": 1,
        "arrive_t": 1,
        "arrive_tau": 1,
        "queue_t": 1,
        "queue_tau": 1,
        "link_a": 1,
        "link_b": 1,
        "deadline": 1,
    }
    assert len(prog.constraints) == 11


def test_row_counts_grow_with_dimensions():
    net = NetworkState([node(0, {1: 15, 2: 10}), node(1, {1: 20, 2: 12})])
    req = chain((1, 20), (2, 20), (1, 20))
    prog, v = build_milp(net, req, prune=False)
    m, n, k = 3, 2, 3
    assert len(v.xi) == m * n * k
    fam = _families(prog)
    assert fam["chain"] == m - 1
    assert fam["slot_order"] == n * (k - 1)
    assert fam["link_a"] == fam["link_b"] == m * n * k
    assert fam["capability"] == m * n


@pytest.mark.parametrize("prune", [True, False])
def test_missing_capability_is_infeasible(prune):
    net = NetworkState([node(0, {1: 15}), node(1, {1: 20})])
    prog, _ = build_milp(net, chain((1, 20), (2, 20)), prune=prune)
    assert solve_milp(prog).status is Status.INFEASIBLE
    with pytest.raises(Rejected):
        milp_map(net, chain((1, 20), (2, 20)))


def test_busy_node_schedule():
    net = NetworkState([node(0, {1: 15}, pi=40)])
    req = chain((1, 20))
    prog, v = build_milp(net, req)
    sol = solve_milp(prog)
    assert sol.values[v.t[0]] == pytest.approx(55)
    assert sol.objective_value == pytest.approx(55)
    p = decode(sol, v, net, req).placements[0]
    assert (p.node_id, p.start_time, p.completion_time) == (0, 40, 55)


def test_fractional_decode_fails():
    net = NetworkState([node(0, {1: 15}), node(1, {1: 15})])
    req = chain((1, 20))
    prog, v = build_milp(net, req)
    x = np.zeros(prog.num_vars)
    x[v.xi[0, 0, 0]] = x[v.xi[0, 1, 0]] = 0.5
    with pytest.raises(DecodeError):
        decode(LpSolution(Status.OPTIMAL, x, 0.0), v, net, req)
    with pytest.raises(DecodeError):
        decode(LpSolution(Status.INFEASIBLE), v, net, req)


def test_forced_distinct_nodes():
    net = NetworkState([node(0, {1: 15}), node(1, {2: 25})])
    req = chain((1, 20), (2, 20), arrival=3)
    sol = milp_map(net, req)
    assert sol.assignment == (0, 1)
    assert sol.flow_time(req) == 15 + 25


def test_accepts_where_greedy_fails():
    net = NetworkState([node(0, {1: 15, 3: 20}, buffer=30), node(1, {1: 25, 2: 10})])
    req = chain((1, 20), (2, 20), (3, 20))
    with pytest.raises(Rejected):
        greedy_map(net, req, GreedyCriterion.FAST_PROCESSING)
    assert check_feasibility(net, req, milp_map(net, req)) == []


def test_deadline_too_tight():
    net = NetworkState([node(0, {1: 15}, pi=10)])
    with pytest.raises(Rejected):
        milp_map(net, chain((1, 20), deadline=24))
    assert milp_map(net, chain((1, 20), deadline=25)).completion_time == 25


def test_slot_cap():
    net = NetworkState([node(0, {1: 10}), node(1, {1: 30})])
    req = chain((1, 20), (1, 20))
    assert milp_map(net, req).assignment == (0, 0)
    assert milp_map(net, req, positions=1).assignment in {(0, 1), (1, 0)}
    assert brute_force(net, req, positions=1).completion_time == milp_map(net, req, positions=1).completion_time


def test_load_balancing_term_breaks_ties():
    net = NetworkState([node(0, {1: 15}, buffer=40), node(1, {1: 15}, buffer=90)])
    req = chain((1, 20))
    cfg = MilpObjectiveConfig(ObjectiveMode.MULTI_OBJECTIVE, alpha=1.0, lam=5.0)
    assert milp_map(net, req, cfg).assignment == (1,)
    with pytest.raises(ValueError):
        MilpObjectiveConfig(lam=-1)
    with pytest.raises(ValueError):
        MilpObjectiveConfig(small_delta=0)


def test_budget_without_incumbent():
    rng = random.Random(8)
    for _ in range(200):
        net, req = small_instance(rng)
        prog, _ = build_milp(net, req)
        root = solve_lp(prog)
        if root.optimal and solve_milp(prog).nodes > 1:
            break
    log = MilpLog()
    try:
        milp_map(net, req, node_budget=1, log=log)
    except Rejected as exc:
        assert exc.reason == "budget"
    assert log.status is Status.ITERATION_LIMIT
    assert log.nodes == 1


@pytest.mark.parametrize("seed", range(40))
def test_pruning_and_backends_agree(seed):
    net, req = small_instance(random.Random(seed))
    results = []
    for kw in ({}, {"backend": "highs"}):
        try:
            results.append(milp_map(net, req, **kw).completion_time)
        except Rejected:
            results.append(None)
    prog, _ = build_milp(net, req, prune=False)
    full = solve_milp(prog)
    results.append(round(full.objective_value) + req.arrival_time if full.optimal else None)
    assert len(set(results)) == 1
