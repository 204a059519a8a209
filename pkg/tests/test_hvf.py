import random

import pytest

from nfms.hvf import hvf_map
from nfms.milp import milp_map
from nfms.model import NetworkState, Rejected, check_feasibility
from nfms.oracle import brute_force, small_instance

from conftest import chain, node


def test_single_function_single_node():
    net = NetworkState([node(0, {1: 15}, pi=40)])
    req = chain((1, 20))
    assert hvf_map(net, req) == milp_map(net, req)


def test_integral_relaxation():
    net = NetworkState([node(0, {1: 15}, pi=30), node(1, {1: 20}), node(2, {2: 9})])
    req = chain((1, 20))
    assert hvf_map(net, req) == milp_map(net, req)
    assert hvf_map(net, req).assignment == (1,)


def test_three_by_three():
    net = NetworkState(
        [node(0, {1: 15, 2: 20, 3: 25}, pi=30), node(1, {1: 25, 2: 10}), node(2, {2: 12, 3: 18}, pi=20)]
    )
    req = chain((1, 20), (2, 20), (3, 20))
    h, m = hvf_map(net, req), milp_map(net, req)
    assert check_feasibility(net, req, h) == []
    assert h.completion_time >= m.completion_time == brute_force(net, req).completion_time


def test_rounds_shrink():
    net = NetworkState([node(j, {1: 15 + j, 2: 20 - j}) for j in range(3)])
    rounds = []
    hvf_map(net, chain((1, 20), (2, 20), (1, 20)), rounds=rounds)
    assert len(rounds) == 3
    assert rounds == sorted(rounds, reverse=True)


def test_rejects_on_impossible_deadline():
    net = NetworkState([node(0, {1: 15}), node(1, {2: 10})])
    with pytest.raises(Rejected):
        hvf_map(net, chain((1, 20), (2, 20), deadline=24))


def test_state_untouched():
    net, req = small_instance(random.Random(3))
    before = net.copy()
    try:
        hvf_map(net, req)
    except Rejected:
        pass
    assert net.nodes == before.nodes


@pytest.mark.parametrize("seed", range(40))
def test_never_beats_milp(seed):
    net, req = small_instance(random.Random(seed))
    try:
        h = hvf_map(net, req)
    except Rejected:
        return
    assert check_feasibility(net, req, h) == []
    assert h.completion_time >= milp_map(net, req).completion_time
    other = hvf_map(net, req, backend="highs")
    assert check_feasibility(net, req, other) == []
