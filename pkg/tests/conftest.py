import pytest

from nfms.model import FunctionSpec, NetworkState, NodeState, ServiceRequest


def node(nid, rho, buffer=100, pi=0):
    return NodeState(nid, dict(rho), buffer, queue_completion_time=pi)


def chain(*funcs, arrival=0, deadline=1000, sid=0):
    """``funcs`` are (label, buffer demand) pairs."""
    return ServiceRequest(sid, tuple(FunctionSpec(k, d) for k, d in funcs), arrival, deadline)


@pytest.fixture
def two_nodes():
    return NetworkState([node(0, {1: 15, 2: 20}), node(1, {1: 25, 2: 10})])


# criterion number -> (passed, detail); filled in by the acceptance suite
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
