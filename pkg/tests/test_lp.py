import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nfms.lp import Constraint, LinearProgram, Status, solve_lp, solve_milp


def vertex_oracle(prog: LinearProgram):
    """Best objective over all basic solutions; None if none is feasible."""
    c, A, senses, b, lo, hi = prog.arrays()
    n = len(c)
    planes = [(A[r], b[r]) for r in range(len(b))]
    for j in range(n):
        e = np.eye(n)[j]
        planes += [(e, lo[j]), (e, hi[j])]
    best = None
    for rows in itertools.combinations(range(len(planes)), n):
        M = np.array([planes[r][0] for r in rows])
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, np.array([planes[r][1] for r in rows]))
        if prog.violation(x) > 1e-7:
            continue
        val = float(c @ x + prog.offset)
        best = val if best is None else min(best, val)
    return best


def enumeration_oracle(prog: LinearProgram):
    """Best objective over every 0/1 point of a pure binary program."""
    c = np.asarray(prog.objective, dtype=float)
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=len(c)):
        x = np.array(bits)
        if prog.violation(x) <= 1e-9:
            val = float(c @ x + prog.offset)
            best = val if best is None else min(best, val)
    return best


def random_lp(rng, n=None, m=None):
    n = n or int(rng.integers(2, 7))
    m = m or int(rng.integers(1, 5))
    lo = rng.integers(-3, 1, n).astype(float)
    hi = lo + rng.integers(1, 8, n)
    prog = LinearProgram(list(rng.integers(-6, 7, n).astype(float)), lower=list(lo), upper=list(hi))
    for _ in range(m):
        coefs = {j: float(v) for j, v in enumerate(rng.integers(-5, 6, n)) if v}
        prog.add_constraint(coefs, str(rng.choice(["<=", ">=", "="], p=[0.45, 0.35, 0.2])), float(rng.integers(-8, 12)))
    return prog


def random_binary(rng, b):
    prog = LinearProgram(list(rng.integers(-9, 10, b).astype(float)), upper=[1.0] * b, binary=[True] * b)
    for _ in range(int(rng.integers(1, 5))):
        coefs = {j: float(v) for j, v in enumerate(rng.integers(-4, 7, b)) if v}
        prog.add_constraint(coefs, str(rng.choice(["<=", ">="], p=[0.7, 0.3])), float(rng.integers(0, 3 * b)))
    return prog


def test_single_lower_bound():
    prog = LinearProgram([1.0], lower=[-10.0], upper=[10.0])
    prog.add_constraint({0: 1.0}, ">=", 3.0)
    sol = solve_lp(prog)
    assert sol.status is Status.OPTIMAL
    assert sol.values[0] == pytest.approx(3.0)
    assert sol.objective_value == pytest.approx(3.0)


def test_classic_vertex():
    prog = LinearProgram([-1.0, -1.0], upper=[5.0, 5.0])
    prog.add_constraint({0: 1.0, 1: 1.0}, "<=", 1.0)
    assert solve_lp(prog).objective_value == pytest.approx(-1.0)


def test_infeasible_and_bad_input():
    prog = LinearProgram([1.0], upper=[5.0])
    prog.add_constraint({0: 1.0}, ">=", 6.0)
    assert solve_lp(prog).status is Status.INFEASIBLE
    with pytest.raises(ValueError):
        solve_lp(LinearProgram([1.0]))  # unbounded above
    with pytest.raises(ValueError):
        Constraint({0: 1.0}, "<", 1.0)
    with pytest.raises(ValueError):
        solve_lp(prog, backend="cplex")


def test_iteration_limit():
    prog = random_lp(np.random.default_rng(3), n=6, m=4)
    prog.objective = [-1.0] * 6
    assert solve_lp(prog, max_iterations=0).status in (Status.ITERATION_LIMIT, Status.INFEASIBLE)


def test_offset_and_fixed_columns():
    prog = LinearProgram([2.0, 1.0, 5.0], lower=[0, 0, 2], upper=[4, 4, 2], offset=-7.0)
    prog.add_constraint({0: 1.0, 1: 1.0, 2: 1.0}, ">=", 5.0)
    sol = solve_lp(prog)
    assert sol.objective_value == pytest.approx(3.0 + 10.0 - 7.0)
    assert sol.values[2] == 2.0


@pytest.mark.parametrize("seed", range(100))
def test_simplex_matches_vertex_enumeration(seed):
    prog = random_lp(np.random.default_rng(seed))
    expected = vertex_oracle(prog)
    sol = solve_lp(prog)
    if expected is None:
        assert sol.status is Status.INFEASIBLE
    else:
        assert sol.status is Status.OPTIMAL
        assert sol.objective_value == pytest.approx(expected, abs=1e-6)
        assert prog.violation(sol.values) <= 1e-6


@pytest.mark.parametrize("seed", range(100))
def test_branch_and_bound_matches_enumeration(seed):
    rng = np.random.default_rng(1000 + seed)
    prog = random_binary(rng, int(rng.integers(1, 13)))
    expected = enumeration_oracle(prog)
    sol = solve_milp(prog)
    if expected is None:
        assert sol.status is Status.INFEASIBLE
    else:
        assert sol.status is Status.OPTIMAL
        assert sol.objective_value == pytest.approx(expected, abs=1e-6)
        assert set(np.unique(sol.values)) <= {0.0, 1.0}
        # relaxation bound
        assert solve_lp(prog).objective_value <= sol.objective_value + 1e-6


def test_knapsack():
    values, weights = [10, 13, 7, 8], [5, 6, 3, 4]
    prog = LinearProgram([-v for v in values], upper=[1] * 4, binary=[True] * 4)
    prog.add_constraint(dict(enumerate(weights)), "<=", 10)
    sol = solve_milp(prog)
    assert sol.objective_value == pytest.approx(-21)  # items 1 and 3: 13 + 8 at weight 10
    assert enumeration_oracle(prog) == pytest.approx(-21)


def test_integral_relaxation_needs_one_node():
    prog = LinearProgram([1.0, 1.0], upper=[1, 1], binary=[True, True])
    prog.add_constraint({0: 1.0}, ">=", 1.0)
    sol = solve_milp(prog)
    assert sol.nodes == 1
    assert list(sol.values) == [1.0, 0.0]


def test_contradictory_binary():
    prog = LinearProgram([0.0], upper=[1], binary=[True])
    prog.add_constraint({0: 1.0}, "=", 1.0)
    prog.add_constraint({0: 1.0}, "=", 0.0)
    assert solve_milp(prog).status is Status.INFEASIBLE


def test_node_budget_keeps_incumbent():
    rng = np.random.default_rng(7)
    for _ in range(50):
        prog = random_binary(rng, 12)
        full = solve_milp(prog)
        if full.nodes > 20 and full.optimal:
            break
    short = solve_milp(prog, node_budget=20)
    assert short.status is Status.ITERATION_LIMIT
    assert short.nodes == 20
    if short.values is not None:
        assert short.objective_value >= full.objective_value - 1e-9


@pytest.mark.parametrize("seed", range(25))
def test_mixed_program_agrees_with_highs(seed):
    rng = np.random.default_rng(500 + seed)
    prog = random_lp(rng)
    prog.binary = [bool(v) for v in rng.integers(0, 2, prog.num_vars)]
    for j, flag in enumerate(prog.binary):
        if flag:
            prog.lower[j], prog.upper[j] = 0.0, 1.0
    ours, ref = solve_milp(prog), solve_milp(prog, backend="highs")
    assert ours.status is ref.status
    if ref.optimal:
        assert ours.objective_value == pytest.approx(ref.objective_value, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_optimal_solutions_are_feasible(seed):
    prog = random_lp(np.random.default_rng(seed))
    sol = solve_lp(prog)
    if sol.optimal:
        assert prog.violation(sol.values) <= 1e-6
        ref = solve_lp(prog, backend="highs")
        assert ref.objective_value == pytest.approx(sol.objective_value, abs=1e-6)


def test_lp_format():
    prog = LinearProgram([1.0, -2.0], upper=[1, math.inf], binary=[True, False], offset=-3, names=["a", "b"])
    prog.add_constraint({0: 1.0, 1: 2.5}, "<=", 4, "cap")
    text = prog.to_lp_format()
    assert "obj: a - 2 b - 3 constant" in text
    assert " cap: a + 2.5 b <= 4" in text
    assert "Binaries\n a\n" in text
    assert text.endswith("End\n")


def test_highs_unknown_status_falls_back_to_native(monkeypatch):
    from types import SimpleNamespace

    import nfms.lp

    monkeypatch.setattr(
        nfms.lp, "milp", lambda *a, **k: SimpleNamespace(status=4, x=None, message="model status unknown")
    )
    prog = random_lp(np.random.default_rng(3))
    expected = vertex_oracle(prog)
    for got in (solve_lp(prog, backend="highs"), solve_milp(prog, backend="highs")):
        if expected is None:
            assert got.status is Status.INFEASIBLE
        else:
            assert got.optimal and got.objective_value == pytest.approx(expected, abs=1e-6)
