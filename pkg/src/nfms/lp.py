"""Dense bounded-variable primal simplex and binary branch-and-bound.

Programs are minimisation problems with finite variable bounds. The
simplex keeps a full tableau in numpy, scaled by powers of two and
refactored periodically. Entering variables follow Dantzig's rule; the
ratio test is Harris's two-pass test, switching to a lexicographic rule on
runs of degenerate pivots, which rules out cycling.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.linalg.blas import dger as _dger
from scipy.optimize import Bounds, LinearConstraint, milp

FEAS_TOL = 1e-6
INT_TOL = 1e-6
_PIVOT_TOL = 1e-6
_PRIMAL_TOL = 1e-9
_COST_TOL = 1e-9
_DEGENERATE_RUN = 30
_REFACTOR_EVERY = 100


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class Constraint:
    coefs: Mapping[int, float]
    sense: str  # "<=", ">=", "="
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "="):
            raise ValueError(f"bad relation {self.sense!r}")


@dataclass
class LinearProgram:
    """``min objective @ x + offset`` over rows and per-variable bounds."""

    objective: list[float]
    constraints: list[Constraint] = field(default_factory=list)
    lower: list[float] | None = None
    upper: list[float] | None = None
    binary: list[bool] | None = None
    offset: float = 0.0
    names: list[str] | None = None

    def __post_init__(self):
        n = len(self.objective)
        self.lower = [0.0] * n if self.lower is None else list(self.lower)
        self.upper = [math.inf] * n if self.upper is None else list(self.upper)
        self.binary = [False] * n if self.binary is None else list(self.binary)
        if not len(self.lower) == len(self.upper) == len(self.binary) == n:
            raise ValueError("bounds and integrality must match the objective width")
        for j in range(n):
            if self.binary[j] and not (0 <= self.lower[j] and self.upper[j] <= 1):
                raise ValueError(f"binary variable {j} has bounds outside [0, 1]")
        for con in self.constraints:
            self._check_row(con)

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    def _check_row(self, con: Constraint):
        if any(not 0 <= j < self.num_vars for j in con.coefs):
            raise ValueError(f"constraint {con.name or '?'} references a missing column")

    def add_constraint(self, coefs: Mapping[int, float], sense: str, rhs: float, name: str = ""):
        con = Constraint(dict(coefs), sense, float(rhs), name)
        self._check_row(con)
        self.constraints.append(con)

    def arrays(self):
        n = self.num_vars
        A = np.zeros((len(self.constraints), n))
        for r, con in enumerate(self.constraints):
            for j, v in con.coefs.items():
                A[r, j] += v
        senses = np.array([c.sense for c in self.constraints], dtype=object)
        b = np.array([c.rhs for c in self.constraints], dtype=float)
        return (
            np.asarray(self.objective, dtype=float),
            A,
            senses,
            b,
            np.asarray(self.lower, dtype=float),
            np.asarray(self.upper, dtype=float),
        )

    def violation(self, x: Sequence[float]) -> float:
        """Largest absolute violation of any row or bound by ``x``."""
        _, A, senses, b, lo, hi = self.arrays()
        x = np.asarray(x, dtype=float)
        worst = float(max(np.max(lo - x, initial=0.0), np.max(x - hi, initial=0.0)))
        if len(b):
            ax = A @ x
            for s, lhs, rhs in zip(senses, ax, b):
                if s == "<=":
                    worst = max(worst, lhs - rhs)
                elif s == ">=":
                    worst = max(worst, rhs - lhs)
                else:
                    worst = max(worst, abs(lhs - rhs))
        return worst

    def to_lp_format(self) -> str:
        """Render in the plain-text CPLEX LP file format."""
        names = self.names or [f"x{j}" for j in range(self.num_vars)]

        def expr(coefs):
            parts = []
            for j, v in coefs:
                if v == 0:
                    continue
                sign = "-" if v < 0 else "+"
                mag = abs(v)
                parts.append(f"{sign} {names[j]}" if mag == 1 else f"{sign} {mag:g} {names[j]}")
            if not parts:
                return "0 " + names[0] if names else "0"
            text = " ".join(parts)
            return text[2:] if text.startswith("+ ") else text

        lines = ["\\ generated by nfms", "Minimize", " obj: " + expr(enumerate(self.objective))]
        if self.offset:
            lines[-1] += f" {'-' if self.offset < 0 else '+'} {abs(self.offset):g} constant"
        lines.append("Subject To")
        for r, con in enumerate(self.constraints):
            label = con.name or f"c{r}"
            lines.append(f" {label}: {expr(sorted(con.coefs.items()))} {con.sense} {con.rhs:g}")
        lines.append("Bounds")
        if self.offset:
            lines.append(" constant = 1")
        for j in range(self.num_vars):
            lo, hi = self.lower[j], self.upper[j]
            hi_s = "+inf" if math.isinf(hi) else f"{hi:g}"
            lines.append(f" {lo:g} <= {names[j]} <= {hi_s}")
        bins = [names[j] for j in range(self.num_vars) if self.binary[j]]
        if bins:
            lines.append("Binaries")
            lines.append(" " + " ".join(bins))
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: Status
    values: np.ndarray | None = None
    objective_value: float = math.nan
    iterations: int = 0
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


BACKENDS = ("native", "highs")


def solve_lp(prog: LinearProgram, max_iterations: int = 50_000, backend: str = "native") -> LpSolution:
    """Solve the continuous relaxation of ``prog`` (binary flags ignored)."""
    if backend == "highs":
        res = _highs(prog, integral=False)
        if res is not None:
            return res
    else:
        _check_backend(backend)
    # native engine, also the fallback when HiGHS gives up numerically
    c, A, senses, b, lo, hi = prog.arrays()
    return _solve_arrays(c, A, senses, b, lo, hi, prog.offset, max_iterations)


def _check_backend(backend: str) -> None:
    if backend not in BACKENDS:
        raise ValueError(f"unknown LP backend {backend!r}; choose from {', '.join(BACKENDS)}")


def _highs(prog: LinearProgram, integral: bool, node_limit: int | None = None) -> LpSolution | None:
    """Delegate to the HiGHS solver shipped with scipy.

    Returns None when HiGHS ends without a usable status (it reports
    "model status unknown" on some badly scaled big-M programs).
    """
    c, A, senses, b, lo, hi = prog.arrays()
    lb = np.where(senses == "<=", -np.inf, b).astype(float)
    ub = np.where(senses == ">=", np.inf, b).astype(float)
    cons = [LinearConstraint(A, lb, ub)] if len(b) else []
    integrality = np.asarray(prog.binary, dtype=int) if integral else np.zeros(len(c), dtype=int)
    options = {"mip_rel_gap": 0.0}
    if node_limit is not None:
        options["node_limit"] = node_limit
    res = milp(c, constraints=cons, integrality=integrality, bounds=Bounds(lo, hi), options=options)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 2:
        return LpSolution(Status.INFEASIBLE, nodes=nodes)
    if res.status == 3:
        return LpSolution(Status.UNBOUNDED, nodes=nodes)
    if res.x is None:
        if res.status == 1:
            return LpSolution(Status.ITERATION_LIMIT, nodes=nodes)
        return None
    x = np.asarray(res.x, dtype=float)
    if integral:
        binary = np.asarray(prog.binary, dtype=bool)
        x[binary] = np.round(x[binary])
    status = Status.OPTIMAL if res.status == 0 else Status.ITERATION_LIMIT
    return LpSolution(status, x, float(c @ x + prog.offset), nodes=nodes)


def _solve_arrays(c, A, senses, b, lo, hi, offset, max_iterations) -> LpSolution:
    n = len(c)
    if np.any(np.isinf(lo)) or np.any(np.isinf(hi)):
        raise ValueError("every variable needs finite bounds")
    if np.any(hi < lo - FEAS_TOL):
        return LpSolution(Status.INFEASIBLE)

    free = hi - lo > FEAS_TOL
    x = lo.copy()
    x[~free] = np.clip(lo[~free], lo[~free], np.maximum(lo[~free], hi[~free]))
    # shift to x = lo + y, 0 <= y <= u, and fold fixed columns into the rhs
    rhs = b - A @ x if len(b) else b.copy()
    cols = np.flatnonzero(free)
    Af = A[:, cols]
    u = hi[cols] - lo[cols]
    cf = c[cols]

    # rows with no free column only need a feasibility check
    live = np.any(np.abs(Af) > 0, axis=1) if len(b) else np.zeros(0, dtype=bool)
    for r in np.flatnonzero(~live):
        s, v = senses[r], rhs[r]
        if (s == "<=" and v < -FEAS_TOL) or (s == ">=" and v > FEAS_TOL) or (s == "=" and abs(v) > FEAS_TOL):
            return LpSolution(Status.INFEASIBLE)
    Af, rhs, senses = Af[live], rhs[live], senses[live]

    if len(cols) == 0:
        return LpSolution(Status.OPTIMAL, x, float(c @ x + offset))

    y, iters, status = _simplex(cf, Af, senses, rhs, u, max_iterations)
    if status is not Status.OPTIMAL:
        return LpSolution(status, iterations=iters)
    x[cols] = lo[cols] + y
    return LpSolution(Status.OPTIMAL, x, float(c @ x + offset), iters)


def _simplex(c, A, senses, b, u, max_iterations):
    """Two-phase bounded simplex on ``min c y, A y (senses) b, 0 <= y <= u``."""
    m, n = A.shape
    # equilibrate: rows, then columns, by powers of two so scaling is exact
    rs = _pow2(np.abs(A).max(axis=1, initial=0.0))
    A = A / rs[:, None]
    b = b / rs
    cs = _pow2(np.abs(A).max(axis=0, initial=0.0))
    A = A / cs[None, :]
    u0, u = u, u * cs
    c = c / cs

    slack_coef = np.array([1.0 if s == "<=" else -1.0 if s == ">=" else 0.0 for s in senses])
    # flip rows so the rhs is non-negative; a ">= 0" row flips too, which
    # lets its slack start in the basis instead of an artificial
    sign = np.where((b < 0) | ((b == 0) & (slack_coef < 0)), -1.0, 1.0)
    slack_rows = np.flatnonzero(slack_coef != 0)
    n_slack = len(slack_rows)
    slack_after = slack_coef * sign  # coefficient once the row is normalised
    art_rows = np.array([r for r in range(m) if slack_after[r] != 1.0], dtype=int)
    n_art = len(art_rows)
    N = n + n_slack + n_art

    T0 = np.zeros((m, N), order="F")
    T0[:, :n] = A * sign[:, None]
    T0[slack_rows, n + np.arange(n_slack)] = slack_after[slack_rows]
    T0[art_rows, n + n_slack + np.arange(n_art)] = 1.0
    b0 = b * sign

    slack_col = {r: n + k for k, r in enumerate(slack_rows)}
    art_col = {r: n + n_slack + k for k, r in enumerate(art_rows)}
    tab = _Tableau(T0, b0, np.array([art_col.get(r, slack_col.get(r, -1)) for r in range(m)], dtype=int))
    tab.ub = np.concatenate([u, np.full(n_slack + n_art, np.inf)])
    iters = 0

    if n_art:
        c1 = np.zeros(N)
        c1[n + n_slack :] = 1.0
        status, iters = _iterate(tab, c1, max_iterations, iters)
        if status is not Status.OPTIMAL:
            return None, iters, status
        if tab.primal()[n + n_slack :].sum() > FEAS_TOL * max(1.0, np.abs(b0).max(initial=0.0)):
            return None, iters, Status.INFEASIBLE
        tab.ub[n + n_slack :] = 0.0
        tab.enterable[n + n_slack :] = False

    c2 = np.zeros(N)
    c2[:n] = c
    status, iters = _iterate(tab, c2, max_iterations, iters)
    if status is not Status.OPTIMAL:
        return None, iters, status
    y = tab.primal()[:n] / cs
    return np.clip(y, 0.0, u0), iters, Status.OPTIMAL


def _pow2(scale):
    scale = np.where(scale > 0, scale, 1.0)
    return np.exp2(np.round(np.log2(scale)))


class _Tableau:
    """Dense tableau ``B^-1 [A I]`` plus the values of the basic variables."""

    def __init__(self, T0, b0, basis):
        self.T0 = T0
        self.b0 = b0
        self.T = T0.copy(order="F")
        self.xB = b0.copy()
        self.basis = basis
        self.start = basis.copy()  # identity columns of the starting basis
        N = T0.shape[1]
        self.ub = np.full(N, np.inf)
        self.at_upper = np.zeros(N, dtype=bool)
        self.enterable = np.ones(N, dtype=bool)

    def primal(self):
        y = np.where(self.at_upper, self.ub, 0.0)
        y[~np.isfinite(y)] = 0.0
        y[self.basis] = self.xB
        return y

    def refactor(self) -> bool:
        """Recompute the tableau from the original rows, shedding drift.

        Returns False, leaving the tableau as it was, if the basis matrix is
        numerically singular.
        """
        up = self.at_upper & np.isfinite(self.ub)
        rhs = self.b0 - self.T0[:, up] @ self.ub[up]
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            try:
                lu = lu_factor(self.T0[:, self.basis], check_finite=False)
            except LinAlgWarning:
                return False
        self.T[...] = lu_solve(lu, self.T0, check_finite=False)
        self.xB[...] = lu_solve(lu, rhs, check_finite=False)
        return True


def _iterate(tab: _Tableau, cost, max_iterations, iters):
    T, xB, basis, at_upper, ub = tab.T, tab.xB, tab.basis, tab.at_upper, tab.ub
    m, N = T.shape
    is_basic = np.zeros(N, dtype=bool)
    is_basic[basis] = True
    d = cost - T.T @ cost[basis]
    degenerate = 0
    since_refactor = 0
    while True:
        if iters >= max_iterations:
            return Status.ITERATION_LIMIT, iters
        eligible = tab.enterable & ~is_basic & np.where(at_upper, d > _COST_TOL, d < -_COST_TOL)
        idx = np.flatnonzero(eligible)
        if idx.size == 0:
            if since_refactor == 0:
                return Status.OPTIMAL, iters
            # confirm optimality on a freshly factored basis
            since_refactor = 0
            if tab.refactor():
                d = cost - T.T @ cost[basis]
            continue
        lex = degenerate >= _DEGENERATE_RUN
        j = int(idx[np.argmax(np.abs(d[idx]))])
        direction = -1.0 if at_upper[j] else 1.0

        col = T[:, j]
        alpha = direction * col
        leave, theta, to_upper = _ratio_test(alpha, xB, ub, basis, ub[j], T[:, tab.start] if lex else None)
        if math.isinf(theta):
            return Status.UNBOUNDED, iters
        iters += 1
        since_refactor += 1
        degenerate = degenerate + 1 if theta <= _PIVOT_TOL else 0

        xB -= theta * alpha
        if leave < 0:
            # bound flip, no basis change
            at_upper[j] = not at_upper[j]
            continue
        entering_value = (ub[j] if at_upper[j] else 0.0) + direction * theta
        out = basis[leave]
        at_upper[out] = to_upper
        is_basic[out] = False
        at_upper[j] = False
        is_basic[j] = True
        basis[leave] = j
        xB[leave] = entering_value

        T[leave] /= T[leave, j]
        col = col.copy()
        col[leave] = 0.0
        _rank1_update(T, col, T[leave].copy())
        d -= d[j] * T[leave]
        if since_refactor >= _REFACTOR_EVERY and tab.refactor():
            d = cost - T.T @ cost[basis]
            since_refactor = 0


def _rank1_update(T, col, row):
    # T -= outer(col, row), in place; BLAS needs Fortran order to avoid a copy
    out = _dger(-1.0, col, row, a=T, overwrite_a=True)
    if out is not T:
        T[...] = out


def _ratio_test(alpha, xB, ub, basis, step_cap, inverse=None):
    """Choose the leaving row: ``(leave, theta, to_upper)``.

    Normally a Harris two-pass test: the first pass finds the longest step
    allowed when every bound is relaxed by ``_PRIMAL_TOL``, the second
    picks the largest pivot among rows blocking within that step. During a
    run of degenerate pivots ``inverse`` (the current basis inverse) is
    passed instead, and ties on the exact ratio are broken
    lexicographically, which rules out cycling. ``leave`` is -1 when the
    entering variable reaches its own bound first.
    """
    ubB = ub[basis]
    dec = alpha > _PIVOT_TOL
    inc = (alpha < -_PIVOT_TOL) & np.isfinite(ubB)
    rows = np.flatnonzero(dec | inc)
    if rows.size == 0:
        return -1, step_cap, False
    a = alpha[rows]
    room = np.where(a > 0, xB[rows], ubB[rows] - xB[rows])
    mag = np.abs(a)
    exact = np.maximum(room, 0.0) / mag
    if inverse is not None:
        best = exact.min()
        if step_cap <= best:
            return -1, step_cap, False
        ties = np.flatnonzero(exact <= best + 1e-12)
        if ties.size > 1:
            keys = inverse[rows[ties]] / a[ties, None]
            k = ties[np.lexsort(keys.T[::-1])[0]]
        else:
            k = ties[0]
    else:
        relaxed = (np.maximum(room, 0.0) + _PRIMAL_TOL) / mag
        cap = relaxed.min()
        if step_cap <= cap:
            return -1, step_cap, False
        within = np.flatnonzero(exact <= cap)
        k = within[np.argmax(mag[within])]
    r = int(rows[k])
    return r, float(exact[k]), bool(a[k] < 0)


def solve_milp(
    prog: LinearProgram,
    node_budget: int = 1_000_000,
    max_lp_iterations: int = 50_000,
    backend: str = "native",
) -> LpSolution:
    """Depth-first branch-and-bound over the binary columns of ``prog``.

    Branches on the most fractional binary, exploring the 1-branch first.
    When the node budget runs out the best incumbent is returned with
    ``ITERATION_LIMIT`` status (values ``None`` if there is none).
    The ``highs`` backend hands the whole program to HiGHS with the same
    node budget and a zero optimality gap.
    """
    if backend == "highs":
        res = _highs(prog, integral=True, node_limit=node_budget)
        if res is not None:
            return res
    else:
        _check_backend(backend)
    c, A, senses, b, lo0, hi0 = prog.arrays()
    binary = np.asarray(prog.binary, dtype=bool)
    best: LpSolution | None = None
    best_obj = math.inf
    stack = [(lo0, hi0)]
    nodes = 0
    lp_iters = 0
    exhausted = False
    while stack:
        if nodes >= node_budget:
            exhausted = True
            break
        lo, hi = stack.pop()
        nodes += 1
        sol = _solve_arrays(c, A, senses, b, lo, hi, prog.offset, max_lp_iterations)
        lp_iters += sol.iterations
        if sol.status is Status.ITERATION_LIMIT:
            exhausted = True
            continue
        if sol.status is not Status.OPTIMAL:
            continue
        if sol.objective_value >= best_obj - FEAS_TOL * max(1.0, abs(best_obj)):
            continue
        x = sol.values
        frac = np.abs(x - np.round(x))
        frac[~binary] = 0.0
        if frac.max(initial=0.0) <= INT_TOL:
            x = x.copy()
            x[binary] = np.round(x[binary])
            best = LpSolution(Status.OPTIMAL, x, float(c @ x + prog.offset))
            best_obj = best.objective_value
            continue
        # most fractional: distance from 0.5, lowest index on ties
        j = int(np.argmin(np.where(frac > INT_TOL, np.abs(x - np.floor(x) - 0.5), np.inf)))
        down_hi = hi.copy()
        down_hi[j] = 0.0
        up_lo = lo.copy()
        up_lo[j] = 1.0
        stack.append((lo, down_hi))
        stack.append((up_lo, hi))

    if exhausted:
        if best is None:
            return LpSolution(Status.ITERATION_LIMIT, iterations=lp_iters, nodes=nodes)
        best.status = Status.ITERATION_LIMIT
    elif best is None:
        return LpSolution(Status.INFEASIBLE, iterations=lp_iters, nodes=nodes)
    best.iterations = lp_iters
    best.nodes = nodes
    return best
