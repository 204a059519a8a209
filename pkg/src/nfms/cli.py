"""Command-line harness: simulation runs, deadline sweeps and small-instance checks."""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .greedy import GreedyCriterion, greedy_map
from .hvf import hvf_map
from .lp import BACKENDS
from .milp import MilpObjectiveConfig, build_milp, milp_map
from .metrics import confidence_summary
from .model import NetworkState, Rejected, check_feasibility
from .oracle import BudgetExceeded, brute_force
from .scenario import ScenarioConfig, node_from_record, request_from_record
from .sim import SOLVERS, SimulationTrace, SolverOptions, run
from .tabu import TabuConfig, tabu_search


class UsageError(Exception):
    pass


def _csv_list(text: str, cast=str) -> list:
    items = [x.strip() for x in text.split(",") if x.strip()]
    if not items:
        raise UsageError(f"empty list: {text!r}")
    return [cast(x) for x in items]


def _load_config(path: str) -> ScenarioConfig:
    try:
        return ScenarioConfig.load(path)
    except FileNotFoundError:
        raise UsageError(f"config not found: {path}") from None
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config {path}: {exc}") from None


def _options(args, seed: int) -> SolverOptions:
    return SolverOptions(
        tabu=TabuConfig(max_iterations=args.tabu_kappa),
        milp_node_budget=args.milp_node_budget,
        seed=seed,
        lp_backend=args.lp_backend,
    )


def _one_run(job):
    cfg, solver, opts = job
    return run(cfg, solver, opts)


def _run_all(jobs, workers: int) -> list[SimulationTrace]:
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_one_run, jobs))
    return [_one_run(j) for j in jobs]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
            n += 1
    return n


def write_outputs(traces: list[SimulationTrace], out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)
    for tr in traces:
        (out / "traces" / f"{tr.solver}_seed{tr.seed}.jsonl").write_text(tr.to_jsonl())

    def per_arrival(fn):
        for tr in traces:
            state = {}
            for k, rec in enumerate(tr.records, 1):
                yield [tr.solver, tr.seed, k] + fn(rec, state)

    def running_mean(field):
        def fn(rec, state):
            v = getattr(rec, field)
            if v is not None:
                state["n"] = state.get("n", 0) + 1
                state["s"] = state.get("s", 0) + v
            return [state["s"] / state["n"] if state.get("n") else None]

        return fn

    def queue(rec, state):
        state["c"] = state.get("c", 0) + rec.queue_length
        return [rec.arrival_time, rec.queue_length, state["c"]]

    key = ["solver", "seed", "arrival"]
    _write_csv(out / "acceptance.csv", key + ["acceptance_ratio"],
               per_arrival(lambda r, s: [r.acceptance_ratio]))
    _write_csv(out / "time_gaps.csv", key + ["avg_time_gap"], per_arrival(running_mean("time_gap")))
    _write_csv(out / "flow_time.csv", key + ["avg_flow_time"], per_arrival(running_mean("flow_time")))
    _write_csv(out / "queue_length.csv", key + ["time", "queue_length", "cumulative_queue_length"],
               per_arrival(queue))
    _write_csv(out / "cost_revenue.csv", key + ["cumulative_cost", "cumulative_revenue"],
               per_arrival(lambda r, s: [r.cumulative_cost, r.cumulative_revenue]))
    _write_csv(
        out / "computation_time.csv",
        ["solver", "seed", "request_id", "wall_ns"],
        ([tr.solver, tr.seed, rec.request_id, ns] for tr in traces for rec, ns in zip(tr.records, tr.wall_ns)),
    )

    summary = []
    for tr in traces:
        m = tr.metrics
        summary.append([
            tr.solver, tr.seed, m.arrived, m.accepted, m.acceptance_ratio,
            statistics.fmean(m.flow_times) if m.flow_times else None,
            statistics.fmean(m.time_gaps) if m.time_gaps else None,
            m.cumulative_cost, m.cumulative_revenue,
            sum(r.budget_exhausted for r in tr.records),
        ])
    _write_csv(out / "summary.csv",
               ["solver", "seed", "arrived", "accepted", "acceptance_ratio", "mean_flow_time",
                "mean_time_gap", "cumulative_cost", "cumulative_revenue", "budget_exhausted"],
               summary)
    _write_csv(out / "computation_summary.csv",
               ["solver", "seed", "median_ns", "mean_ns", "total_ns"],
               ([tr.solver, tr.seed, int(statistics.median(tr.wall_ns)), statistics.fmean(tr.wall_ns),
                 sum(tr.wall_ns)] for tr in traces if tr.wall_ns))

    by_solver: dict[str, list[SimulationTrace]] = {}
    for tr in traces:
        by_solver.setdefault(tr.solver, []).append(tr)
    if all(len(v) >= 2 for v in by_solver.values()):
        header = ["solver", "mean", "std_dev", "ci95"]
        _write_csv(out / "confidence_acceptance.csv", header,
                   ([s, *confidence_summary([t.metrics.acceptance_ratio for t in ts])]
                    for s, ts in by_solver.items()))
        _write_csv(out / "confidence_computation_time.csv", header,
                   ([s, *confidence_summary([statistics.fmean(t.wall_ns) for t in ts])]
                    for s, ts in by_solver.items()))


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    solvers = _csv_list(args.solvers)
    for s in solvers:
        if s not in SOLVERS:
            raise UsageError(f"unknown solver {s!r}; choose from {','.join(SOLVERS)}")
    seeds = _csv_list(args.seeds, int) if args.seeds else [cfg.seed]
    jobs = [(cfg.replace(seed=seed), s, _options(args, seed)) for s in solvers for seed in seeds]
    traces = _run_all(jobs, args.jobs)
    write_outputs(traces, Path(args.out))
    for tr in traces:
        print(f"{tr.solver:5s} seed={tr.seed:<4d} acceptance={tr.metrics.acceptance_ratio:.4f}")
    return 0


def cmd_sweep_deadline(args) -> int:
    if args.step <= 0:
        raise UsageError("--step must be positive")
    if args.min < 0 or args.max < args.min:
        raise UsageError("need 0 <= --min <= --max")
    cfg = _load_config(args.config)
    if args.solver not in SOLVERS:
        raise UsageError(f"unknown solver {args.solver!r}")
    seeds = _csv_list(args.seeds, int) if args.seeds else [cfg.seed]
    deadlines = list(range(args.min, args.max + 1, args.step))
    jobs = [
        (cfg.replace(seed=seed, deadline_range=(d, d)), args.solver, _options(args, seed))
        for d in deadlines
        for seed in seeds
    ]
    traces = _run_all(jobs, args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, d in enumerate(deadlines):
        ratios = [t.metrics.acceptance_ratio for t in traces[k * len(seeds):(k + 1) * len(seeds)]]
        rows.append([d, args.solver, statistics.fmean(ratios)])
    _write_csv(out / f"deadline_sweep_{args.solver}.csv", ["deadline", "solver", "acceptance_ratio"], rows)
    for d, _, r in rows:
        print(f"deadline={d:<6d} acceptance={r:.4f}")
    return 0


def load_instance(path: str):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"instance not found: {path}") from None
    net = NetworkState([node_from_record(r) for r in data["nodes"]])
    return net, request_from_record(data["request"])


def cmd_verify(args) -> int:
    net, req = load_instance(args.instance)
    if args.dump_lp:
        prog, _ = build_milp(net, req, MilpObjectiveConfig())
        Path(args.dump_lp).write_text(prog.to_lp_format())
    try:
        oracle = brute_force(net, req, budget=args.budget)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Rejected:
        oracle = None

    solvers = {
        "GFP": lambda: greedy_map(net, req, GreedyCriterion.FAST_PROCESSING),
        "GLL": lambda: greedy_map(net, req, GreedyCriterion.LEAST_LOADED),
        "GBA": lambda: greedy_map(net, req, GreedyCriterion.BEST_AVAILABILITY),
        "TS": lambda: tabu_search(net, req, TabuConfig(max_iterations=args.tabu_kappa), args.seed),
        "HVF": lambda: hvf_map(net, req, backend=args.lp_backend),
        "MILP": lambda: milp_map(net, req, node_budget=args.milp_node_budget, backend=args.lp_backend),
    }
    flows = {}
    print(f"{'oracle':6s} " + ("rejected" if oracle is None else f"flow_time={oracle.flow_time(req)}"))
    for name, solve in solvers.items():
        try:
            sol = solve()
        except Rejected as exc:
            flows[name] = None
            print(f"{name:6s} rejected ({exc.reason})")
            continue
        if check_feasibility(net, req, sol):
            print(f"{name:6s} INFEASIBLE solution", file=sys.stderr)
            return 1
        flows[name] = sol.flow_time(req)
        print(f"{name:6s} flow_time={flows[name]} nodes={list(sol.assignment)}")

    problems = []
    best = None if oracle is None else oracle.flow_time(req)
    if flows["MILP"] != best:
        problems.append(f"MILP {flows['MILP']} != oracle {best}")
    for name, f in flows.items():
        if f is not None and (best is None or f < best):
            problems.append(f"{name} beats the optimum ({f} < {best})")
    if problems:
        print("dominance: FAIL; " + "; ".join(problems))
        return 1
    print("dominance: ok (MILP optimal, every heuristic >= MILP)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nfms", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--milp-node-budget", type=int, default=100_000)
        p.add_argument("--tabu-kappa", type=int, default=500)
        p.add_argument(
            "--lp-backend", choices=BACKENDS, default="highs",
            help="LP/MILP engine for HVF and MILP (native: the built-in simplex)",
        )

    p = sub.add_parser("run", help="simulate solvers over seeded scenarios")
    p.add_argument("--config", required=True)
    p.add_argument("--solvers", default=",".join(SOLVERS))
    p.add_argument("--seeds", default=None, help="comma-separated; default: the config seed")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-deadline", help="final acceptance ratio against a fixed deadline")
    p.add_argument("--config", required=True)
    p.add_argument("--min", type=int, default=0)
    p.add_argument("--max", type=int, default=20_000)
    p.add_argument("--step", type=int, default=1_000)
    p.add_argument("--solver", required=True)
    p.add_argument("--seeds", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_sweep_deadline)

    p = sub.add_parser("verify", help="all solvers plus exhaustive search on one instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--budget", type=int, default=100_000, help="max assignments to enumerate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-lp", default=None, help="also write the MILP in LP format here")
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nfms: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
