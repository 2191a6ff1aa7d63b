"""Command-line entry points.

Subcommands::

    icplan solve    INSTANCE [--method flow|powerset|adaptive] [--out PLAN]
    icplan verify   INSTANCE PLAN
    icplan cluster  INSTANCE [--k K] [--out JSON] [--dot-out DOT]
    icplan explore  [--instance WORLD | --seed N] [--out LOG]
    icplan bench    [--methods ...] [--n-range 4:16:2] [--out CSV]

Exit codes: 0 success, 1 infeasible, 2 verification failure, 3 solver or
input error, 4 exploration stall / cycle limit.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

from . import baselines, verify
from .cluster import cluster_instance, clusters_to_dot
from .errors import GuardExceeded, IcplanError
from .explore import MAX_CYCLES, T_MAX, run_exploration
from .ilp import assemble
from .instances import exploration_world, line_instance
from .io import load_exploration, load_instance
from .network import to_dot
from .solver import export_lp, solve_problem

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_VERIFICATION = 2
EXIT_ERROR = 3
EXIT_STALL = 4


def _load_spec(path: str):
    net, spec, _ = load_instance(path)
    if spec is None:
        raise IcplanError(f"{path} has no 'problem' section to solve")
    return net, spec


def _write(path: str, text: str):
    with open(path, "w") as fh:
        fh.write(text)


def _cmd_solve(args) -> int:
    net, spec = _load_spec(args.instance)
    if args.lp_out:
        _write(args.lp_out, export_lp(assemble(spec)))
        print(f"wrote {args.lp_out}")
    if args.dot_out:
        _write(args.dot_out, to_dot(net))
        print(f"wrote {args.dot_out}")
    if args.method == "flow":
        model, result, plan = solve_problem(spec, backend=args.backend,
                                            time_limit=args.time_limit,
                                            gap=args.gap)
    else:
        solver = (baselines.solve_powerset if args.method == "powerset"
                  else baselines.solve_adaptive_powerset)
        run = solver(spec, backend=args.backend, time_limit=args.time_limit)
        result, plan = run.result, run.plan
        print(f"rounds={run.rounds} cuts={run.cuts_added}")
    obj = "-" if result.objective is None else f"{result.objective:.6g}"
    print(f"status={result.status} objective={obj} "
          f"wall={result.wall_time:.2f}s backend={result.backend}")
    if plan is not None and args.out:
        verify.save_solution(plan, args.out)
        print(f"wrote {args.out}")
    if plan is not None:
        return EXIT_OK
    return EXIT_INFEASIBLE if result.status == "infeasible" else EXIT_ERROR


def _cmd_verify(args) -> int:
    _, spec = _load_spec(args.instance)
    plan = verify.load_solution(args.solution)
    violations = list(verify.check_dynamics(plan, spec))
    violations += verify.check_flows(plan, spec)
    if spec.information_consistent:
        violations += verify.check_consistency(plan, spec)
    if spec.src and spec.snk:
        report = verify.information_reachability(plan, spec,
                                                 events=args.events)
        violations += [f"undelivered source {i} -> sink {j}"
                       for (i, j) in report.unreachable()]
    for line in violations:
        print(f"violation: {line}")
    print("verification: " + ("ok" if not violations
                              else f"{len(violations)} violation(s)"))
    return EXIT_OK if not violations else EXIT_VERIFICATION


def _cmd_cluster(args) -> int:
    from pathlib import Path

    from .io import load_agents

    net, spec, _ = load_instance(args.instance)
    if spec is not None:
        agents = spec.agents
    else:
        raw = json.loads(Path(args.instance).read_text())
        if "agents" not in raw:
            raise IcplanError(f"{args.instance} has no 'agents' section")
        agents = load_agents(raw["agents"])
    clustering = cluster_instance(net, agents, k=args.k)
    print(f"clusters={len(clustering.groups)} "
          f"active={list(clustering.active_ids())} "
          f"submasters={dict(sorted(clustering.submasters.items()))} "
          f"split_rounds={clustering.split_rounds}")
    if args.out:
        _write(args.out, clustering.to_json() + "\n")
        print(f"wrote {args.out}")
    if args.dot_out:
        _write(args.dot_out, clusters_to_dot(
            net, clustering, initial=dict(agents.initial)))
        print(f"wrote {args.dot_out}")
    return EXIT_OK


def _cmd_explore(args) -> int:
    if args.instance:
        net, agents, base, initially_known = load_exploration(args.instance)
    else:
        net, agents, base = exploration_world(seed=args.seed,
                                              n_states=args.n_states,
                                              n_agents=args.n_agents)
        initially_known = None
    log = run_exploration(net, agents, base, initially_known=initially_known,
                          t_max=args.t_max, max_cycles=args.max_cycles,
                          backend=args.backend, trace_dir=args.trace_dir)
    for o in log.outcomes:
        print(f"cycle {o.cycle}: clusters={o.n_clusters} "
              f"frontiers={o.frontiers_before} new={len(o.new_states)} "
              f"base+={o.base_gain}")
    print(f"status={log.status} cycles={log.cycles} "
          f"coverage={log.coverage:.2f} base={log.base_coverage:.2f} "
          f"subproblems={len(log.subproblems)} verified={log.all_verified} "
          f"wall={log.wall_time:.1f}s")
    if args.out:
        _write(args.out, json.dumps(log.to_dict(), indent=2, sort_keys=True)
               + "\n")
        print(f"wrote {args.out}")
    if log.status == "complete":
        return EXIT_OK
    if log.status == "verification_failed":
        return EXIT_VERIFICATION
    return EXIT_STALL


def _parse_n_range(text: str) -> list[int]:
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return list(range(start, stop + 1, step))
    return [int(p) for p in text.split(",") if p]


def bench_rows(methods, sizes, backend="scipy", time_limit=None):
    """One CSV row dict per (method, N) pair on the line relay family."""
    rows = []
    for n in sizes:
        net, spec = line_instance(n)
        for method in methods:
            if method == "flow":
                model, result, plan = solve_problem(spec, backend=backend,
                                                    time_limit=time_limit)
                status, wall, obj = result.status, result.wall_time, \
                    result.objective
            else:
                solver = (baselines.solve_powerset if method == "powerset"
                          else baselines.solve_adaptive_powerset)
                try:
                    run = solver(spec, backend=backend, time_limit=time_limit)
                    status, wall, obj = (run.result.status, run.wall_time,
                                         run.result.objective)
                except GuardExceeded:
                    status, wall, obj = "refused", 0.0, None
            rows.append({"method": method, "N": n, "T": spec.T,
                         "status": status, "wall_time": f"{wall:.3f}",
                         "objective": ("" if obj is None else f"{obj:.6g}")})
    return rows


def _cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ("flow", "powerset", "adaptive"):
            raise IcplanError(f"unknown bench method {m!r}")
    rows = bench_rows(methods, _parse_n_range(args.n_range),
                      backend=args.backend, time_limit=args.time_limit)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.DictWriter(out, fieldnames=["method", "N", "T", "status",
                                             "wall_time", "objective"])
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        out.close()
        print(f"wrote {args.out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icplan",
        description="plan, verify, and benchmark intermittent-connectivity "
                    "multi-agent missions")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--backend", default="scipy",
                       choices=("scipy", "glpk", "lp-file"))
        p.add_argument("--time-limit", type=float, default=None)

    p = sub.add_parser("solve", help="solve a planning instance")
    p.add_argument("instance")
    p.add_argument("--method", default="flow",
                   choices=("flow", "powerset", "adaptive"))
    p.add_argument("--gap", type=float, default=None)
    p.add_argument("--out", help="write the solution JSON here")
    p.add_argument("--lp-out", help="export the model in LP format")
    p.add_argument("--dot-out", help="export the network in DOT format")
    common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("verify", help="check a saved solution")
    p.add_argument("instance")
    p.add_argument("solution")
    p.add_argument("--events", default="declared",
                   choices=("declared", "potential"))
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("cluster", help="cluster agents and territories")
    p.add_argument("instance")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", help="write the clustering JSON here")
    p.add_argument("--dot-out", help="write a colored DOT view here")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("explore", help="run the exploration loop")
    p.add_argument("--instance", help="exploration world JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-states", type=int, default=100)
    p.add_argument("--n-agents", type=int, default=10)
    p.add_argument("--t-max", type=int, default=T_MAX)
    p.add_argument("--max-cycles", type=int, default=MAX_CYCLES)
    p.add_argument("--trace-dir", help="write per-cycle DOT/JSON traces here")
    p.add_argument("--out", help="write the run log JSON here")
    common(p)
    p.set_defaults(func=_cmd_explore)

    p = sub.add_parser("bench", help="benchmark on line relay instances")
    p.add_argument("--methods", default="flow,powerset,adaptive")
    p.add_argument("--n-range", default="4:12:2",
                   help="sizes as start:stop[:step] or a comma list")
    p.add_argument("--out", help="write CSV here instead of stdout")
    common(p)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IcplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
