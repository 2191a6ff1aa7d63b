"""Baseline formulations that model communication with binary edge activations.

Instead of routing information as network flows, these models introduce one
binary CommActive variable per communication edge per layer and enforce
source-to-sink reachability through cut constraints over subsets of
time-extended vertices: whenever a subset misses at least one source start
vertex, sink terminals inside it must be paid for by an active crossing arc.

Two variants:

* the full model enumerates every qualifying subset up front, which is only
  tractable for tiny horizons and is guarded accordingly;
* the adaptive model starts without cuts and separates violated ones from
  each candidate solution (the complement of the information-reachable set),
  re-solving until the plan verifies.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, GuardExceeded
from .ilp import (MilpModel, ProblemSpec, allocate_variables, build_dynamics,
                  build_extensions, build_reward_link)
from .solver import SolveResult, solve
from .verify import PlanSolution, extract_solution

POWERSET_GUARD = 18         # max (T+1)*|S| for full subset enumeration
ADAPTIVE_MAX_ROUNDS = 200

ACTIVE_ID = "comm"          # flow-id tag for CommActive events in plans


@dataclass
class BaselineRun:
    model: MilpModel
    result: SolveResult
    plan: PlanSolution | None
    rounds: int = 1
    cuts_added: int = 0
    wall_time: float = 0.0


def _check_supported(spec: ProblemSpec):
    spec.validate()
    if spec.information_consistent:
        raise ConfigurationError(
            "powerset baselines model plain reachability; "
            "information consistency is not supported")


def _build_base_model(spec: ProblemSpec) -> MilpModel:
    """Dynamics, comm gating, rewards and objective - no cuts yet."""
    model = allocate_variables(spec, include_flows=False, include_comm_active=True)
    build_dynamics(model, spec)
    build_reward_link(model, spec)
    net, T = spec.net, spec.T
    for t in range(T + 1):
        for (a, b) in net.comm:
            for endpoint in (a, b):
                coeffs = {model.var("comm", a, b, t): 1.0}
                for r in range(spec.agents.count):
                    coeffs[model.var("z", r, endpoint, t)] = -1.0
                model.add_constr(coeffs, "<=", 0.0, "comm_active")
    build_extensions(model, spec)

    for (s, k), value in spec.sorted_rewards():
        model.add_objective(model.var("y", s, k), value)
    for t in range(T):
        for (a, b) in net.mobility:
            cost = net.mobility_cost(t, a, b)
            if cost:
                for r in range(spec.agents.count):
                    model.add_objective(model.var("x", r, a, b, t), -cost)
    for t in range(1, T + 1):
        for (a, b) in net.comm:
            cost = net.comm_cost(t, a, b)
            if cost:
                model.add_objective(model.var("comm", a, b, t), -cost)
    return model


def _add_cut(model: MilpModel, spec: ProblemSpec, subset: frozenset):
    """Sink terminals inside `subset` require an active arc crossing into it."""
    net, T = spec.net, spec.T
    weight = float(len(spec.snk))
    coeffs: dict[int, float] = {}

    def bump(idx, delta):
        coeffs[idx] = coeffs.get(idx, 0.0) + delta

    for (s, t) in subset:
        if t == T:
            for r in spec.snk:
                bump(model.var("z", r, s, T), 1.0)
    for t in range(T):
        for (a, b) in net.mobility:
            if (a, t) not in subset and (b, t + 1) in subset:
                for r in range(spec.agents.count):
                    bump(model.var("x", r, a, b, t), -weight)
    for t in range(T + 1):
        for (a, b) in net.comm:
            if (a, t) not in subset and (b, t) in subset:
                bump(model.var("comm", a, b, t), -weight)
    model.add_constr(coeffs, "<=", 0.0, "powerset_cut")


def build_powerset_model(spec: ProblemSpec) -> MilpModel:
    """Full model with one cut per qualifying vertex subset.

    Qualifying subsets miss at least one source start vertex and contain at
    least one final-layer vertex.  Refuses when (T+1)*|S| exceeds the guard,
    since the family grows as 2^((T+1)*|S|).
    """
    _check_supported(spec)
    net, T = spec.net, spec.T
    n_vertices = (T + 1) * len(net.states)
    if n_vertices > POWERSET_GUARD:
        raise GuardExceeded(
            f"powerset enumeration over {n_vertices} time-extended vertices "
            f"({2 ** n_vertices} subsets) exceeds guard of {POWERSET_GUARD}")
    if not spec.src or not spec.snk:
        raise ConfigurationError("powerset model needs nonempty src and snk")

    model = _build_base_model(spec)
    vertices = [(s, t) for t in range(T + 1) for s in net.states]
    starts = {(spec.agents.initial[i], 0) for i in spec.src}
    n_cuts = 0
    for bits in range(1, 2 ** n_vertices):
        subset = frozenset(v for i, v in enumerate(vertices) if bits >> i & 1)
        if starts <= subset:
            continue
        if not any(t == T for (_, t) in subset):
            continue
        _add_cut(model, spec, subset)
        n_cuts += 1
    model.info["powerset_cuts"] = n_cuts
    return model


def solve_powerset(spec: ProblemSpec, backend: str = "scipy",
                   time_limit: float | None = None) -> BaselineRun:
    model = build_powerset_model(spec)
    result = solve(model, backend=backend, time_limit=time_limit)
    plan = extract_baseline_solution(spec, result) if result.ok else None
    return BaselineRun(model, result, plan, rounds=1,
                       cuts_added=model.info.get("powerset_cuts", 0),
                       wall_time=result.wall_time)


def _reachable_vertices(spec: ProblemSpec, assignment) -> dict[int, set]:
    """Per-source info-reachable time-extended vertices under the solution."""
    net, T = spec.net, spec.T
    carries = [set() for _ in range(max(T, 1))]
    actives = [set() for _ in range(T + 1)]
    for t in range(T):
        for (a, b) in net.mobility:
            for r in range(spec.agents.count):
                if assignment.get(("x", r, a, b, t), 0.0) > 0.5:
                    carries[t].add((a, b))
                    break
    for t in range(T + 1):
        for (a, b) in net.comm:
            if assignment.get(("comm", a, b, t), 0.0) > 0.5:
                actives[t].add((a, b))

    out = {}
    for i in spec.src:
        seed = (spec.agents.initial[i], 0)
        reach = {seed}
        frontier = [seed]
        while frontier:
            s, t = frontier.pop()
            succ = [(b, t) for (a, b) in actives[t] if a == s]
            if t < T:
                succ += [(b, t + 1) for (a, b) in carries[t] if a == s]
            for v in succ:
                if v not in reach:
                    reach.add(v)
                    frontier.append(v)
        out[i] = reach
    return out


def solve_adaptive_powerset(spec: ProblemSpec, backend: str = "scipy",
                            time_limit: float | None = None,
                            max_rounds: int = ADAPTIVE_MAX_ROUNDS) -> BaselineRun:
    """Cut-and-resolve: add the complement of each deficient reachable set."""
    _check_supported(spec)
    if not spec.src or not spec.snk:
        raise ConfigurationError("adaptive powerset needs nonempty src and snk")
    net, T = spec.net, spec.T
    model = _build_base_model(spec)
    vertices = frozenset((s, t) for t in range(T + 1) for s in net.states)
    total_time = 0.0
    n_cuts = 0
    seen_cuts: set[frozenset] = set()
    for round_no in range(1, max_rounds + 1):
        result = solve(model, backend=backend, time_limit=time_limit)
        total_time += result.wall_time
        if not result.ok:
            return BaselineRun(model, result, None, round_no, n_cuts, total_time)
        reach = _reachable_vertices(spec, result.assignment)
        violated = []
        for i in spec.src:
            terminals = set()
            for j in spec.snk:
                term = [s for s in net.states
                        if result.assignment.get(("z", j, s, T), 0.0) > 0.5]
                terminals.update((s, T) for s in term)
            if not all(v in reach[i] for v in terminals):
                violated.append(i)
        if not violated:
            plan = extract_baseline_solution(spec, result)
            return BaselineRun(model, result, plan, round_no, n_cuts, total_time)
        for i in violated:
            cut = vertices - frozenset(reach[i])
            if cut in seen_cuts:
                continue
            seen_cuts.add(cut)
            _add_cut(model, spec, cut)
            n_cuts += 1
    raise GuardExceeded(f"adaptive cut separation exceeded {max_rounds} rounds")


def extract_baseline_solution(spec: ProblemSpec, result: SolveResult) -> PlanSolution:
    """PlanSolution whose comm events are the active edges (flow id 'comm')."""
    base = extract_solution(spec, result.assignment, result.objective or 0.0)
    net = spec.net
    events = []
    for t in range(spec.T + 1):
        for (a, b) in net.comm:
            if result.assignment.get(("comm", a, b, t), 0.0) > 0.5:
                events.append((t, a, b, ACTIVE_ID, 1.0))
    key = lambda ev: (ev[0], net.index(ev[1]), net.index(ev[2]))
    return PlanSolution(paths=base.paths,
                        comm_events=tuple(sorted(events, key=key)),
                        flow_moves=(),
                        objective=base.objective,
                        reward_flags=base.reward_flags)
