"""Solver-free plan validation and a brute-force optimum oracle.

Information is modelled as tokens on occupied states.  Within one layer a
token spreads over communication edges between occupied states, iterated to
a fixpoint, so multi-hop relaying inside a single time step is allowed.
Across a step, every agent standing on a tokened state carries the token to
its next state.  These are exactly the semantics the flow model relaxes to:
arrival and relay within the same layer both count.

The consistency check gates motion and transmission on a master token that
spreads the same way from the master agents' initial states: an agent whose
initial state is not a master state may first leave it in step [t, t+1] only
if the master token covers that state at layer t, and every communication
event's sender state must be covered at the event's layer.

The brute-force oracle enumerates joint mobility paths, decides feasibility
with the token checkers, and prices communication exactly: per-pair shortest
paths over admissible time-extended arcs when no master flow is involved,
and a small residual LP over admissible arcs (with gating and awareness
coupling) when consistency and nonzero communication costs interact.
"""

from __future__ import annotations

import heapq
import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import GuardExceeded, InstanceError, UnbalancedFlowError
from .ilp import MASTER_FLOW, ProblemSpec
from .network import COMM, MOBILITY, MobilityCommNetwork

TOL = 1e-6


@dataclass(frozen=True)
class PlanSolution:
    """Executable plan: joint paths plus an information-flow certificate."""

    paths: dict[int, tuple[str, ...]]
    comm_events: tuple[tuple, ...] = ()    # (t, from, to, flow_id, amount)
    flow_moves: tuple[tuple, ...] = ()     # (t, from, to, flow_id, amount)
    objective: float = 0.0
    reward_flags: dict[tuple[str, int], int] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(next(iter(self.paths.values()))) - 1


@dataclass
class ReachabilityReport:
    pair_matrix: dict[tuple[int, int], bool]
    witnesses: dict[tuple[int, int], list[tuple[int, str]]]
    token_layers: dict[int, list[frozenset[str]]]

    @property
    def all_reachable(self) -> bool:
        return all(self.pair_matrix.values())

    def unreachable(self):
        return sorted(k for k, v in self.pair_matrix.items() if not v)


# -- token simulation core (bitmask engine) ------------------------------


class _Sim:
    """Bitmask token spreading over one network."""

    def __init__(self, net: MobilityCommNetwork):
        self.net = net
        self.bit = {s: 1 << i for i, s in enumerate(net.states)}
        self.comm_pairs = [(self.bit[a], self.bit[b]) for (a, b) in net.comm]

    def occupancy(self, paths: dict[int, tuple[str, ...]]):
        T = len(next(iter(paths.values()))) - 1
        out = []
        for t in range(T + 1):
            mask = 0
            for path in paths.values():
                mask |= self.bit[path[t]]
            out.append(mask)
        return out

    def closure(self, cur: int, occ: int, gate: int | None = None) -> int:
        """Fixpoint of within-layer spreading over occupied comm endpoints."""
        allowed = occ if gate is None else (occ & gate)
        while True:
            nxt = cur
            for a, b in self.comm_pairs:
                if (cur & allowed & a) and (occ & b):
                    nxt |= b
            if nxt == cur:
                return cur
            cur = nxt

    def spread(self, paths, seed_mask: int, gate_layers=None):
        """Token layer masks; gate_layers restricts transmission senders."""
        occ = self.occupancy(paths)
        T = len(occ) - 1
        layers = []
        cur = seed_mask & occ[0]
        cur = self.closure(cur, occ[0], gate_layers[0] if gate_layers else None)
        layers.append(cur)
        agents = sorted(paths)
        for t in range(1, T + 1):
            nxt = 0
            for r in agents:
                if self.bit[paths[r][t - 1]] & layers[t - 1]:
                    nxt |= self.bit[paths[r][t]]
            nxt = self.closure(nxt, occ[t], gate_layers[t] if gate_layers else None)
            layers.append(nxt)
        return layers

    def to_states(self, mask: int) -> frozenset[str]:
        return frozenset(s for s, b in self.bit.items() if mask & b)


def master_token_layers(spec: ProblemSpec, paths) -> list[frozenset[str]]:
    """Master-token coverage per layer for the given joint paths."""
    sim = _Sim(spec.net)
    seed = 0
    for s in spec.agents.master_states():
        seed |= sim.bit[s]
    return [sim.to_states(m) for m in sim.spread(paths, seed)]


# -- dynamics and flow bookkeeping ---------------------------------------


def check_dynamics(plan: PlanSolution, spec: ProblemSpec) -> list[str]:
    """Path shape, initial placement, edge validity, static and collision rules."""
    net, T = spec.net, spec.T
    bad = []
    if sorted(plan.paths) != list(range(spec.agents.count)):
        bad.append(f"paths cover agents {sorted(plan.paths)}, expected 0..{spec.agents.count - 1}")
        return bad
    for r, path in plan.paths.items():
        if len(path) != T + 1:
            bad.append(f"agent {r}: path length {len(path)}, expected {T + 1}")
            continue
        for s in path:
            if not net.has_state(s):
                bad.append(f"agent {r}: unknown state {s!r}")
        if path[0] != spec.agents.initial[r]:
            bad.append(f"agent {r}: starts at {path[0]!r}, expected {spec.agents.initial[r]!r}")
        for t in range(T):
            if (path[t], path[t + 1]) not in net.mobility:
                bad.append(f"agent {r}: no mobility edge {path[t]!r}->{path[t + 1]!r} at step {t}")
        if r in spec.agents.static and any(s != path[0] for s in path):
            bad.append(f"agent {r} is static but moves")
    if spec.collision_avoidance and not bad:
        pairs = (spec.collision_pairs if spec.collision_pairs is not None
                 else tuple(itertools.combinations(range(spec.agents.count), 2)))
        for i, j in pairs:
            pi, pj = plan.paths[i], plan.paths[j]
            for t in range(T + 1):
                if pi[t] == pj[t]:
                    bad.append(f"collision: agents {i},{j} share {pi[t]!r} at t={t}")
            for t in range(T):
                if pi[t] == pj[t + 1] and pj[t] == pi[t + 1] and pi[t] != pj[t]:
                    bad.append(f"collision: agents {i},{j} swap {pi[t]!r}/{pj[t]!r} at step {t}")
    return bad


def _arc_flows(plan: PlanSolution):
    """Per-flow-id arc flow maps from the declared certificate."""
    flows: dict = {}
    for t, a, b, fid, amount in plan.flow_moves:
        arcs = flows.setdefault(fid, {})
        key = ("move", t, a, b)
        arcs[key] = arcs.get(key, 0.0) + amount
    for t, a, b, fid, amount in plan.comm_events:
        arcs = flows.setdefault(fid, {})
        key = ("comm", t, a, b)
        arcs[key] = arcs.get(key, 0.0) + amount
    return flows


def _imbalances(arcs):
    """Net inflow per (state, t) vertex for one flow id."""
    net_in: dict[tuple[str, int], float] = {}

    def bump(s, t, delta):
        net_in[(s, t)] = net_in.get((s, t), 0.0) + delta

    for (kind, t, a, b), amount in arcs.items():
        if kind == "move":
            bump(a, t, -amount)
            bump(b, t + 1, amount)
        else:
            bump(a, t, -amount)
            bump(b, t, amount)
    return net_in


def check_flows(plan: PlanSolution, spec: ProblemSpec) -> list[str]:
    """Certificate validity: admissibility of arcs and balance patterns."""
    net, T = spec.net, spec.T
    bad = []
    occupied = [set(path[t] for path in plan.paths.values()) for t in range(T + 1)]
    traversed = [set() for _ in range(max(T, 1))]
    for path in plan.paths.values():
        for t in range(T):
            traversed[t].add((path[t], path[t + 1]))

    for t, a, b, fid, amount in plan.comm_events:
        if (a, b) not in net.comm:
            bad.append(f"comm event on missing edge {a!r}->{b!r} (t={t})")
        elif a not in occupied[t] or b not in occupied[t]:
            bad.append(f"comm event {a!r}->{b!r} at t={t} with unoccupied endpoint")
    for t, a, b, fid, amount in plan.flow_moves:
        if (a, b) not in net.mobility:
            bad.append(f"flow move on missing edge {a!r}->{b!r} (t={t})")
        elif (a, b) not in traversed[t]:
            bad.append(f"flow move {a!r}->{b!r} at t={t} not ridden by any agent")

    orientation = spec.orientation()
    flows = _arc_flows(plan)
    for fid in spec.data_flow_ids():
        net_in = _imbalances(flows.get(fid, {}))
        for t in range(T + 1):
            for s in net.states:
                expected = 0.0
                if orientation == "one_to_many":
                    if t == 0 and s == plan.paths[fid][0]:
                        expected -= len(spec.snk)
                    if t == T:
                        expected += sum(1 for r in spec.snk if plan.paths[r][T] == s)
                else:
                    if t == 0:
                        expected -= sum(1 for r in spec.src if plan.paths[r][0] == s)
                    if t == T and plan.paths[fid][T] == s:
                        expected += len(spec.src)
                got = net_in.get((s, t), 0.0)
                if abs(got - expected) > TOL:
                    bad.append(f"flow {fid}: imbalance {got:+.4g} at ({s!r}, t={t}), "
                               f"expected {expected:+.4g}")
    if spec.information_consistent and MASTER_FLOW in flows:
        net_in = _imbalances(flows[MASTER_FLOW])
        starts = spec.agents.master_states()
        for (s, t), got in sorted(net_in.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            floor = -float(len(net.states)) if (t == 0 and s in starts) else 0.0
            if got < floor - TOL:
                bad.append(f"master flow: net inflow {got:+.4g} below {floor:+.4g} "
                           f"at ({s!r}, t={t})")
    return bad


# -- reachability ---------------------------------------------------------


def information_reachability(plan: PlanSolution, spec: ProblemSpec,
                             events: str = "declared",
                             src=None, snk=None) -> ReachabilityReport:
    """Which source agents' information reaches which sink agents' terminals.

    events="declared" restricts within-layer spreading to the plan's own
    communication events; events="potential" uses every communication edge
    between occupied states (the feasibility semantics of the flow model).
    """
    if events not in ("declared", "potential"):
        raise ValueError("events must be 'declared' or 'potential'")
    net, T = spec.net, spec.T
    src = list(spec.src if src is None else src)
    snk = list(spec.snk if snk is None else snk)
    declared = None
    if events == "declared":
        declared = [set() for _ in range(T + 1)]
        for t, a, b, fid, amount in plan.comm_events:
            if amount > TOL:
                declared[t].add((a, b))

    pair_matrix, witnesses, token_layers = {}, {}, {}
    for i in src:
        layers, parents = _spread_with_parents(net, plan.paths, {plan.paths[i][0]},
                                               declared)
        token_layers[i] = [frozenset(layer) for layer in layers]
        for j in snk:
            target = plan.paths[j][T]
            ok = target in layers[T]
            pair_matrix[(i, j)] = ok
            if ok:
                witnesses[(i, j)] = _walk_back(parents, T, target)
    return ReachabilityReport(pair_matrix, witnesses, token_layers)


def _spread_with_parents(net, paths, seed_states, declared):
    """Set-based token spread recording one parent pointer per acquisition."""
    agents = sorted(paths)
    T = len(paths[agents[0]]) - 1
    occupied = [frozenset(paths[r][t] for r in agents) for t in range(T + 1)]
    layers: list[set[str]] = []
    parents: list[dict[str, tuple]] = []

    def close(cur: set[str], t: int, par: dict):
        frontier = list(cur)
        while frontier:
            nxt = []
            for a in frontier:
                if declared is None:
                    succ = [b for b in net.neighbors(a, "succ", COMM)
                            if b in occupied[t]]
                else:
                    succ = [b for (x, b) in declared[t] if x == a]
                for b in succ:
                    if b not in cur:
                        cur.add(b)
                        par[b] = ("comm", t, a)
                        nxt.append(b)
            frontier = nxt
        return cur

    cur = {s for s in seed_states if s in occupied[0]}
    par: dict[str, tuple] = {s: ("seed",) for s in cur}
    layers.append(close(cur, 0, par))
    parents.append(par)
    for t in range(1, T + 1):
        cur, par = set(), {}
        for r in agents:
            prev, here = paths[r][t - 1], paths[r][t]
            if prev in layers[t - 1] and here not in cur:
                cur.add(here)
                par[here] = ("carry", t - 1, prev)
        layers.append(close(cur, t, par))
        parents.append(par)
    return layers, parents


def _walk_back(parents, T, target):
    """Witness info-path [(t, state), ...] ending at (T, target)."""
    out = [(T, target)]
    t, s = T, target
    while True:
        kind = parents[t].get(s)
        if kind is None or kind[0] == "seed":
            break
        if kind[0] == "comm":
            s = kind[2]
        else:
            t, s = kind[1], kind[2]
        out.append((t, s))
    out.reverse()
    return out


# -- consistency ----------------------------------------------------------


def check_consistency(plan: PlanSolution, spec: ProblemSpec) -> list[str]:
    """Master-gating audit: no early departures, no untokened senders."""
    if not spec.information_consistent:
        return []
    T = spec.T
    starts = spec.agents.master_states()
    master = master_token_layers(spec, plan.paths)
    bad = []
    for r in range(spec.agents.count):
        s0 = spec.agents.initial[r]
        if s0 in starts:
            continue
        path = plan.paths[r]
        for t in range(T):
            if path[t] == s0 and path[t + 1] != s0 and s0 not in master[t]:
                bad.append(f"agent {r} departs {s0!r} in step [{t},{t + 1}] "
                           f"before master token arrival")
    for t, a, b, fid, amount in plan.comm_events:
        if amount > TOL and a not in master[t]:
            bad.append(f"comm event {a!r}->{b!r} (flow {fid!r}) at t={t} "
                       f"from state without master token")
    return bad


def agents_received(plan: PlanSolution, spec: ProblemSpec) -> dict[int, int]:
    """Agents covered by the master token, mapped to first coverage layer."""
    master = master_token_layers(spec, plan.paths)
    out = {}
    for r, path in plan.paths.items():
        for t, layer in enumerate(master):
            if path[t] in layer:
                out[r] = t
                break
    return out


# -- flow decomposition ----------------------------------------------------


def decompose_flows(plan: PlanSolution, spec: ProblemSpec | None = None):
    """Greedy path decomposition of each flow family.

    Returns {flow_id: [(path, amount), ...]} with paths as [(t, state), ...].
    Residual circulations (within-layer comm cycles) are stripped and
    discarded with a warning.  Raises UnbalancedFlowError when a supply
    cannot be routed to any demand vertex.
    """
    result: dict = {}
    for fid, arcs in _arc_flows(plan).items():
        residual = {k: v for k, v in arcs.items() if v > TOL}
        net_in = _imbalances(arcs)
        supply = {v: -amt for v, amt in net_in.items() if amt < -TOL}
        demand = {v: amt for v, amt in net_in.items() if amt > TOL}
        if abs(sum(supply.values()) - sum(demand.values())) > 1e-4:
            worst = max(net_in.items(), key=lambda kv: abs(kv[1]))
            raise UnbalancedFlowError(worst[0][0], worst[0][1], worst[1])
        paths = []
        for source in sorted(supply, key=lambda v: (v[1], v[0])):
            while supply.get(source, 0.0) > TOL:
                chain = _find_chain(residual, source, demand)
                if not chain:
                    raise UnbalancedFlowError(source[0], source[1], supply[source])
                head = _arc_head(chain[-1])
                amount = min(supply[source], demand[head],
                             min(residual[arc] for arc in chain))
                for arc in chain:
                    residual[arc] -= amount
                    if residual[arc] <= TOL:
                        del residual[arc]
                supply[source] -= amount
                demand[head] -= amount
                if demand[head] <= TOL:
                    del demand[head]
                paths.append(([(source[1], source[0])]
                              + [(_arc_head(arc)[1], _arc_head(arc)[0]) for arc in chain],
                              amount))
        if residual:
            total = sum(residual.values())
            warnings.warn(f"flow {fid!r}: discarding circulation of {total:.4g} units")
        result[fid] = paths
    return result


def _arc_head(arc):
    kind, t, a, b = arc
    return (b, t + 1) if kind == "move" else (b, t)


def _find_chain(residual, source, demand):
    """BFS over positive residual arcs from source to any demand vertex."""
    if source in demand:
        return []
    frontier = [source]
    seen = {source}
    prev: dict = {}
    while frontier:
        nxt = []
        for v in frontier:
            for arc in sorted(residual):
                kind, t, a, b = arc
                tail = (a, t)
                if tail != v:
                    continue
                head = _arc_head(arc)
                if head in seen:
                    continue
                seen.add(head)
                prev[head] = arc
                if head in demand:
                    chain = []
                    node = head
                    while node != source:
                        arc = prev[node]
                        chain.append(arc)
                        node = (arc[2], arc[1])
                    chain.reverse()
                    return chain
                nxt.append(head)
        frontier = nxt
    return None


# -- solution extraction and JSON I/O --------------------------------------


def extract_solution(spec: ProblemSpec, assignment: dict[tuple, float],
                     objective: float) -> PlanSolution:
    """Read a PlanSolution out of a variable assignment."""
    net, T = spec.net, spec.T
    paths = {}
    for r in range(spec.agents.count):
        path = []
        for t in range(T + 1):
            here = [s for s in net.states if assignment.get(("z", r, s, t), 0.0) > 0.5]
            if len(here) != 1:
                raise InstanceError(f"agent {r} occupies {len(here)} states at t={t}")
            path.append(here[0])
        paths[r] = tuple(path)
    comm_events, flow_moves = [], []
    for ref, value in assignment.items():
        if value <= TOL:
            continue
        if ref[0] == "fbar":
            _, fid, a, b, t = ref
            comm_events.append((t, a, b, fid, value))
        elif ref[0] == "f":
            _, fid, a, b, t = ref
            flow_moves.append((t, a, b, fid, value))
    key = lambda ev: (ev[0], net.index(ev[1]), net.index(ev[2]), str(ev[3]))
    reward_flags = {(s, k): int(round(assignment.get(("y", s, k), 0.0)))
                    for (s, k) in spec.rewards}
    return PlanSolution(paths=paths,
                        comm_events=tuple(sorted(comm_events, key=key)),
                        flow_moves=tuple(sorted(flow_moves, key=key)),
                        objective=float(objective),
                        reward_flags=reward_flags)


def solution_to_dict(plan: PlanSolution) -> dict:
    return {
        "paths": {str(r): list(path) for r, path in sorted(plan.paths.items())},
        "comm_events": [list(ev) for ev in plan.comm_events],
        "flow_moves": [list(ev) for ev in plan.flow_moves],
        "objective": plan.objective,
        "reward_flags": [{"state": s, "k": k, "value": v}
                         for (s, k), v in sorted(plan.reward_flags.items())],
    }


def solution_from_dict(data: dict) -> PlanSolution:
    try:
        paths = {int(r): tuple(path) for r, path in data["paths"].items()}
        comm = tuple((int(t), a, b, _fid(fid), float(amt))
                     for t, a, b, fid, amt in data.get("comm_events", []))
        moves = tuple((int(t), a, b, _fid(fid), float(amt))
                      for t, a, b, fid, amt in data.get("flow_moves", []))
        rewards = {(rec["state"], int(rec["k"])): int(rec["value"])
                   for rec in data.get("reward_flags", [])}
        return PlanSolution(paths=paths, comm_events=comm, flow_moves=moves,
                            objective=float(data.get("objective", 0.0)),
                            reward_flags=rewards)
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed solution: {exc}") from None


def _fid(fid):
    return int(fid) if str(fid).lstrip("-").isdigit() else fid


def save_solution(plan: PlanSolution, path: str):
    with open(path, "w") as fh:
        json.dump(solution_to_dict(plan), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_solution(path: str) -> PlanSolution:
    with open(path) as fh:
        return solution_from_dict(json.load(fh))


# -- brute-force oracle -----------------------------------------------------


@dataclass
class OracleResult:
    status: str                     # optimal | infeasible
    objective: float | None
    paths: dict[int, tuple[str, ...]] | None
    candidates: int = 0
    feasible: int = 0


def _count_walks(net, s0, T):
    ways = {s0: 1}
    for _ in range(T):
        nxt: dict[str, int] = {}
        for s, n in ways.items():
            for sp in net.neighbors(s, "succ", MOBILITY):
                nxt[sp] = nxt.get(sp, 0) + n
        ways = nxt
    return sum(ways.values())


def _agent_paths(net, s0, T):
    paths = []
    stack = [(s0,)]
    while stack:
        path = stack.pop()
        if len(path) == T + 1:
            paths.append(path)
            continue
        for sp in reversed(net.neighbors(path[-1], "succ", MOBILITY)):
            stack.append(path + (sp,))
    return paths


def brute_force_solve(spec: ProblemSpec, guard: int = 1_000_000) -> OracleResult:
    """Exhaustive optimum over joint mobility paths.

    Refuses when the joint path count exceeds the guard.
    """
    spec.validate()
    net, T, agents = spec.net, spec.T, spec.agents
    total = 1
    for r in range(agents.count):
        n = 1 if r in agents.static else _count_walks(net, agents.initial[r], T)
        if n == 0:
            return OracleResult("infeasible", None, None)
        total *= n
        if total > guard:
            raise GuardExceeded(f"joint path count {total} exceeds guard {guard}")

    per_agent = []
    for r in range(agents.count):
        if r in agents.static:
            per_agent.append([(agents.initial[r],) * (T + 1)])
        else:
            per_agent.append(_agent_paths(net, agents.initial[r], T))
    move_cost = {r: [sum(net.mobility_cost(t, p[t], p[t + 1]) for t in range(T))
                     for p in per_agent[r]]
                 for r in range(agents.count)}

    sim = _Sim(net)
    starts_mask = 0
    for s in agents.master_states():
        starts_mask |= sim.bit[s]
    capable = sorted(agents.capable())
    pairs = (spec.collision_pairs if spec.collision_pairs is not None
             else tuple(itertools.combinations(range(agents.count), 2)))
    comm_costed = any(net.comm_cost(t, a, b) > 0
                      for (a, b) in net.comm for t in range(1, T + 1)) and bool(net.comm)
    reward_items = spec.sorted_rewards()

    best, best_paths = None, None
    n_cand = n_feas = 0
    lp_cache: dict = {}
    for combo in itertools.product(*(range(len(p)) for p in per_agent)):
        n_cand += 1
        paths = {r: per_agent[r][combo[r]] for r in range(agents.count)}
        if spec.collision_avoidance and _collides(paths, pairs, T):
            continue
        value = _evaluate_candidate(spec, sim, paths, starts_mask, capable,
                                    comm_costed, reward_items, lp_cache)
        if value is None:
            continue
        n_feas += 1
        g1 = sum(move_cost[r][combo[r]] for r in range(agents.count))
        total_value = value - g1
        if best is None or total_value > best + 1e-12:
            best, best_paths = total_value, paths
    if best is None:
        return OracleResult("infeasible", None, None, n_cand, 0)
    return OracleResult("optimal", best, best_paths, n_cand, n_feas)


def _collides(paths, pairs, T):
    for i, j in pairs:
        pi, pj = paths[i], paths[j]
        for t in range(T + 1):
            if pi[t] == pj[t]:
                return True
        for t in range(T):
            if pi[t] == pj[t + 1] and pj[t] == pi[t + 1] and pi[t] != pj[t]:
                return True
    return False


def _evaluate_candidate(spec, sim, paths, starts_mask, capable,
                        comm_costed, reward_items, lp_cache):
    """Rewards minus communication cost for one joint path set, or None."""
    net, T = spec.net, spec.T
    occ = sim.occupancy(paths)

    master = None
    if spec.information_consistent:
        master = sim.spread(paths, starts_mask)
        for r in range(spec.agents.count):
            s0 = spec.agents.initial[r]
            if sim.bit[s0] & starts_mask:
                continue
            path = paths[r]
            for t in range(T):
                if path[t] == s0 and path[t + 1] != s0 \
                        and not (master[t] & sim.bit[s0]):
                    return None

    # per-pair reachability under (gated) token semantics
    for i in spec.src:
        layers = sim.spread(paths, sim.bit[paths[i][0]], gate_layers=master)
        for j in spec.snk:
            if not (layers[T] & sim.bit[paths[j][T]]):
                return None

    counts: dict[str, int] = {}
    for r in capable:
        s = paths[r][T]
        counts[s] = counts.get(s, 0) + 1
    claimable = [(s, k, v) for (s, k), v in reward_items if counts.get(s, 0) >= k]

    if spec.information_consistent and spec.awareness_reward:
        covered = 0
        for m in master:
            covered |= m
        claimable = [(s, k, v) for (s, k, v) in claimable
                     if (sim.bit[s] & starts_mask) or (sim.bit[s] & covered)]

    if not comm_costed:
        return sum(max(v, 0.0) for (_, _, v) in claimable)

    if not spec.information_consistent:
        g2 = _pairwise_comm_cost(spec, sim, paths, occ)
        if g2 is None:
            return None
        return sum(max(v, 0.0) for (_, _, v) in claimable) - g2

    return _residual_lp_value(spec, paths, master, sim, claimable, lp_cache)


def _admissible_arcs(spec, paths, occ, sim):
    """Traversed mobility arcs per step and occupied comm arcs per layer."""
    T = spec.T
    traversed = [set() for _ in range(max(T, 1))]
    for path in paths.values():
        for t in range(T):
            traversed[t].add((path[t], path[t + 1]))
    comm_ok = []
    for t in range(T + 1):
        layer = [(a, b) for (a, b) in spec.net.comm
                 if (occ[t] & sim.bit[a]) and (occ[t] & sim.bit[b])]
        comm_ok.append(layer)
    return traversed, comm_ok


def _pairwise_comm_cost(spec, sim, paths, occ):
    """Sum over src x snk of cheapest admissible time-extended info routes."""
    net, T = spec.net, spec.T
    traversed, comm_ok = _admissible_arcs(spec, paths, occ, sim)
    total = 0.0
    for i in spec.src:
        dist = _te_dijkstra(net, T, traversed, comm_ok, (paths[i][0], 0))
        for j in spec.snk:
            d = dist.get((paths[j][T], T))
            if d is None:
                return None
            total += d
    return total


def _te_dijkstra(net, T, traversed, comm_ok, source):
    """Shortest info-route costs; mobility arcs free, comm costed for t>=1."""
    dist = {source: 0.0}
    heap = [(0.0, source)]
    while heap:
        d, (s, t) = heapq.heappop(heap)
        if d > dist.get((s, t), float("inf")):
            continue
        if t < T:
            for (a, b) in traversed[t]:
                if a == s and d < dist.get((b, t + 1), float("inf")):
                    dist[(b, t + 1)] = d
                    heapq.heappush(heap, (d, (b, t + 1)))
        for (a, b) in comm_ok[t]:
            if a == s:
                w = net.comm_cost(t, a, b) if t >= 1 else 0.0
                if d + w < dist.get((b, t), float("inf")):
                    dist[(b, t)] = d + w
                    heapq.heappush(heap, (d + w, (b, t)))
    return dist


def _residual_lp_value(spec, paths, master, sim, claimable, lp_cache):
    """Exact rewards-minus-g2 for fixed paths via an LP over admissible arcs.

    Couples data flows, master deliveries, gating, and awareness claims the
    same way the integer model does once occupancy is fixed.
    """
    net, T = spec.net, spec.T
    occ = sim.occupancy(paths)
    traversed, comm_ok = _admissible_arcs(spec, paths, occ, sim)
    key = (tuple(tuple(sorted(t_arcs)) for t_arcs in traversed),
           tuple(tuple(layer) for layer in comm_ok),
           tuple(sorted((r, paths[r][0], paths[r][T]) for r in paths)),
           tuple(tuple(sorted(sim.to_states(m))) for m in master),
           tuple(claimable))
    if key in lp_cache:
        return lp_cache[key]

    starts = spec.agents.master_states()
    orientation = spec.orientation()
    flow_ids = list(spec.flow_ids())

    cols: dict[tuple, int] = {}

    def col(*ref):
        if ref not in cols:
            cols[ref] = len(cols)
        return cols[ref]

    for fid in flow_ids:
        for t in range(T):
            for (a, b) in traversed[t]:
                col("f", fid, a, b, t)
        for t in range(T + 1):
            for (a, b) in comm_ok[t]:
                col("fbar", fid, a, b, t)
    lp_claims = []
    const_claims = 0.0
    for (s, k, v) in claimable:
        if spec.awareness_reward and s not in starts:
            lp_claims.append((s, k, v))
            col("y", s, k)
        else:
            const_claims += max(v, 0.0)

    def inflow_terms(fid, s, t):
        terms = []
        if t >= 1:
            for (a, b) in traversed[t - 1]:
                if b == s:
                    terms.append((col("f", fid, a, b, t - 1), 1.0))
        for (a, b) in comm_ok[t]:
            if b == s:
                terms.append((col("fbar", fid, a, b, t), 1.0))
        if t < T:
            for (a, b) in traversed[t]:
                if a == s:
                    terms.append((col("f", fid, a, b, t), -1.0))
        for (a, b) in comm_ok[t]:
            if a == s:
                terms.append((col("fbar", fid, a, b, t), -1.0))
        return terms

    A_eq, b_eq, A_ub, b_ub = [], [], [], []

    def add(rows, rhs_list, terms, rhs):
        row = {}
        for idx, c in terms:
            row[idx] = row.get(idx, 0.0) + c
        rows.append(row)
        rhs_list.append(rhs)

    snk_T: dict[str, int] = {}
    for r in spec.snk:
        snk_T[paths[r][T]] = snk_T.get(paths[r][T], 0) + 1
    src_0: dict[str, int] = {}
    for r in spec.src:
        src_0[paths[r][0]] = src_0.get(paths[r][0], 0) + 1

    for fid in spec.data_flow_ids():
        for t in range(T + 1):
            for s in net.states:
                rhs = 0.0
                if orientation == "one_to_many":
                    if t == 0 and s == paths[fid][0]:
                        rhs -= float(len(spec.snk))
                    if t == T:
                        rhs += float(snk_T.get(s, 0))
                else:
                    if t == 0:
                        rhs -= float(src_0.get(s, 0))
                    if t == T and s == paths[fid][T]:
                        rhs += float(len(spec.src))
                add(A_eq, b_eq, inflow_terms(fid, s, t), rhs)

    # master flow: net inflow >= floor everywhere
    cum: dict[str, list[list[tuple[int, float]]]] = {}

    def cum_terms(s):
        if s not in cum:
            acc: list[tuple[int, float]] = []
            out = []
            for t in range(T + 1):
                acc = acc + inflow_terms(MASTER_FLOW, s, t)
                out.append(list(acc))
            cum[s] = out
        return cum[s]

    for t in range(T + 1):
        for s in net.states:
            floor = -float(len(net.states)) if (t == 0 and s in starts) else 0.0
            add(A_ub, b_ub, [(i, -c) for i, c in inflow_terms(MASTER_FLOW, s, t)],
                -floor)

    N = float(spec.big_m_value())
    for r in range(spec.agents.count):
        s0 = spec.agents.initial[r]
        if s0 in starts:
            continue
        away = [t for t in range(T + 1) if paths[r][t] != s0]
        if away:
            t0 = min(away)
            add(A_ub, b_ub, [(i, -c) for i, c in cum_terms(s0)[t0 - 1]], -1.0)
        for fid in flow_ids:
            for t in range(T + 1):
                terms = [(i, -N * c) for i, c in cum_terms(s0)[t]]
                for (a, b) in comm_ok[t]:
                    if a == s0:
                        terms.append((col("fbar", fid, a, b, t), 1.0))
                add(A_ub, b_ub, terms, 0.0)

    for (s, k, v) in lp_claims:
        terms = [(col("y", s, k), 1.0)]
        terms += [(i, -c) for i, c in cum_terms(s)[T]]
        add(A_ub, b_ub, terms, 0.0)

    n = len(cols)
    c_vec = np.zeros(n)
    for fid in flow_ids:
        for t in range(1, T + 1):
            for (a, b) in comm_ok[t]:
                c_vec[cols[("fbar", fid, a, b, t)]] += net.comm_cost(t, a, b)
    for (s, k, v) in lp_claims:
        c_vec[cols[("y", s, k)]] -= v

    bounds = [(0, None)] * n
    for (s, k, v) in lp_claims:
        bounds[cols[("y", s, k)]] = (0, 1)

    def densify(rows):
        mat = np.zeros((len(rows), n))
        for i, row in enumerate(rows):
            for j, coeff in row.items():
                mat[i, j] = coeff
        return mat

    res = linprog(c_vec,
                  A_ub=densify(A_ub) if A_ub else None,
                  b_ub=np.array(b_ub) if b_ub else None,
                  A_eq=densify(A_eq) if A_eq else None,
                  b_eq=np.array(b_eq) if b_eq else None,
                  bounds=bounds, method="highs")
    value = None if res.status != 0 else const_claims - float(res.fun)
    lp_cache[key] = value
    return value
