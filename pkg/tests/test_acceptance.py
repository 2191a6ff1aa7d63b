"""Acceptance gate: the eight release criteria, one test per criterion.

Each test carries an `acceptance` marker; the conftest hook prints a
single PASS/FAIL line per criterion at the end of the run.
"""

import dataclasses
import random
import time

import pytest

from icplan import baselines, verify
from icplan.cluster import cluster_instance, weak_components
from icplan.errors import GuardExceeded
from icplan.explore import run_exploration
from icplan.ilp import AgentConfig, ProblemSpec, assemble
from icplan.instances import (ORACLE_CLASSES, exploration_world, line_instance,
                              random_cluster_graph, random_oracle_instance)
from icplan.solver import solve_problem

from _helpers import line_network, relay_spec

TOL = 1e-6


@pytest.mark.acceptance("C1 solver matches brute force on 200 random instances")
def test_oracle_equivalence():
    start = time.time()
    for seed in range(50):
        for klass in ORACLE_CLASSES:
            net, spec = random_oracle_instance(seed, klass)
            _, result, _ = solve_problem(spec)
            oracle = verify.brute_force_solve(spec)
            case = f"seed={seed} class={klass}"
            if oracle.status == "optimal":
                assert result.ok, f"{case}: solver {result.status}, oracle optimal"
                assert result.objective == pytest.approx(oracle.objective,
                                                         abs=TOL), case
            else:
                assert result.status == "infeasible", \
                    f"{case}: solver {result.status}, oracle infeasible"
    assert time.time() - start < 300.0


@pytest.mark.acceptance("C2 figure relay instances are feasible with delivery")
def test_figure_relay_feasibility():
    # middle agent adjacent to the sender: two steps suffice
    net, spec = relay_spec(green_at="s1", T=2)
    _, result, plan = solve_problem(spec)
    assert result.ok and plan is not None
    report = verify.information_reachability(plan, spec)
    assert report.pair_matrix[(0, 2)] and report.pair_matrix[(2, 0)]

    # middle agent already centered: one step plus in-layer relaying
    net, spec = relay_spec(green_at="s2", T=1)
    _, result, plan = solve_problem(spec)
    assert result.ok and plan is not None
    assert verify.information_reachability(plan, spec).all_reachable


@pytest.mark.acceptance("C3 consistent plans never beat the unconstrained ones")
def test_consistency_is_a_restriction():
    net = line_network(4)
    everyone = (0, 1, 2, 3)
    initial = {r: f"s{r}" for r in range(4)}
    for T in range(1, 6):
        plain = ProblemSpec(net=net, agents=AgentConfig(count=4, initial=initial),
                            T=T, src=everyone, snk=everyone)
        gated = ProblemSpec(net=net,
                            agents=AgentConfig(count=4, initial=initial,
                                               masters=frozenset({0})),
                            T=T, src=everyone, snk=everyone,
                            information_consistent=True)
        _, r1, _ = solve_problem(plain)
        _, r2, p2 = solve_problem(gated)
        if T == 2:
            assert r1.ok, "unconstrained problem must be feasible at T=2"
        if r2.ok:
            assert r1.ok, f"T={T}: consistent feasible but unconstrained not"
            assert r2.objective <= r1.objective + TOL, f"T={T}"
            assert not verify.check_consistency(p2, gated), f"T={T}"


@pytest.mark.acceptance("C4 line-relay scaling: agreement, guards, wall time")
def test_line_relay_scaling():
    _, spec4 = line_instance(4)
    _, flow4, _ = solve_problem(spec4)
    full4 = baselines.solve_powerset(spec4)
    adaptive4 = baselines.solve_adaptive_powerset(spec4)
    assert flow4.ok and full4.result.ok and adaptive4.result.ok
    assert full4.result.objective == pytest.approx(flow4.objective, abs=TOL)
    assert adaptive4.result.objective == pytest.approx(flow4.objective, abs=TOL)

    for n in (5, 6):
        _, spec = line_instance(n)
        _, flow, _ = solve_problem(spec)
        adaptive = baselines.solve_adaptive_powerset(spec)
        assert flow.ok and adaptive.result.ok, f"N={n}"
        assert adaptive.result.objective == pytest.approx(flow.objective,
                                                          abs=TOL), f"N={n}"
        with pytest.raises(GuardExceeded):
            baselines.solve_powerset(spec)

    _, spec8 = line_instance(8)
    with pytest.raises(GuardExceeded):
        baselines.solve_powerset(spec8)

    start = time.time()
    _, flow15, _ = solve_problem(line_instance(15)[1])
    assert flow15.ok
    assert time.time() - start < 120.0


@pytest.mark.acceptance("C5 one balance constraint per flow, state and layer")
def test_flow_constraint_counts():
    for seed in range(10):
        klass = ORACLE_CLASSES[seed % len(ORACLE_CLASSES)]
        net, spec = random_oracle_instance(seed, klass)
        counts = assemble(spec).tag_counts()
        per_flow = len(net.states) * (spec.T + 1)
        case = f"seed={seed} class={klass}"
        assert counts.get("flow_balance", 0) == \
            len(spec.data_flow_ids()) * per_flow, case
        expected_master = per_flow if spec.information_consistent else 0
        assert counts.get("master_flow", 0) == expected_master, case


@pytest.mark.acceptance("C6 clustering invariants hold on 100 random worlds")
def test_clustering_invariants_at_scale():
    start = time.time()
    for seed in range(100):
        net, agents = random_cluster_graph(seed)
        k = random.Random(f"acc6:{seed}").randint(1, agents.count)
        clustering = cluster_instance(net, agents, k=k)
        ids = clustering.cluster_ids()
        case = f"seed={seed} k={k}"

        members = sorted(r for cid in ids for r in clustering.groups[cid])
        assert members == list(range(agents.count)), case
        seen: set[str] = set()
        for cid in ids:
            states = set(clustering.state_sets[cid])
            assert not states & seen, case
            seen |= states
            assert all(agents.initial[r] in states
                       for r in clustering.groups[cid]), case
            assert len(weak_components(net, states)) == 1, case
        assert seen | set(clustering.unassigned) == set(net.states), case

        assert clustering.parents[1] is None and 0 in clustering.groups[1], case
        for cid in ids:
            if cid == 1:
                continue
            pid = clustering.parents[cid]
            assert pid in ids, case
            u, v = clustering.activation_edges[cid]
            assert (u, v) in net.comm, case
            assert u in clustering.state_sets[pid], case
            assert v == agents.initial[clustering.submasters[cid]], case
            assert clustering.submasters[cid] in clustering.groups[cid], case
    assert time.time() - start < 120.0


@pytest.mark.acceptance("C7 a 100-state world is fully explored and certified")
def test_exploration_end_to_end():
    truth, agents, base = exploration_world(seed=0, n_states=100, n_agents=10)
    log = run_exploration(truth, agents, base)
    assert log.status == "complete"
    assert log.coverage == 1.0
    assert log.base_coverage == 1.0
    assert log.all_verified
    assert log.max_solve_time <= 60.0
    assert 2 <= log.cycles <= 27
    assert len(log.subproblems) <= 144


@pytest.mark.acceptance("C8 verifier catches seeded plan corruptions")
def test_mutation_sensitivity():
    dropped_event_flips = 0
    early_departure_flips = 0
    for seed in range(120):
        for klass in ("p2", "p2_awareness"):
            net, spec = random_oracle_instance(seed, klass)
            _, result, plan = solve_problem(spec)
            if plan is None or not result.ok:
                continue

            # deleting a load-bearing comm event must break declared delivery
            report = verify.information_reachability(plan, spec)
            if dropped_event_flips < 20 and report.all_reachable:
                for idx in range(len(plan.comm_events)):
                    events = (plan.comm_events[:idx]
                              + plan.comm_events[idx + 1:])
                    mutated = dataclasses.replace(plan, comm_events=events)
                    if not verify.information_reachability(
                            mutated, spec).all_reachable:
                        dropped_event_flips += 1

            # a gated agent departing one step early must fail consistency
            if verify.check_consistency(plan, spec):
                continue
            gated = [r for r in range(spec.agents.count)
                     if spec.agents.initial[r]
                     not in spec.agents.master_states()]
            for r in gated:
                path = plan.paths[r]
                t0 = next((t for t in range(1, len(path))
                           if path[t] != path[t - 1]), None)
                if t0 is None or t0 < 2:
                    continue    # departs immediately; no earlier step exists
                shifted = path[:t0 - 1] + path[t0:] + (path[-1],)
                mutated = dataclasses.replace(
                    plan, paths={**plan.paths, r: shifted})
                if verify.check_consistency(mutated, spec):
                    early_departure_flips += 1

    assert dropped_event_flips >= 12
    assert early_departure_flips >= 8
    assert dropped_event_flips + early_departure_flips >= 20
