"""Plan verification: dynamics, flow certificates, reachability, consistency."""

import warnings

import pytest

from icplan.errors import GuardExceeded, UnbalancedFlowError
from icplan.ilp import MASTER_FLOW, AgentConfig, ProblemSpec
from icplan.solver import solve_problem
from icplan.verify import (PlanSolution, agents_received, brute_force_solve,
                           check_consistency, check_dynamics, check_flows,
                           decompose_flows, information_reachability,
                           load_solution, master_token_layers, save_solution,
                           solution_from_dict, solution_to_dict)

from _helpers import line_network, relay_spec


def _mutate_path(plan, r, path):
    paths = dict(plan.paths)
    paths[r] = tuple(path)
    return PlanSolution(paths=paths, comm_events=plan.comm_events,
                        flow_moves=plan.flow_moves, objective=plan.objective,
                        reward_flags=plan.reward_flags)


@pytest.fixture(scope="module")
def gated_relay():
    """Line of four; the master sits at one end and token coverage is staged.

    The token covers s1 immediately (agent 1 sits next to the master), but
    reaches agent 2 at s3 only after agent 1 carries it to s2 at t=1.
    """
    net = line_network(4)
    agents = AgentConfig(count=3, initial={0: "s0", 1: "s1", 2: "s3"},
                         masters=frozenset({0}), static=frozenset({0}))
    spec = ProblemSpec(net=net, agents=agents, T=2, src=(0,), snk=(2,),
                       information_consistent=True)
    plan = PlanSolution(paths={0: ("s0", "s0", "s0"),
                               1: ("s1", "s2", "s2"),
                               2: ("s3", "s3", "s2")})
    return spec, plan


# -- dynamics -----------------------------------------------------------------


def test_solved_plan_passes_dynamics(line4_solution):
    spec, _, _, plan = line4_solution
    assert check_dynamics(plan, spec) == []


def test_dynamics_catches_teleport(line4_solution):
    spec, _, _, plan = line4_solution
    path = list(plan.paths[0])
    path[-1] = "s3"                                 # s0/s1 -> s3 is never an edge
    bad = check_dynamics(_mutate_path(plan, 0, path), spec)
    assert any("no mobility edge" in msg for msg in bad)


def test_dynamics_catches_wrong_start(line4_solution):
    spec, _, _, plan = line4_solution
    path = ("s1",) + plan.paths[0][1:]
    bad = check_dynamics(_mutate_path(plan, 0, path), spec)
    assert any("starts at" in msg for msg in bad)


def test_dynamics_catches_bad_length(line4_solution):
    spec, _, _, plan = line4_solution
    bad = check_dynamics(_mutate_path(plan, 0, plan.paths[0] + ("s0",)), spec)
    assert any("path length" in msg for msg in bad)


def test_dynamics_catches_missing_agent(line4_solution):
    spec, _, _, plan = line4_solution
    paths = {r: p for r, p in plan.paths.items() if r != 1}
    bad = check_dynamics(PlanSolution(paths=paths), spec)
    assert any("paths cover agents" in msg for msg in bad)


def test_dynamics_catches_moving_static_agent(gated_relay):
    spec, plan = gated_relay
    bad = check_dynamics(_mutate_path(plan, 0, ("s0", "s1", "s1")), spec)
    assert any("static but moves" in msg for msg in bad)


def test_dynamics_catches_shared_state_collision():
    net = line_network(2)
    agents = AgentConfig(count=2, initial={0: "s0", 1: "s1"})
    spec = ProblemSpec(net=net, agents=agents, T=1, src=(0,), snk=(1,),
                       collision_avoidance=True)
    plan = PlanSolution(paths={0: ("s0", "s1"), 1: ("s1", "s1")})
    bad = check_dynamics(plan, spec)
    assert any("share" in msg for msg in bad)


def test_dynamics_catches_swap_collision():
    net = line_network(2)
    agents = AgentConfig(count=2, initial={0: "s0", 1: "s1"})
    spec = ProblemSpec(net=net, agents=agents, T=1, src=(0,), snk=(1,),
                       collision_avoidance=True)
    plan = PlanSolution(paths={0: ("s0", "s1"), 1: ("s1", "s0")})
    bad = check_dynamics(plan, spec)
    assert any("swap" in msg for msg in bad)


# -- flow certificate ----------------------------------------------------------


def test_solved_plan_passes_flow_checks(line4_solution):
    spec, _, _, plan = line4_solution
    assert check_flows(plan, spec) == []


def test_dropping_a_comm_event_breaks_the_balance(line4_solution):
    spec, _, _, plan = line4_solution
    carrying = [ev for ev in plan.comm_events if ev[4] > 1e-3]
    assert carrying
    events = tuple(ev for ev in plan.comm_events if ev != carrying[0])
    broken = PlanSolution(paths=plan.paths, comm_events=events,
                          flow_moves=plan.flow_moves)
    assert any("imbalance" in msg for msg in check_flows(broken, spec))


def test_comm_event_on_unoccupied_state_is_flagged(line4_solution):
    spec, _, _, plan = line4_solution
    events = plan.comm_events + ((0, "s1", "s2", 0, 0.0),)  # nobody at s1 at t=0
    broken = PlanSolution(paths=plan.paths, comm_events=events,
                          flow_moves=plan.flow_moves)
    assert any("unoccupied" in msg for msg in check_flows(broken, spec))


def test_flow_move_must_ride_an_agent(line4_solution):
    spec, _, _, plan = line4_solution
    moves = plan.flow_moves + ((0, "s3", "s2", 0, 0.0),)
    broken = PlanSolution(paths=plan.paths, comm_events=plan.comm_events,
                          flow_moves=moves)
    assert any("not ridden" in msg for msg in check_flows(broken, spec))


def test_decomposition_covers_every_data_flow(line4_solution):
    spec, _, _, plan = line4_solution
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")           # zero-cost circulations are noise
        chains = decompose_flows(plan, spec)
    for fid in spec.data_flow_ids():
        assert fid in chains
        total = sum(amount for _, amount in chains[fid])
        assert total == pytest.approx(len(spec.snk), abs=1e-6)
        for path, amount in chains[fid]:
            assert amount > 0
            assert path[0] == (0, plan.paths[fid][0])
            terminal_states = {plan.paths[r][spec.T] for r in spec.snk}
            assert path[-1][0] == spec.T and path[-1][1] in terminal_states
            times = [t for t, _ in path]
            assert times == sorted(times)


def test_accumulated_leakage_raises_unbalanced_flow():
    # 120 sub-tolerance events leak 1.2e-4 units out of s0: each is too small
    # to count as demand, but together they exceed the balance tolerance
    states = [f"s{i}" for i in range(121)]
    events = tuple((0, "s0", s, 7, 1.0e-6) for s in states[1:])
    plan = PlanSolution(paths={0: ("s0",)}, comm_events=events)
    with pytest.raises(UnbalancedFlowError) as err:
        decompose_flows(plan)
    assert err.value.state == "s0"
    assert err.value.imbalance == pytest.approx(-1.2e-4, rel=1e-3)


# -- reachability ----------------------------------------------------------------


def test_declared_reachability_with_witnesses(line4_solution):
    spec, _, _, plan = line4_solution
    report = information_reachability(plan, spec, events="declared")
    assert report.all_reachable
    assert report.unreachable() == []
    for (i, j), witness in report.witnesses.items():
        assert witness[0][1] == plan.paths[i][0]
        assert witness[-1] == (spec.T, plan.paths[j][spec.T])
        times = [t for t, _ in witness]
        assert times == sorted(times)


def test_potential_events_can_reach_where_declared_cannot():
    _, spec = relay_spec(green_at="s2", T=1)
    plan = PlanSolution(paths={0: ("s0", "s1"), 1: ("s2", "s2"), 2: ("s3", "s3")})
    assert check_dynamics(plan, spec) == []
    potential = information_reachability(plan, spec, events="potential")
    declared = information_reachability(plan, spec, events="declared")
    assert potential.all_reachable
    assert not declared.all_reachable
    assert (0, 2) in declared.unreachable()


def test_reachability_rejects_unknown_event_mode(line4_solution):
    spec, _, _, plan = line4_solution
    with pytest.raises(ValueError):
        information_reachability(plan, spec, events="psychic")


def test_reachability_with_explicit_pair_subsets(line4_solution):
    spec, _, _, plan = line4_solution
    report = information_reachability(plan, spec, src=[0], snk=[2])
    assert set(report.pair_matrix) == {(0, 2)}


# -- master token and consistency --------------------------------------------------


def test_token_layers_stage_through_the_relay(gated_relay):
    spec, plan = gated_relay
    layers = master_token_layers(spec, plan.paths)
    assert layers[0] == frozenset({"s0", "s1"})
    assert "s3" not in layers[0]
    assert "s3" in layers[1]


def test_agents_received_reports_first_coverage(gated_relay):
    spec, plan = gated_relay
    assert agents_received(plan, spec) == {0: 0, 1: 0, 2: 1}


def test_consistent_plan_passes(gated_relay):
    spec, plan = gated_relay
    assert check_consistency(plan, spec) == []


def test_early_departure_is_flagged(gated_relay):
    spec, plan = gated_relay
    early = _mutate_path(plan, 2, ("s3", "s2", "s2"))
    bad = check_consistency(early, spec)
    assert any("before master token arrival" in msg for msg in bad)


def test_untokened_sender_is_flagged(gated_relay):
    spec, plan = gated_relay
    events = ((0, "s3", "s2", 0, 1.0),)
    chatty = PlanSolution(paths=plan.paths, comm_events=events)
    bad = check_consistency(chatty, spec)
    assert any("without master token" in msg for msg in bad)


def test_consistency_is_vacuous_without_the_flag(line4_solution):
    spec, _, _, plan = line4_solution
    assert check_consistency(plan, spec) == []


def test_solved_consistent_instance_passes_all_checks():
    _, spec = relay_spec(masters=(0,), information_consistent=True, T=3)
    model, result, plan = solve_problem(spec)
    assert result.ok
    assert check_dynamics(plan, spec) == []
    assert check_flows(plan, spec) == []
    assert check_consistency(plan, spec) == []
    assert information_reachability(plan, spec).all_reachable
    assert MASTER_FLOW in {ev[3] for ev in plan.comm_events} | {mv[3] for mv in plan.flow_moves}


# -- JSON round trip -----------------------------------------------------------------


def test_solution_round_trip(tmp_path, line4_solution):
    _, _, _, plan = line4_solution
    path = tmp_path / "plan.json"
    save_solution(plan, path)
    back = load_solution(path)
    assert back.paths == plan.paths
    assert back.comm_events == plan.comm_events
    assert back.flow_moves == plan.flow_moves
    assert back.objective == pytest.approx(plan.objective)


def test_solution_round_trip_keeps_special_flow_ids():
    plan = PlanSolution(paths={0: ("s0", "s0")},
                        comm_events=((0, "s0", "s0", MASTER_FLOW, 1.0),
                                     (1, "s0", "s0", "comm", 1.0),
                                     (1, "s0", "s0", 3, 2.0)))
    back = solution_from_dict(solution_to_dict(plan))
    assert back.comm_events == plan.comm_events


def test_solution_round_trip_restores_integer_agent_keys():
    plan = PlanSolution(paths={0: ("s0",), 1: ("s1",)})
    back = solution_from_dict(solution_to_dict(plan))
    assert sorted(back.paths) == [0, 1]


# -- brute-force oracle ----------------------------------------------------------------


def test_oracle_matches_solver_on_the_relay_line(line4_solution):
    spec, _, result, _ = line4_solution
    oracle = brute_force_solve(spec)
    assert oracle.status == "optimal"
    assert oracle.objective == pytest.approx(result.objective, abs=1e-6)


def test_oracle_reward_tradeoff_by_hand():
    net = line_network(3)
    agents = AgentConfig(count=1, initial={0: "s0"})
    spec = ProblemSpec(net=net, agents=agents, T=1,
                       rewards={("s1", 1): 5.0})
    oracle = brute_force_solve(spec)
    assert oracle.status == "optimal"
    assert oracle.objective == pytest.approx(4.0)     # reward 5, one move costs 1
    assert oracle.paths[0] == ("s0", "s1")
    _, result, _ = solve_problem(spec)
    assert result.objective == pytest.approx(4.0, abs=1e-6)


def test_oracle_and_solver_agree_on_collision_pruning():
    net = line_network(2)
    agents = AgentConfig(count=2, initial={0: "s0", 1: "s1"})
    reward = {("s1", 2): 10.0}
    plain = ProblemSpec(net=net, agents=agents, T=1, rewards=reward)
    guarded = ProblemSpec(net=net, agents=agents, T=1, rewards=reward,
                          collision_avoidance=True)
    # without collision rules both agents meet at s1 and collect 10 - 1 = 9;
    # with them the meeting is forbidden and staying put (0) is optimal
    assert brute_force_solve(plain).objective == pytest.approx(9.0)
    assert brute_force_solve(guarded).objective == pytest.approx(0.0)
    assert solve_problem(plain)[1].objective == pytest.approx(9.0, abs=1e-6)
    assert solve_problem(guarded)[1].objective == pytest.approx(0.0, abs=1e-6)


def test_oracle_reports_infeasible():
    from icplan.network import build_network
    net = build_network(["a", "b"], [], [])
    agents = AgentConfig(count=2, initial={0: "a", 1: "b"})
    spec = ProblemSpec(net=net, agents=agents, T=1, src=(0,), snk=(1,))
    assert brute_force_solve(spec).status == "infeasible"


def test_oracle_guard_refuses_large_joint_spaces(line4):
    _, spec = line4
    with pytest.raises(GuardExceeded):
        brute_force_solve(spec, guard=5)
