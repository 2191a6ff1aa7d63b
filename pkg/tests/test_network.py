"""Network construction, time extension, metrics, and export."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from icplan.errors import InstanceError
from icplan.io import network_to_dict
from icplan.network import (all_pairs_mobility_distance, betweenness_centrality,
                            build_network, load_network,
                            shortest_mobility_distance, time_extended, to_dot)

from _helpers import bellman_ford, line_network, random_net


# -- construction -----------------------------------------------------------


def test_build_adds_free_self_loops():
    net = line_network(3)
    for s in net.states:
        assert net.mobility[(s, s)] == 0.0


def test_explicit_self_loop_wins_over_default():
    net = build_network(["a", "b"], [("a", "a", 2.0), ("a", "b", 1.0)], [])
    assert net.mobility[("a", "a")] == 2.0
    assert net.mobility[("b", "b")] == 0.0


def test_self_loops_opt_out():
    net = build_network(["a", "b"], [("a", "b", 1.0)], [], self_loops=False)
    assert ("a", "a") not in net.mobility


def test_neighbors_respect_direction_and_relation():
    net = build_network(["a", "b", "c"],
                        [("a", "b", 1.0), ("c", "b", 1.0)],
                        [("b", "c", 0.0)], self_loops=False)
    assert net.neighbors("a", "succ", "mobility") == ("b",)
    assert net.neighbors("b", "pred", "mobility") == ("a", "c")
    assert net.neighbors("b", "succ", "comm") == ("c",)
    assert net.neighbors("c", "pred", "comm") == ("b",)
    assert net.neighbors("a", "succ", "comm") == ()


def test_duplicate_states_rejected():
    with pytest.raises(InstanceError):
        build_network(["a", "a"], [], [])


def test_empty_state_set_rejected():
    with pytest.raises(InstanceError):
        build_network([], [], [])


def test_dangling_edge_rejected():
    with pytest.raises(InstanceError):
        build_network(["a"], [("a", "zzz", 1.0)], [])
    with pytest.raises(InstanceError):
        build_network(["a"], [], [("zzz", "a", 0.0)])


def test_negative_weight_rejected():
    with pytest.raises(InstanceError):
        build_network(["a", "b"], [("a", "b", -1.0)], [])


def test_unknown_state_lookup_raises():
    net = line_network(2)
    with pytest.raises(InstanceError):
        net.index("nope")


def test_cost_overrides_apply_at_their_layer_only():
    net = build_network(["a", "b"], [("a", "b", 1.0)], [("a", "b", 2.0)],
                        mobility_overrides={(1, "a", "b"): 5.0},
                        comm_overrides={(2, "a", "b"): 0.5})
    assert net.mobility_cost(0, "a", "b") == 1.0
    assert net.mobility_cost(1, "a", "b") == 5.0
    assert net.comm_cost(0, "a", "b") == 2.0
    assert net.comm_cost(2, "a", "b") == 0.5


# -- time extension ----------------------------------------------------------


def test_time_extended_counts():
    net = random_net(1, n=6)
    T = 3
    te = time_extended(net, T)
    assert len(te.vertices) == len(net.states) * (T + 1)
    assert len(te.mobility_arcs) == len(net.mobility) * T
    assert len(te.comm_arcs) == len(net.comm) * (T + 1)


def test_time_extended_horizon_zero_has_no_motion():
    net = line_network(3)
    te = time_extended(net, 0)
    assert len(te.mobility_arcs) == 0
    assert len(te.comm_arcs) == len(net.comm)
    assert all(t == 0 for (_, t) in te.vertices)


def test_time_extended_rejects_negative_horizon():
    with pytest.raises(ValueError):
        time_extended(line_network(2), -1)


def test_time_extended_arcs_are_layered():
    net = line_network(3)
    te = time_extended(net, 2)
    assert all(0 <= t < 2 for (_, _, t) in te.mobility_arcs)
    assert all(0 <= t <= 2 for (_, _, t) in te.comm_arcs)


# -- shortest paths and centrality -------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_shortest_distance_matches_bellman_ford(seed):
    net = random_net(seed, n=9, extra=0.7)
    ref = bellman_ford(net, net.states[0])
    for b in net.states:
        got = shortest_mobility_distance(net, net.states[0], b)
        assert got == pytest.approx(ref[b]) or (math.isinf(got) and math.isinf(ref[b]))


def test_shortest_distance_unreachable_is_inf():
    net = build_network(["a", "b"], [], [])
    assert math.isinf(shortest_mobility_distance(net, "a", "b"))


def test_shortest_distance_uses_layer_costs():
    net = build_network(["a", "b"], [("a", "b", 1.0)], [],
                        mobility_overrides={(2, "a", "b"): 7.0})
    assert shortest_mobility_distance(net, "a", "b", t=0) == 1.0
    assert shortest_mobility_distance(net, "a", "b", t=2) == 7.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_all_pairs_agrees_with_single_source(seed):
    net = random_net(seed, n=7)
    table = all_pairs_mobility_distance(net)
    for a in net.states:
        for b in net.states:
            expect = shortest_mobility_distance(net, a, b)
            got = table[a].get(b, float("inf"))
            assert got == pytest.approx(expect) or (math.isinf(got) and math.isinf(expect))


def test_betweenness_on_a_line_is_hand_computable():
    net = line_network(5)
    scores = betweenness_centrality(net)
    assert scores == {"s0": 0.0, "s1": 6.0, "s2": 8.0, "s3": 6.0, "s4": 0.0}


def _enumerated_betweenness(net):
    """Reference betweenness via exhaustive shortest-path enumeration."""
    scores = {s: 0.0 for s in net.states}
    for u in net.states:
        dist = bellman_ford(net, u)
        for v in net.states:
            if v == u or math.isinf(dist[v]):
                continue
            paths = []

            def dfs(node, cost, path):
                if cost > dist[v] + 1e-9:
                    return
                if node == v and abs(cost - dist[v]) < 1e-9:
                    paths.append(tuple(path))
                    return
                for w in net.neighbors(node, "succ", "mobility"):
                    if w != node:
                        dfs(w, cost + net.mobility_cost(0, node, w), path + [w])

            dfs(u, 0.0, [u])
            for path in paths:
                for w in path[1:-1]:
                    scores[w] += 1.0 / len(paths)
    return scores


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_betweenness_matches_path_enumeration(seed):
    net = random_net(seed, n=6, extra=0.6)
    ref = _enumerated_betweenness(net)
    got = betweenness_centrality(net)
    for s in net.states:
        assert got[s] == pytest.approx(ref[s], abs=1e-9)


# -- export and JSON round trip ----------------------------------------------


def test_to_dot_mentions_states_and_styles():
    net = line_network(3)
    dot = to_dot(net, name="tiny")
    assert dot.startswith("digraph")
    for s in net.states:
        assert s in dot
    assert "dashed" in dot   # communication edges are visually distinct


def test_network_json_round_trip():
    net = random_net(5, n=7, comm_cost=(0, 2), mirror=False)
    back = load_network(network_to_dict(net))
    assert back.states == net.states
    assert back.mobility == net.mobility
    assert back.comm == net.comm


def test_load_network_rejects_malformed_input():
    with pytest.raises(InstanceError):
        load_network({"mobility_edges": []})                      # no states
    with pytest.raises(InstanceError):
        load_network({"states": ["a"], "mobility_edges": [{"to": "a"}]})
    with pytest.raises(InstanceError):
        load_network("{not json")
    with pytest.raises(InstanceError):
        load_network("[1, 2]")                                    # root not an object
