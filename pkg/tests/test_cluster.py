"""Agent clustering, territory growth, and the activation hierarchy."""

import json

import numpy as np
import pytest

from icplan.cluster import (Clustering, _farthest_first_kmeans, _touching_cluster,
                            build_hierarchy, cluster_instance, cluster_with_retry,
                            clusters_to_dot, grow_state_clusters, prune_dead_states,
                            similarity_matrix, spectral_cluster_agents,
                            weak_components)
from icplan.ilp import AgentConfig
from icplan.instances import random_cluster_graph
from icplan.network import build_network

from _helpers import line_network


def _line_agents(n, positions, masters=(0,), static=(0,)):
    net = line_network(n)
    agents = AgentConfig(count=len(positions),
                         initial={r: f"s{p}" for r, p in enumerate(positions)},
                         masters=frozenset(masters), static=frozenset(static))
    return net, agents


# -- similarity ----------------------------------------------------------------


def test_similarity_is_inverse_distance():
    net = line_network(5)
    sim = similarity_matrix(net, ["s0", "s1", "s4"])
    assert sim[0, 1] == pytest.approx(1.0)
    assert sim[0, 2] == pytest.approx(1.0 / 4.0)
    assert sim[1, 2] == pytest.approx(1.0 / 3.0)
    assert np.allclose(sim, sim.T)
    assert np.all(np.diag(sim) == 0.0)


def test_colocated_agents_score_above_every_pair():
    net = line_network(4)
    sim = similarity_matrix(net, ["s0", "s0", "s3"])
    assert sim[0, 1] == pytest.approx(10.0 * (1.0 / 3.0))
    assert sim[0, 1] > sim[0, 2] and sim[0, 1] > sim[1, 2]


def test_directed_similarity_uses_the_cheaper_direction():
    net = build_network(["a", "b"], [("a", "b", 1.0), ("b", "a", 9.0)], [])
    sim = similarity_matrix(net, ["a", "b"])
    assert sim[0, 1] == pytest.approx(1.0)


def test_kmeans_is_deterministic():
    rng = np.random.default_rng(7)
    rows = rng.normal(size=(10, 3))
    first = _farthest_first_kmeans(rows, 3)
    second = _farthest_first_kmeans(rows, 3)
    assert np.array_equal(first, second)
    assert set(first) <= {0, 1, 2}


def test_spectral_grouping_pairs_nearby_agents():
    net, agents = _line_agents(12, [0, 1, 10, 11])
    groups = spectral_cluster_agents(net, agents, k=2)
    assert groups == {1: (0, 1), 2: (2, 3)}


def test_master_group_is_always_cluster_one():
    net, agents = _line_agents(12, [0, 1, 10, 11], masters=(3,), static=(3,))
    groups = spectral_cluster_agents(net, agents, k=2)
    assert 3 in groups[1]


# -- territory growth -------------------------------------------------------------


def test_territories_split_the_line_between_seeds():
    net = line_network(6)
    groups = {1: (0,), 2: (1,)}
    initial = {0: "s0", 1: "s5"}
    state_sets, unassigned = grow_state_clusters(net, groups, initial)
    assert state_sets[1] == ("s0", "s1", "s2")
    assert state_sets[2] == ("s3", "s4", "s5")
    assert unassigned == ()


def test_unreachable_states_stay_unassigned():
    net = build_network(["a", "b", "x", "y"],
                        [("a", "b", 1.0), ("b", "a", 1.0),
                         ("x", "y", 1.0), ("y", "x", 1.0)], [])
    state_sets, unassigned = grow_state_clusters(net, {1: (0,)}, {0: "a"})
    assert state_sets[1] == ("a", "b")
    assert unassigned == ("x", "y")


def test_weak_components_on_a_split_set():
    net = line_network(6)
    comps = weak_components(net, ["s0", "s1", "s4", "s5"])
    assert sorted(map(sorted, comps)) == [["s0", "s1"], ["s4", "s5"]]


def test_cluster_with_retry_keeps_territories_connected():
    net, agents = random_cluster_graph(11)[0], random_cluster_graph(11)[1]
    groups, state_sets, unassigned, rounds = cluster_with_retry(net, agents, 3)
    for cid, states in state_sets.items():
        if states:
            assert len(weak_components(net, states)) == 1
    assert rounds >= 0


# -- hierarchy ----------------------------------------------------------------------


def test_hierarchy_activates_over_comm_edges():
    net, agents = _line_agents(8, [0, 3, 7])
    groups, state_sets, _, _ = cluster_with_retry(net, agents, 3)
    parents, submasters, edges = build_hierarchy(net, agents, groups, state_sets)
    assert parents[1] is None
    assert submasters[1] == 0
    for cid, pid in parents.items():
        if pid is None:
            continue
        u, v = edges[cid]
        assert u in state_sets[pid]
        assert (u, v) in net.comm
        assert v == agents.initial[submasters[cid]]
        assert submasters[cid] in groups[cid]


def test_touching_cluster_prefers_activated_neighbours():
    net = line_network(6)
    state_sets = {1: ("s0", "s1"), 2: ("s2", "s3"), 3: ("s4", "s5")}
    assert _touching_cluster(net, state_sets, 3, preferred={2}) == 2
    assert _touching_cluster(net, state_sets, 3, preferred={1}) == 2
    assert _touching_cluster(net, state_sets, 2, preferred={1}) == 1


def test_orphan_clusters_are_absorbed():
    # comm edges exist only near the base, so the far group cannot activate
    states = [f"s{i}" for i in range(8)]
    mobility = []
    for a, b in zip(states, states[1:]):
        mobility += [(a, b, 1.0), (b, a, 1.0)]
    comm = [("s0", "s1", 0.0), ("s1", "s0", 0.0)]
    net = build_network(states, mobility, comm)
    agents = AgentConfig(count=2, initial={0: "s0", 1: "s7"},
                         masters=frozenset({0}), static=frozenset({0}))
    clustering = cluster_instance(net, agents, k=2)
    assert clustering.cluster_ids() == [1]
    assert clustering.groups[1] == (0, 1)
    assert clustering.parents == {1: None}


# -- full pipeline invariants ----------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_cluster_instance_invariants(seed):
    net, agents = random_cluster_graph(seed)
    clustering = cluster_instance(net, agents)
    ids = clustering.cluster_ids()

    members = sorted(r for cid in ids for r in clustering.groups[cid])
    assert members == list(range(agents.count))

    seen: set[str] = set()
    for cid in ids:
        states = set(clustering.state_sets[cid])
        assert not states & seen
        seen |= states
        for r in clustering.groups[cid]:
            assert agents.initial[r] in states
        assert len(weak_components(net, states)) == 1
    assert seen | set(clustering.unassigned) == set(net.states)

    assert clustering.parents[1] is None
    assert 0 in clustering.groups[1]
    assert clustering.active_ids() == ids
    assert clustering.inactive_ids() == []
    for cid in ids:
        if cid == 1:
            continue
        pid = clustering.parents[cid]
        assert pid in ids
        u, v = clustering.activation_edges[cid]
        assert (u, v) in net.comm
        assert u in clustering.state_sets[pid]
        assert v == agents.initial[clustering.submasters[cid]]
        assert clustering.submasters[cid] in clustering.groups[cid]
        assert clustering.depth(cid) == clustering.depth(pid) + 1


def test_clustering_lookup_helpers():
    net, agents = _line_agents(8, [0, 7])
    clustering = cluster_instance(net, agents, k=2)
    for cid in clustering.cluster_ids():
        for r in clustering.groups[cid]:
            assert clustering.cluster_of_agent(r) == cid
        for s in clustering.state_sets[cid]:
            assert clustering.cluster_of_state(s) == cid
    assert clustering.cluster_of_state("missing") is None
    data = json.loads(clustering.to_json())
    assert set(data) == {"clusters", "unassigned"}
    by_id = {entry["id"]: entry for entry in data["clusters"]}
    for cid in clustering.cluster_ids():
        assert by_id[cid]["agents"] == list(clustering.groups[cid])
        assert by_id[cid]["submaster"] == clustering.submasters[cid]


# -- pruning and export -------------------------------------------------------------


def test_prune_keeps_paths_between_protected_states():
    net = line_network(6)
    kept = prune_dead_states(net, protected={"s2", "s4"})
    assert kept == frozenset({"s2", "s3", "s4"})


def test_prune_removes_everything_without_protection():
    net = line_network(4)
    assert prune_dead_states(net) == frozenset()


def test_prune_keeps_cycles():
    net = build_network(["a", "b", "c"],
                        [("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0)], [])
    assert prune_dead_states(net) == frozenset({"a", "b", "c"})


def test_clusters_to_dot_shows_territories_and_activations():
    net, agents = _line_agents(8, [0, 7])
    clustering = cluster_instance(net, agents, k=2)
    dot = clusters_to_dot(net, clustering, initial=agents.initial)
    assert dot.startswith("digraph")
    assert "fillcolor" in dot
    if len(clustering.cluster_ids()) > 1:
        assert "activate" in dot
    assert "a0*" in dot            # the root submaster is starred
