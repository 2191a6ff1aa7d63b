"""Cluster decomposition: agent groups, state territories and a relay tree.

Agents are grouped by spectral clustering on a proximity matrix (inverse
shortest travel distance between their initial states), the state space is
partitioned by growing each group's territory outward from its agents, and
a hierarchy is built by activating clusters that can be reached over a
communication edge from an already-active cluster's territory.  Each
activated cluster designates a submaster: the receiving agent closest to
its parent, which acts as the cluster's local plan source and report sink.
"""

from __future__ import annotations

import heapq
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceError
from .ilp import AgentConfig
from .network import COMM, MOBILITY, MobilityCommNetwork

CO_LOCATED_FACTOR = 10.0    # similarity assigned to co-located agents
MAX_SPLIT_ROUNDS = 32


@dataclass
class Clustering:
    groups: dict[int, tuple[int, ...]]
    state_sets: dict[int, tuple[str, ...]]
    submasters: dict[int, int]
    parents: dict[int, int | None]                 # active clusters only
    activation_edges: dict[int, tuple[str, str]]
    unassigned: tuple[str, ...] = ()
    split_rounds: int = 0

    def cluster_ids(self):
        return sorted(self.groups)

    def active_ids(self):
        return sorted(self.parents)

    def inactive_ids(self):
        return sorted(set(self.groups) - set(self.parents))

    def cluster_of_agent(self, r: int) -> int:
        for cid, group in self.groups.items():
            if r in group:
                return cid
        raise KeyError(r)

    def cluster_of_state(self, s: str) -> int | None:
        for cid, states in self.state_sets.items():
            if s in states:
                return cid
        return None

    def depth(self, cid: int) -> int:
        d, cur = 0, cid
        while self.parents.get(cur) is not None:
            cur = self.parents[cur]
            d += 1
        return d

    def to_dict(self) -> dict:
        return {
            "clusters": [{
                "id": cid,
                "agents": list(self.groups[cid]),
                "states": list(self.state_sets[cid]),
                "submaster": self.submasters.get(cid),
                "parent": self.parents.get(cid),
                "activation_edge": (list(self.activation_edges[cid])
                                    if cid in self.activation_edges else None),
                "active": cid in self.parents,
            } for cid in self.cluster_ids()],
            "unassigned": list(self.unassigned),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# -- agent clustering -----------------------------------------------------


def _dijkstra_to(net: MobilityCommNetwork, target: str) -> dict[str, float]:
    """Distance from every state to `target` (Dijkstra on reversed edges)."""
    dist = {target: 0.0}
    heap = [(0.0, target)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, float("inf")):
            continue
        for v in net.neighbors(u, "pred", MOBILITY):
            if v == u:
                continue
            nd = d + net.mobility_cost(0, v, u)
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def similarity_matrix(net: MobilityCommNetwork, initial_states) -> np.ndarray:
    """Pairwise agent proximity: 1 / min(d(i->j), d(j->i)).

    Unreachable pairs score 0; co-located pairs score ten times the largest
    finite entry so they are pulled into the same cluster.
    """
    n = len(initial_states)
    to_state = {s: _dijkstra_to(net, s) for s in set(initial_states)}
    dist = np.full((n, n), np.inf)
    for i in range(n):
        for j in range(n):
            if i != j:
                dist[i, j] = to_state[initial_states[j]].get(
                    initial_states[i], float("inf"))
    sim = np.zeros((n, n))
    finite = []
    for i in range(n):
        for j in range(i + 1, n):
            m = min(dist[i, j], dist[j, i])
            if 0.0 < m < float("inf"):
                sim[i, j] = sim[j, i] = 1.0 / m
                finite.append(sim[i, j])
    cap = CO_LOCATED_FACTOR * (max(finite) if finite else 1.0)
    for i in range(n):
        for j in range(i + 1, n):
            if min(dist[i, j], dist[j, i]) == 0.0:
                sim[i, j] = sim[j, i] = cap
    return sim


def _farthest_first_kmeans(rows: np.ndarray, k: int, max_iter: int = 100):
    """Deterministic K-means: farthest-first init, Lloyd refinement."""
    n = len(rows)
    centers = [0]
    while len(centers) < k:
        d = np.min(np.linalg.norm(rows[:, None, :] - rows[None, centers, :],
                                  axis=2), axis=1)
        d[centers] = -1.0
        centers.append(int(np.argmax(d)))
    means = rows[centers].copy()
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d = np.linalg.norm(rows[:, None, :] - means[None, :, :], axis=2)
        new_labels = np.argmin(d, axis=1)
        if np.array_equal(new_labels, labels) and _ > 0:
            break
        labels = new_labels
        for c in range(k):
            members = rows[labels == c]
            if len(members):
                means[c] = members.mean(axis=0)
    return labels


def spectral_cluster_agents(net: MobilityCommNetwork, agents: AgentConfig,
                            k: int) -> dict[int, tuple[int, ...]]:
    """Group agents via the normalized Laplacian of the proximity matrix.

    Returns {cluster_id: agent_ids}; ids are 1-based and the cluster holding
    the (first) master agent - agent 0 when no master is flagged - is
    always cluster 1.
    """
    R = agents.count
    initial = [agents.initial[r] for r in range(R)]
    k = max(1, min(k, R))
    if k == 1 or R == 1:
        labels = np.zeros(R, dtype=int)
    else:
        A = similarity_matrix(net, initial)
        deg = A.sum(axis=1)
        with np.errstate(divide="ignore"):
            dinv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
        L = np.eye(R) - (dinv[:, None] * A * dinv[None, :])
        _, vecs = np.linalg.eigh(L)
        U = vecs[:, :k]
        norms = np.linalg.norm(U, axis=1)
        U = U / np.where(norms > 1e-12, norms, 1.0)[:, None]
        labels = _farthest_first_kmeans(U, k)
    raw: dict[int, list[int]] = {}
    for r in range(R):
        raw.setdefault(int(labels[r]), []).append(r)
    return _relabel(list(raw.values()), agents)


def _relabel(group_list, agents: AgentConfig) -> dict[int, tuple[int, ...]]:
    """Cluster holding the master first, then by smallest member id."""
    anchor = min(agents.masters) if agents.masters else 0
    group_list = [tuple(sorted(g)) for g in group_list if g]
    group_list.sort(key=lambda g: (anchor not in g, g[0]))
    return {cid: g for cid, g in enumerate(group_list, start=1)}


def _merge_shared_starts(groups: dict[int, tuple[int, ...]],
                         agents: AgentConfig) -> dict[int, tuple[int, ...]]:
    """Merge groups whose agents share an initial state (seed conflicts)."""
    merged = [set(g) for g in groups.values()]
    changed = True
    while changed:
        changed = False
        for i in range(len(merged)):
            for j in range(i + 1, len(merged)):
                si = {agents.initial[r] for r in merged[i]}
                sj = {agents.initial[r] for r in merged[j]}
                if si & sj:
                    merged[i] |= merged[j]
                    del merged[j]
                    changed = True
                    break
            if changed:
                break
    return _relabel([sorted(g) for g in merged], agents)


# -- state territory growth -------------------------------------------------


def _undirected_neighbors(net: MobilityCommNetwork, s: str):
    nbrs = (set(net.neighbors(s, "succ", MOBILITY))
            | set(net.neighbors(s, "pred", MOBILITY)))
    nbrs.discard(s)
    return nbrs


def grow_state_clusters(net: MobilityCommNetwork,
                        groups: dict[int, tuple[int, ...]],
                        initial: dict[int, str]):
    """Round-robin territory growth from each group's initial states.

    On its turn a cluster claims, among free states adjacent to its current
    territory, the one with the smallest travel distance to its nearest
    agent start (ties broken by state order).  Claiming only adjacent states
    keeps every territory component anchored at an agent start, which is
    what lets split-and-restart terminate.  States no territory can reach
    stay unassigned.
    """
    dist_to: dict[str, dict[str, float]] = {}
    for s in {initial[r] for g in groups.values() for r in g}:
        dist_to[s] = _dijkstra_to(net, s)

    assigned: dict[str, int] = {}
    for cid in sorted(groups):
        for r in groups[cid]:
            s = initial[r]
            if s in assigned and assigned[s] != cid:
                raise InstanceError(
                    f"groups {assigned[s]} and {cid} share initial state {s!r}")
            assigned[s] = cid
    free = {s for s in net.states if s not in assigned}
    fringe = {cid: set() for cid in groups}
    for s, cid in assigned.items():
        fringe[cid] |= _undirected_neighbors(net, s) & free

    def pull(cid, s):
        best = float("inf")
        for r in groups[cid]:
            best = min(best, dist_to[initial[r]].get(s, float("inf")))
        return best

    while free:
        progress = False
        for cid in sorted(groups):
            fringe[cid] &= free
            best = None
            for s in fringe[cid]:
                d = pull(cid, s)
                if d < float("inf") and (best is None or (d, net.index(s)) < best):
                    best = (d, net.index(s))
            if best is not None:
                s = net.states[best[1]]
                assigned[s] = cid
                free.discard(s)
                fringe[cid] |= _undirected_neighbors(net, s) & free
                progress = True
            if not free:
                break
        if not progress:
            break
    state_sets = {cid: tuple(s for s in net.states if assigned.get(s) == cid)
                  for cid in sorted(groups)}
    return state_sets, tuple(sorted(free, key=net.index))


def weak_components(net: MobilityCommNetwork, states) -> list[frozenset[str]]:
    """Weakly connected components of the induced mobility subgraph."""
    keep = set(states)
    seen: set[str] = set()
    out = []
    for s in sorted(keep, key=net.index):
        if s in seen:
            continue
        comp = {s}
        frontier = [s]
        while frontier:
            u = frontier.pop()
            nbrs = (set(net.neighbors(u, "succ", MOBILITY))
                    | set(net.neighbors(u, "pred", MOBILITY)))
            for v in nbrs:
                if v != u and v in keep and v not in comp:
                    comp.add(v)
                    frontier.append(v)
        seen |= comp
        out.append(frozenset(comp))
    return out


def cluster_with_retry(net: MobilityCommNetwork, agents: AgentConfig,
                       k: int | None = None):
    """Full grouping pipeline with split-and-restart on disconnected clusters.

    Returns (groups, state_sets, unassigned, split_rounds).
    """
    if k is None:
        k = math.ceil(agents.count / 4)
    groups = _merge_shared_starts(spectral_cluster_agents(net, agents, k), agents)
    rounds = 0
    while True:
        state_sets, unassigned = grow_state_clusters(net, groups, agents.initial)
        split_of = None
        for cid in sorted(groups):
            comps = weak_components(net, state_sets[cid])
            if len(comps) > 1:
                split_of = (cid, comps)
                break
        if split_of is None:
            return groups, state_sets, unassigned, rounds
        rounds += 1
        if rounds > MAX_SPLIT_ROUNDS:
            warnings.warn("cluster splitting did not converge; keeping last result")
            return groups, state_sets, unassigned, rounds
        cid, comps = split_of
        replacement = []
        for comp in comps:
            members = [r for r in groups[cid] if agents.initial[r] in comp]
            if members:
                replacement.append(members)
        new_groups = [list(groups[c]) for c in sorted(groups) if c != cid]
        new_groups.extend(replacement)
        groups = _merge_shared_starts(_relabel(new_groups, agents), agents)


# -- hierarchy -----------------------------------------------------------


def build_hierarchy(net: MobilityCommNetwork, agents: AgentConfig,
                    groups: dict[int, tuple[int, ...]],
                    state_sets: dict[int, tuple[str, ...]]):
    """Activate clusters over communication edges, designating submasters.

    A cluster activates when a communication edge leads from an active
    cluster's territory to one of its agents' initial states.  Its submaster
    is the eligible receiving agent nearest to the parent territory (ties by
    agent id).  Returns (parents, submasters, activation_edges).
    """
    root = 1
    anchor = min(agents.masters) if agents.masters else min(groups[root])
    parents: dict[int, int | None] = {root: None}
    submasters = {root: anchor if anchor in groups[root] else min(groups[root])}
    activation_edges: dict[int, tuple[str, str]] = {}

    dist_from_parent: dict[tuple[int, str], float] = {}

    def parent_dist(pid, s):
        if (pid, s) not in dist_from_parent:
            d = _dijkstra_to(net, s)
            dist_from_parent[(pid, s)] = min(
                (d.get(u, float("inf")) for u in state_sets[pid]),
                default=float("inf"))
        return dist_from_parent[(pid, s)]

    grew = True
    while grew:
        grew = False
        for cid in sorted(groups):
            if cid in parents:
                continue
            found = None
            for pid in sorted(parents):
                receivers = []
                for r in groups[cid]:
                    s_r = agents.initial[r]
                    feeds = [u for u in net.neighbors(s_r, "pred", COMM)
                             if u in state_sets[pid]]
                    if feeds:
                        u = min(feeds, key=net.index)
                        receivers.append((parent_dist(pid, s_r), r, (u, s_r)))
                if receivers:
                    receivers.sort()
                    found = (pid, receivers[0])
                    break
            if found is not None:
                pid, (_, r, edge) = found
                parents[cid] = pid
                submasters[cid] = r
                activation_edges[cid] = edge
                grew = True
    return parents, submasters, activation_edges


def _touching_cluster(net: MobilityCommNetwork, state_sets, orphan,
                      preferred) -> int:
    """Cluster whose territory borders the orphan's (preferring `preferred`)."""
    assigned = {s: cid for cid, states in state_sets.items()
                for s in states if cid != orphan}
    touching = set()
    for s in state_sets[orphan]:
        for v in _undirected_neighbors(net, s):
            cid = assigned.get(v)
            if cid is not None:
                touching.add(cid)
    for pool in (touching & set(preferred), touching):
        if pool:
            return min(pool)
    return 1


def cluster_instance(net: MobilityCommNetwork, agents: AgentConfig,
                     k: int | None = None) -> Clustering:
    """Cluster agents and states, then build the activation hierarchy.

    Clusters the hierarchy cannot activate (none of their agents sits within
    communication range of an active territory) are folded into a bordering
    activated cluster so that every agent stays plannable; the territory
    union keeps both connectivity and the partition intact, and in the worst
    case everything collapses into the root cluster, so absorption always
    terminates.
    """
    groups, state_sets, unassigned, rounds = cluster_with_retry(net, agents, k)
    while True:
        parents, submasters, activation_edges = build_hierarchy(
            net, agents, groups, state_sets)
        orphans = [cid for cid in sorted(groups) if cid not in parents]
        if not orphans:
            break
        o = orphans[0]
        target = _touching_cluster(net, state_sets, o, preferred=parents)
        merged = set(state_sets[target]) | set(state_sets[o])
        groups[target] = tuple(sorted(groups[target] + groups[o]))
        state_sets[target] = tuple(s for s in net.states if s in merged)
        del groups[o], state_sets[o]
    return Clustering(groups=groups, state_sets=state_sets,
                      submasters=submasters, parents=parents,
                      activation_edges=activation_edges,
                      unassigned=unassigned, split_rounds=rounds)


# -- dead-state pruning ----------------------------------------------------


def prune_dead_states(net: MobilityCommNetwork, states=None,
                      protected=frozenset()) -> frozenset[str]:
    """Iteratively strip unprotected leaf states (undirected degree <= 1)."""
    kept = set(net.states if states is None else states)
    protected = set(protected)
    changed = True
    while changed:
        changed = False
        for s in sorted(kept, key=net.index):
            if s in protected:
                continue
            nbrs = (set(net.neighbors(s, "succ", MOBILITY))
                    | set(net.neighbors(s, "pred", MOBILITY)))
            nbrs = {v for v in nbrs if v != s and v in kept}
            if len(nbrs) <= 1:
                kept.remove(s)
                changed = True
    return frozenset(kept)


def clusters_to_dot(net: MobilityCommNetwork, clustering: Clustering,
                    initial: dict[int, str] | None = None,
                    name: str = "clusters") -> str:
    """Graphviz view: states colored by cluster, agents listed in labels."""
    palette = ["#a6cee3", "#b2df8a", "#fb9a99", "#fdbf6f", "#cab2d6",
               "#ffff99", "#1f78b4", "#33a02c", "#e31a1c", "#ff7f00"]
    color_of = {}
    tags: dict[str, list[str]] = {}
    for cid in clustering.cluster_ids():
        color = palette[(cid - 1) % len(palette)]
        for s in clustering.state_sets[cid]:
            color_of[s] = color
        if initial:
            for r in clustering.groups[cid]:
                mark = "*" if clustering.submasters.get(cid) == r else ""
                tags.setdefault(initial[r], []).append(f"a{r}{mark}")
    lines = [f"digraph {name} {{", "  node [style=filled];"]
    for s in net.states:
        fill = color_of.get(s, "#dddddd")
        label = s if s not in tags else f"{s}\\n{','.join(tags[s])}"
        lines.append(f'  "{s}" [fillcolor="{fill}", label="{label}"];')
    for (a, b) in net.mobility_edges():
        if a != b:
            lines.append(f'  "{a}" -> "{b}";')
    for cid, (u, v) in sorted(clustering.activation_edges.items()):
        lines.append(f'  "{u}" -> "{v}" [style=dashed, color=red, '
                     f'label="activate {cid}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
