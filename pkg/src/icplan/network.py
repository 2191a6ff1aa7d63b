"""Mobility-communication networks and their time-extended expansion.

A network couples two directed edge sets over one state set: mobility edges,
which agents traverse between consecutive time steps, and communication edges,
over which co-located or adjacent agents exchange information within a time
step.  Edge weights are costs; both edge sets may be asymmetric.  Mobility
self-loops (waiting) are inserted automatically at zero cost unless the
instance disables them.

Time-dependent costs are supported through sparse overrides on top of the
per-edge base weight; instance files carry only the base weight.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

from .errors import InstanceError

MOBILITY = "mobility"
COMM = "comm"


@dataclass(frozen=True)
class MobilityCommNetwork:
    """Immutable two-relation directed graph over a common state set."""

    states: tuple[str, ...]
    mobility: dict[tuple[str, str], float]
    comm: dict[tuple[str, str], float]
    mobility_overrides: dict[tuple[int, str, str], float] = field(default_factory=dict)
    comm_overrides: dict[tuple[int, str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        index = {s: i for i, s in enumerate(self.states)}
        if len(index) != len(self.states):
            raise InstanceError("duplicate state identifiers")
        if not self.states:
            raise InstanceError("empty state set")
        for name, edges in ((MOBILITY, self.mobility), (COMM, self.comm)):
            for (a, b), w in edges.items():
                if a not in index or b not in index:
                    raise InstanceError(f"dangling {name} edge ({a!r}, {b!r})")
                if w < 0:
                    raise InstanceError(f"negative weight on {name} edge ({a!r}, {b!r})")
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_succ", _adjacency(self.states, self.mobility, 0))
        object.__setattr__(self, "_pred", _adjacency(self.states, self.mobility, 1))
        object.__setattr__(self, "_csucc", _adjacency(self.states, self.comm, 0))
        object.__setattr__(self, "_cpred", _adjacency(self.states, self.comm, 1))

    # -- basic queries -------------------------------------------------

    def index(self, s: str) -> int:
        try:
            return self._index[s]
        except KeyError:
            raise InstanceError(f"unknown state {s!r}") from None

    def has_state(self, s: str) -> bool:
        return s in self._index

    def neighbors(self, s: str, direction: str = "succ", relation: str = MOBILITY):
        """States adjacent to s. direction in {succ, pred}, relation in {mobility, comm}."""
        if direction not in ("succ", "pred"):
            raise ValueError(f"direction must be succ or pred, got {direction!r}")
        if relation == MOBILITY:
            table = self._succ if direction == "succ" else self._pred
        elif relation == COMM:
            table = self._csucc if direction == "succ" else self._cpred
        else:
            raise ValueError(f"relation must be mobility or comm, got {relation!r}")
        self.index(s)
        return tuple(table.get(s, ()))

    def mobility_cost(self, t: int, a: str, b: str) -> float:
        w = self.mobility_overrides.get((t, a, b))
        if w is not None:
            return w
        try:
            return self.mobility[(a, b)]
        except KeyError:
            raise InstanceError(f"no mobility edge ({a!r}, {b!r})") from None

    def comm_cost(self, t: int, a: str, b: str) -> float:
        w = self.comm_overrides.get((t, a, b))
        if w is not None:
            return w
        try:
            return self.comm[(a, b)]
        except KeyError:
            raise InstanceError(f"no comm edge ({a!r}, {b!r})") from None

    def mobility_edges(self):
        return tuple(self.mobility)

    def comm_edges(self):
        return tuple(self.comm)


def _adjacency(states, edges, end):
    table: dict[str, list[str]] = {s: [] for s in states}
    for a, b in edges:
        key, val = (a, b) if end == 0 else (b, a)
        table[key].append(val)
    # neighbor order follows state file order for determinism
    rank = {s: i for i, s in enumerate(states)}
    for s in table:
        table[s].sort(key=rank.__getitem__)
    return table


def build_network(states, mobility_edges, comm_edges, self_loops=True,
                  mobility_overrides=None, comm_overrides=None) -> MobilityCommNetwork:
    """Construct a network from edge triples (a, b, weight).

    Zero-cost mobility self-loops are added for every state unless self_loops
    is False or the instance supplies its own loop for that state.
    """
    mobility = {}
    for a, b, w in mobility_edges:
        mobility[(a, b)] = float(w)
    comm = {}
    for a, b, w in comm_edges:
        comm[(a, b)] = float(w)
    if self_loops:
        for s in states:
            mobility.setdefault((s, s), 0.0)
    return MobilityCommNetwork(
        states=tuple(states),
        mobility=mobility,
        comm=comm,
        mobility_overrides=dict(mobility_overrides or {}),
        comm_overrides=dict(comm_overrides or {}),
    )


def load_network(source) -> MobilityCommNetwork:
    """Load a network from an instance dict, JSON string, or file path."""
    data = _coerce_instance(source)
    try:
        states = list(data["states"])
    except KeyError:
        raise InstanceError("instance missing 'states'") from None
    if not all(isinstance(s, str) for s in states):
        raise InstanceError("states must be strings")

    def read_edges(key):
        out = []
        for rec in data.get(key, []):
            try:
                out.append((rec["from"], rec["to"], float(rec.get("weight", 0.0))))
            except (KeyError, TypeError, ValueError):
                raise InstanceError(f"malformed edge record in {key}: {rec!r}") from None
        return out

    return build_network(
        states,
        read_edges("mobility_edges"),
        read_edges("comm_edges"),
        self_loops=bool(data.get("self_loops", True)),
    )


def _coerce_instance(source) -> dict:
    if isinstance(source, dict):
        return source
    text = None
    if isinstance(source, str) and source.lstrip().startswith("{"):
        text = source
    else:
        try:
            with open(source) as fh:
                text = fh.read()
        except OSError as exc:
            raise InstanceError(f"cannot read instance: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InstanceError("instance root must be an object")
    return data


# -- time extension ----------------------------------------------------


@dataclass(frozen=True)
class TimeExtendedGraph:
    """Layered expansion of a network over horizon T.

    Vertices are (state, t) for t in 0..T.  Mobility arcs cross layers,
    ((s,t),(s',t+1)) for t < T; communication arcs stay within a layer,
    ((s,t),(s',t)) for every t in 0..T.
    """

    net: MobilityCommNetwork
    T: int
    vertices: tuple[tuple[str, int], ...]
    mobility_arcs: tuple[tuple[str, str, int], ...]   # (s, s', t): layer t -> t+1
    comm_arcs: tuple[tuple[str, str, int], ...]       # (s, s', t): within layer t


def time_extended(net: MobilityCommNetwork, T: int) -> TimeExtendedGraph:
    if T < 0:
        raise ValueError("horizon T must be >= 0")
    vertices = tuple((s, t) for t in range(T + 1) for s in net.states)
    mob = tuple((a, b, t) for t in range(T) for (a, b) in net.mobility)
    comm = tuple((a, b, t) for t in range(T + 1) for (a, b) in net.comm)
    return TimeExtendedGraph(net=net, T=T, vertices=vertices,
                             mobility_arcs=mob, comm_arcs=comm)


# -- shortest paths and centrality ------------------------------------


def shortest_mobility_distance(net: MobilityCommNetwork, a: str, b: str,
                               t: int = 0) -> float:
    """Weighted shortest-path distance over mobility edges, inf if unreachable.

    Weights are taken at the fixed layer t (time-dependent costs are sampled,
    not accumulated along a schedule).
    """
    net.index(a), net.index(b)
    if a == b:
        return 0.0
    dist = {a: 0.0}
    heap = [(0.0, a)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == b:
            return d
        if d > dist.get(u, float("inf")):
            continue
        for v in net.neighbors(u, "succ", MOBILITY):
            if v == u:
                continue
            nd = d + net.mobility_cost(t, u, v)
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return float("inf")


def all_pairs_mobility_distance(net: MobilityCommNetwork, t: int = 0):
    """Dense all-pairs weighted mobility distances as {a: {b: d}}."""
    out = {}
    for a in net.states:
        dist = {a: 0.0}
        heap = [(0.0, a)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist.get(u, float("inf")):
                continue
            for v in net.neighbors(u, "succ", MOBILITY):
                if v == u:
                    continue
                nd = d + net.mobility_cost(t, u, v)
                if nd < dist.get(v, float("inf")):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        out[a] = dist
    return out


def betweenness_centrality(net: MobilityCommNetwork) -> dict[str, float]:
    """Exact weighted betweenness over directed mobility edges (Brandes).

    Self-loops are ignored; scores are raw pair-dependency sums with
    endpoints excluded, no normalization.
    """
    scores = {s: 0.0 for s in net.states}
    for source in net.states:
        # single-source shortest paths with path counts
        dist = {s: float("inf") for s in net.states}
        sigma = {s: 0.0 for s in net.states}
        preds: dict[str, list[str]] = {s: [] for s in net.states}
        dist[source] = 0.0
        sigma[source] = 1.0
        order = []
        seen = set()
        heap = [(0.0, net.index(source), source)]
        while heap:
            d, _, u = heapq.heappop(heap)
            if u in seen:
                continue
            seen.add(u)
            order.append(u)
            for v in net.neighbors(u, "succ", MOBILITY):
                if v == u:
                    continue
                nd = d + net.mobility_cost(0, u, v)
                if nd < dist[v] - 1e-12:
                    dist[v] = nd
                    sigma[v] = sigma[u]
                    preds[v] = [u]
                    heapq.heappush(heap, (nd, net.index(v), v))
                elif abs(nd - dist[v]) <= 1e-12:
                    sigma[v] += sigma[u]
                    preds[v].append(u)
        # accumulate dependencies in reverse settle order
        delta = {s: 0.0 for s in net.states}
        for u in reversed(order):
            for p in preds[u]:
                delta[p] += sigma[p] / sigma[u] * (1.0 + delta[u])
            if u != source:
                scores[u] += delta[u]
    return scores


# -- export ------------------------------------------------------------


def to_dot(net: MobilityCommNetwork, name: str = "network") -> str:
    """GraphViz digraph: solid mobility edges, dashed comm edges."""
    lines = [f"digraph {name} {{"]
    for s in net.states:
        lines.append(f'  "{s}";')
    for (a, b), w in sorted(net.mobility.items()):
        if a == b:
            continue
        lines.append(f'  "{a}" -> "{b}" [label="{w:g}"];')
    for (a, b), w in sorted(net.comm.items()):
        lines.append(f'  "{a}" -> "{b}" [style=dashed, color=gray40, label="{w:g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
