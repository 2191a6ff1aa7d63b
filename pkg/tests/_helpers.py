"""Hand-built networks and instances shared across test modules."""

import random

from icplan.ilp import AgentConfig, ProblemSpec
from icplan.network import build_network


def line_network(n, comm_cost=0.0, mobility_cost=1.0):
    """Bidirectional line s0..s{n-1}; comm mirrors mobility."""
    states = [f"s{i}" for i in range(n)]
    mobility, comm = [], []
    for a, b in zip(states, states[1:]):
        mobility += [(a, b, mobility_cost), (b, a, mobility_cost)]
        comm += [(a, b, comm_cost), (b, a, comm_cost)]
    return build_network(states, mobility, comm)


def relay_spec(green_at="s1", T=2, n=4, masters=(), static=(), **kw):
    """Two end agents swap data while a third can relay between them."""
    net = line_network(n)
    agents = AgentConfig(count=3, initial={0: "s0", 1: green_at, 2: f"s{n - 1}"},
                         masters=frozenset(masters), static=frozenset(static))
    spec = ProblemSpec(net=net, agents=agents, T=T, src=(0, 2), snk=(0, 2), **kw)
    return net, spec


def random_net(seed, n=8, extra=0.5, mobility_cost=(1, 3), comm_cost=(0, 0),
               mirror=True):
    """Connected random digraph built independently of the package generators.

    A random spanning tree (both directions) plus `extra * n` directed chords;
    integer edge weights keep shortest-path ties exact.
    """
    rng = random.Random(f"helper:{seed}")
    states = [f"s{i}" for i in range(n)]
    edges = set()
    for i in range(1, n):
        j = rng.randrange(i)
        edges.add((states[j], states[i]))
        edges.add((states[i], states[j]))
    for _ in range(int(extra * n)):
        a, b = rng.sample(states, 2)
        edges.add((a, b))
        if rng.random() < 0.5:
            edges.add((b, a))

    def weight(lo, hi):
        return float(rng.randint(lo, hi)) if hi > lo else float(lo)

    mobility = [(a, b, weight(*mobility_cost)) for (a, b) in sorted(edges)]
    comm = []
    for (a, b) in sorted(edges):
        if mirror or rng.random() < 0.8:
            comm.append((a, b, weight(*comm_cost)))
    return build_network(states, mobility, comm)


def bellman_ford(net, source, t=0):
    """Reference single-source mobility distances (no heap, no early exit)."""
    dist = {s: float("inf") for s in net.states}
    dist[source] = 0.0
    for _ in range(len(net.states)):
        changed = False
        for (a, b), _w in net.mobility.items():
            if a == b:
                continue
            cand = dist[a] + net.mobility_cost(t, a, b)
            if cand < dist[b] - 1e-12:
                dist[b] = cand
                changed = True
        if not changed:
            break
    return dist
