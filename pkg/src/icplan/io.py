"""Instance file format: one JSON document holding network, agents, problem.

Layout::

    {
      "network": {
        "states": ["s0", ...],
        "mobility_edges": [{"from": "s0", "to": "s1", "weight": 1.0}, ...],
        "comm_edges":     [{"from": "s0", "to": "s1", "weight": 0.0}, ...],
        "self_loops": true
      },
      "agents": {
        "count": 3,
        "initial": {"0": "s0", "1": "s2", "2": "s3"},
        "static": [0],
        "masters": [0],
        "frontier_capable": null
      },
      "problem": {
        "T": 2, "src": [0], "snk": [1, 2],
        "rewards": [{"state": "s3", "k": 1, "value": 10.0}],
        "information_consistent": true,
        "collision_avoidance": false,
        "awareness_reward": false,
        "return_to_base": false,
        "flow_orientation": "auto",
        "big_m": null,
        "collision_pairs": null
      },
      "exploration": {"base": "s0", "initially_known": ["s0", "s1"]}
    }

"problem" requires "agents"; "agents" may stand alone (exploration worlds
carry agents and an "exploration" section but no problem). "exploration" is
optional everywhere.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import InstanceError
from .ilp import AgentConfig, ProblemSpec
from .network import MobilityCommNetwork, load_network


def _coerce(source) -> dict:
    if isinstance(source, dict):
        return source
    if isinstance(source, (str, Path)):
        text = str(source)
        if not text.lstrip().startswith("{"):
            try:
                text = Path(source).read_text()
            except OSError as exc:
                raise InstanceError(
                    f"cannot read instance file {str(source)!r}: {exc}"
                ) from None
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"invalid instance JSON: {exc}") from None
    raise InstanceError(f"cannot load instance from {type(source).__name__}")


def load_instance(source):
    """Read (net, spec_or_None, extras) from a dict, JSON string or path."""
    data = _coerce(source)
    if "network" not in data:
        raise InstanceError("instance is missing the 'network' section")
    net = load_network(data["network"])
    spec = None
    if "problem" in data:
        if "agents" not in data:
            raise InstanceError("'problem' requires an 'agents' section")
        spec = _parse_spec(net, data["agents"], data["problem"])
    extras = dict(data.get("exploration", {}))
    return net, spec, extras


def load_agents(agents_data: dict) -> AgentConfig:
    """Parse the "agents" section into an AgentConfig."""
    try:
        return AgentConfig(
            count=int(agents_data["count"]),
            initial={int(r): s for r, s in agents_data["initial"].items()},
            static=frozenset(int(r) for r in agents_data.get("static", [])),
            masters=frozenset(int(r) for r in agents_data.get("masters", [])),
            frontier_capable=(None if agents_data.get("frontier_capable") is None
                              else frozenset(int(r) for r
                                             in agents_data["frontier_capable"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed agents section: {exc}") from None


def load_exploration(source):
    """Read (net, agents, base, initially_known) for exploration worlds.

    The base defaults to the master's initial state when the "exploration"
    section does not name one.
    """
    data = _coerce(source)
    net, _, extras = load_instance(data)
    if "agents" not in data:
        raise InstanceError("exploration worlds need an 'agents' section")
    agents = load_agents(data["agents"])
    base = extras.get("base")
    if base is None:
        anchor = min(agents.masters) if agents.masters else 0
        base = agents.initial[anchor]
    if not net.has_state(base):
        raise InstanceError(f"exploration base {base!r} is not a state")
    return net, agents, base, extras.get("initially_known")


def _parse_spec(net: MobilityCommNetwork, agents_data: dict, problem: dict) -> ProblemSpec:
    agents = load_agents(agents_data)
    try:
        rewards = {(rec["state"], int(rec["k"])): float(rec["value"])
                   for rec in problem.get("rewards", [])}
        pairs = problem.get("collision_pairs")
        spec = ProblemSpec(
            net=net, agents=agents, T=int(problem["T"]),
            src=tuple(int(r) for r in problem.get("src", [])),
            snk=tuple(int(r) for r in problem.get("snk", [])),
            rewards=rewards,
            flow_orientation=problem.get("flow_orientation", "auto"),
            information_consistent=bool(problem.get("information_consistent", False)),
            collision_avoidance=bool(problem.get("collision_avoidance", False)),
            awareness_reward=bool(problem.get("awareness_reward", False)),
            return_to_base=bool(problem.get("return_to_base", False)),
            collision_pairs=(None if pairs is None
                             else tuple((int(i), int(j)) for i, j in pairs)),
            big_m=problem.get("big_m"))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed instance: {exc}") from None
    spec.validate()
    return spec


def network_to_dict(net: MobilityCommNetwork) -> dict:
    def dump(edges, costs):
        return [{"from": a, "to": b, "weight": costs((a, b))} for (a, b) in edges]

    return {
        "states": list(net.states),
        "mobility_edges": dump(net.mobility_edges(), lambda e: net.mobility[e]),
        "comm_edges": dump(net.comm_edges(), lambda e: net.comm[e]),
        "self_loops": False,   # loops are already explicit in the edge list
    }


def agents_to_dict(agents: AgentConfig) -> dict:
    return {
        "count": agents.count,
        "initial": {str(r): s for r, s in sorted(agents.initial.items())},
        "static": sorted(agents.static),
        "masters": sorted(agents.masters),
        "frontier_capable": (None if agents.frontier_capable is None
                             else sorted(agents.frontier_capable)),
    }


def instance_to_dict(net: MobilityCommNetwork, spec: ProblemSpec | None = None,
                     extras: dict | None = None,
                     agents: AgentConfig | None = None) -> dict:
    data: dict = {"network": network_to_dict(net)}
    if spec is not None:
        agents = spec.agents
    if agents is not None:
        data["agents"] = agents_to_dict(agents)
    if spec is not None:
        data["problem"] = {
            "T": spec.T,
            "src": list(spec.src),
            "snk": list(spec.snk),
            "rewards": [{"state": s, "k": k, "value": v}
                        for (s, k), v in spec.sorted_rewards()],
            "information_consistent": spec.information_consistent,
            "collision_avoidance": spec.collision_avoidance,
            "awareness_reward": spec.awareness_reward,
            "return_to_base": spec.return_to_base,
            "flow_orientation": spec.flow_orientation,
            "big_m": spec.big_m,
            "collision_pairs": (None if spec.collision_pairs is None
                                else [list(p) for p in spec.collision_pairs]),
        }
    if extras:
        data["exploration"] = extras
    return data


def save_instance(path, net: MobilityCommNetwork, spec: ProblemSpec | None = None,
                  extras: dict | None = None, agents: AgentConfig | None = None):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(net, spec, extras, agents), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
