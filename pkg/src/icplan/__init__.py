"""icplan: plan synthesis and verification for intermittently connected teams.

Multi-agent routing on networks that separate mobility from communication:
agents move along mobility edges while information travels over communication
edges between occupied states, riding along with moving agents in between.
The package builds mixed-integer models for reward collection with
source-to-sink information requirements, optionally forcing plans to be
distributable from a master agent before anyone moves, verifies solutions
with solver-free token simulations, and drives a cluster-decomposed
exploration loop for unknown environments.
"""

from .errors import (ConfigurationError, GuardExceeded, IcplanError,
                     InstanceError, SolverError, UnbalancedFlowError)
from .ilp import MASTER_FLOW, AgentConfig, MilpModel, ProblemSpec, assemble
from .network import (MobilityCommNetwork, TimeExtendedGraph,
                      betweenness_centrality, build_network, load_network,
                      shortest_mobility_distance, time_extended, to_dot)
from .solver import BACKENDS, SolveResult, export_lp, parse_lp, solve, solve_problem
from .verify import (OracleResult, PlanSolution, ReachabilityReport,
                     brute_force_solve, check_consistency, check_dynamics,
                     check_flows, decompose_flows, extract_solution,
                     information_reachability, load_solution, save_solution)

__version__ = "0.1.0"

__all__ = [
    "AgentConfig", "BACKENDS", "ConfigurationError", "GuardExceeded",
    "IcplanError", "InstanceError", "MASTER_FLOW", "MilpModel",
    "MobilityCommNetwork",
    "OracleResult", "PlanSolution", "ProblemSpec", "ReachabilityReport",
    "SolveResult", "SolverError", "TimeExtendedGraph", "UnbalancedFlowError",
    "assemble", "betweenness_centrality", "brute_force_solve",
    "build_network", "check_consistency", "check_dynamics", "check_flows",
    "decompose_flows", "export_lp", "extract_solution",
    "information_reachability", "load_network", "load_solution", "parse_lp",
    "save_solution", "shortest_mobility_distance", "solve", "solve_problem",
    "time_extended", "to_dot",
]
