"""Graph-cut move-making solvers for pairwise MRFs with truncated convex priors."""

from .energy import (EnergyModel, GraphTopology, LabelSpace, evaluate_energy,
                     evaluate_hybrid_energy)
from .errors import (BudgetExceeded, ContractViolation, NonConvexPriorError, PriorConstructionError,
                     SentinelCutError, SolverRefused)
from .ishikawa import build_layered_graph, build_subproblem, solve_exact
from .maxflow import FlowNetwork, max_flow, min_cut_value_bruteforce
from .moves import (SOLVERS, Alternating, Extended, RangeAnchored, SolveOptions, SolveTrace, Standard,
                    alpha_expansion_move, alphabeta_swap_move, gswap_move, gswap_select_active,
                    gswapf_move, range_swap_move, run)
from .oracle import OracleBudget, exact_minimum, exact_move_minimum
from .priors import Prior, PriorKind, make_prior

__version__ = "0.1.0"
