"""Control synthesis for labeled MDPs against LTL specifications.

Build a deterministic Rabin automaton for the specification (directly for
the GF/FG/G fragment, or imported from HOA), form the Rabin-weighted
product MDP, then either solve it exactly by value iteration or learn a
policy online by temporal-difference updates, and verify almost-sure
satisfaction through recurrent-class analysis.
"""

from .dra import Dra, RabinPair, accepts_lasso, dra_step, parse_hoa, translate_fragment
from .envs import (GridConfig, TrafficConfig, build_grid_world,
                   build_traffic_network, naive_traffic_policy)
from .learner import (ExplorationStrategy, LearnerState, explore_action,
                      reset_condition, reset_rabin_state, run_trials, td_step)
from .ltl import FragmentSpec, atoms, format_ltl, parse_ltl, to_fragment
from .mdp import (LabeledMdp, StationaryPolicy, deserialize_mdp, serialize_mdp,
                  validate_mdp)
from .product import ProductMdp, RewardScheme, build_product, equivalence_class, reward_vector
from .solver import (ParameterBoundEstimate, SolverConfig, policy_evaluation,
                     select_parameters, value_iteration)
from .verify import (brute_force_best, decompose, estimate_satisfaction,
                     induced_chain, satisfies_prob_one, simulate)

__version__ = "0.1.0"
