from .belief import belief_from_history, belief_update, initial_belief_given_obs
from .evaluate import (
    enumerate_memoryless_policies,
    evaluate_policy_exact,
    first_period_setup,
)
from .model import (
    Belief,
    History,
    MemorylessPolicy,
    MomentVector,
    Pomdp,
    ValidationReport,
    WcPomdp,
    enumerate_joint_actions,
    find_feasible_action,
    validate,
    validate_moments,
)
from .product import joint_obs_index, joint_state_index, product_pomdp
from .simulate import Trajectory, simulate
from .wcjson import (
    dump_wcpomdp,
    load_wcpomdp,
    pomdp_from_dict,
    pomdp_to_dict,
    wc_from_dict,
    wc_to_dict,
)

__all__ = [
    "Belief",
    "History",
    "MemorylessPolicy",
    "MomentVector",
    "Pomdp",
    "Trajectory",
    "ValidationReport",
    "WcPomdp",
    "belief_from_history",
    "belief_update",
    "dump_wcpomdp",
    "enumerate_joint_actions",
    "enumerate_memoryless_policies",
    "evaluate_policy_exact",
    "find_feasible_action",
    "first_period_setup",
    "initial_belief_given_obs",
    "joint_obs_index",
    "joint_state_index",
    "load_wcpomdp",
    "pomdp_from_dict",
    "pomdp_to_dict",
    "product_pomdp",
    "simulate",
    "validate",
    "validate_moments",
    "wc_from_dict",
    "wc_to_dict",
]
