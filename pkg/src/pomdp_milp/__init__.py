"""Exact memoryless policies for partially observed decision processes.

The package covers one-component models (mixed-integer formulation with
optional strengthening inequalities, fully observed relaxation), weakly
coupled collections of components under shared resource budgets (decomposed
programs, almost-sure lower bound, Lagrangian column generation, fluid LP),
and rolling-horizon implicit policies with Monte-Carlo evaluation.
"""

from .core import (
    Belief,
    History,
    MemorylessPolicy,
    MomentVector,
    Pomdp,
    Trajectory,
    ValidationReport,
    WcPomdp,
    belief_from_history,
    belief_update,
    enumerate_joint_actions,
    enumerate_memoryless_policies,
    evaluate_policy_exact,
    find_feasible_action,
    initial_belief_given_obs,
    load_wcpomdp,
    dump_wcpomdp,
    product_pomdp,
    simulate,
    validate,
    validate_moments,
)
from .errors import (
    EmptyActionSpace,
    FormatError,
    InfeasibleAction,
    IterationCapExceeded,
    PomdpMilpError,
    RejectionCapExceeded,
    SizeLimitExceeded,
    SolveError,
    ZeroLikelihood,
)
from .instances import (
    BanditFamily,
    counterexample_instances,
    gen_bandit,
    gen_decomposable,
    gen_maintenance,
    gen_random_pomdp,
)
from .lpmodel import SolveOutcome, SolveParams
from .milp_pomdp import (
    FormulationOptions,
    build_mdp_lp,
    build_pomdp_milp,
    final_gap,
    integrity_gap,
    solve_mdp_lp,
    solve_pomdp_milp,
)
from .milp_wcpomdp import (
    BoundsReport,
    ColgenResult,
    LowerBoundResult,
    WcFormulationOptions,
    build_fluid,
    build_wc_milp,
    compute_bounds,
    decomposable_coupling,
    lagrangian_colgen,
    solve_fluid,
    solve_lower_bound,
    solve_wc_milp,
)
from .policy_engine import (
    PolicyEngine,
    PolicyFormulation,
    RunReport,
    act,
    monte_carlo_eval,
    rolling_horizon_run,
)
from .pomdp_format import load_pomdp_file, parse_pomdp, write_pomdp

__version__ = "0.1.0"

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
    "enumerate_joint_actions",
    "enumerate_memoryless_policies",
    "evaluate_policy_exact",
    "find_feasible_action",
    "initial_belief_given_obs",
    "load_wcpomdp",
    "dump_wcpomdp",
    "product_pomdp",
    "simulate",
    "validate",
    "validate_moments",
    "EmptyActionSpace",
    "FormatError",
    "InfeasibleAction",
    "IterationCapExceeded",
    "PomdpMilpError",
    "RejectionCapExceeded",
    "SizeLimitExceeded",
    "SolveError",
    "ZeroLikelihood",
    "BanditFamily",
    "counterexample_instances",
    "gen_bandit",
    "gen_decomposable",
    "gen_maintenance",
    "gen_random_pomdp",
    "SolveOutcome",
    "SolveParams",
    "FormulationOptions",
    "build_mdp_lp",
    "build_pomdp_milp",
    "final_gap",
    "integrity_gap",
    "solve_mdp_lp",
    "solve_pomdp_milp",
    "BoundsReport",
    "ColgenResult",
    "LowerBoundResult",
    "WcFormulationOptions",
    "build_fluid",
    "build_wc_milp",
    "compute_bounds",
    "decomposable_coupling",
    "lagrangian_colgen",
    "solve_fluid",
    "solve_lower_bound",
    "solve_wc_milp",
    "PolicyEngine",
    "PolicyFormulation",
    "RunReport",
    "act",
    "monte_carlo_eval",
    "rolling_horizon_run",
    "load_pomdp_file",
    "parse_pomdp",
    "write_pomdp",
    "__version__",
]
