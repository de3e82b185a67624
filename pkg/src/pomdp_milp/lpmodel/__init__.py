from .backends import (
    BACKEND_ENV_VAR,
    HighsBackend,
    ReferenceBackend,
    available_backends,
    get_backend,
    register_backend,
    solve,
)
from .model import (
    BINARY,
    CONTINUOUS,
    ERROR,
    FEASIBLE_GAP,
    INFEASIBLE,
    OPTIMAL,
    TIME_LIMIT,
    UNBOUNDED,
    Constraint,
    LinearModel,
    ModelBuilder,
    SolveOutcome,
    SolveParams,
    Variable,
    export_lp,
)
from .reference import branch_and_bound, solve_lp

__all__ = [
    "BACKEND_ENV_VAR",
    "BINARY",
    "CONTINUOUS",
    "Constraint",
    "ERROR",
    "FEASIBLE_GAP",
    "HighsBackend",
    "INFEASIBLE",
    "LinearModel",
    "ModelBuilder",
    "OPTIMAL",
    "ReferenceBackend",
    "SolveOutcome",
    "SolveParams",
    "TIME_LIMIT",
    "UNBOUNDED",
    "Variable",
    "available_backends",
    "branch_and_bound",
    "export_lp",
    "get_backend",
    "register_backend",
    "solve",
    "solve_lp",
]
