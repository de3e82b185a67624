"""Backend registry and adapters.

A backend is any object with ``solve(model, params, warm_start=None) ->
SolveOutcome``.  Two ship by default: ``reference`` (the built-in
branch-and-bound, fully deterministic) and ``highs`` (scipy's MILP
interface).  The ``POMDP_MILP_BACKEND`` environment variable picks the
default; ``register_backend`` adds custom ones.
"""

from __future__ import annotations

import math
import os
import time

import numpy as np
from scipy import optimize, sparse

from ..errors import SolveError
from .model import (
    ERROR,
    FEASIBLE_GAP,
    INFEASIBLE,
    OPTIMAL,
    TIME_LIMIT,
    UNBOUNDED,
    LinearModel,
    SolveOutcome,
    SolveParams,
)
from .reference import branch_and_bound

BACKEND_ENV_VAR = "POMDP_MILP_BACKEND"


class ReferenceBackend:
    name = "reference"

    def solve(self, model: LinearModel, params: SolveParams | None = None, warm_start=None) -> SolveOutcome:
        return branch_and_bound(model, params, warm_start)


class HighsBackend:
    """scipy.optimize.milp (HiGHS branch-and-cut). Warm starts are ignored."""

    name = "highs"

    def solve(self, model: LinearModel, params: SolveParams | None = None, warm_start=None) -> SolveOutcome:
        params = params or SolveParams()
        c = model.objective_vector()
        flip = model.objective_sense == "max"
        if flip:
            c = -c
        A, senses, rhs = model.constraint_arrays()
        lo = np.where([s == "<=" for s in senses], -np.inf, rhs)
        hi = np.where([s == ">=" for s in senses], np.inf, rhs)
        lb, ub = model.bounds_arrays()
        integrality = np.zeros(model.n_variables)
        for i in model.binary_indices():
            integrality[i] = 1
        kwargs = {}
        if len(model.constraints):
            kwargs["constraints"] = optimize.LinearConstraint(sparse.csc_matrix(A), lo, hi)
        t0 = time.monotonic()
        res = optimize.milp(
            c,
            integrality=integrality,
            bounds=optimize.Bounds(lb, ub),
            options={
                "time_limit": params.time_limit_seconds,
                "mip_rel_gap": params.relative_mip_gap,
                "disp": False,
            },
            **kwargs,
        )
        wall = time.monotonic() - t0
        names = [v.name for v in model.variables]
        const = model.objective_constant

        if res.status == 2:
            return SolveOutcome(INFEASIBLE, math.nan, math.nan, {}, wall, res.message)
        if res.status == 3:
            return SolveOutcome(UNBOUNDED, math.inf if flip else -math.inf, math.inf if flip else -math.inf, {}, wall, res.message)
        if res.x is None:
            status = TIME_LIMIT if res.status == 1 else ERROR
            return SolveOutcome(status, math.nan, math.nan, {}, wall, res.message)

        obj = (-res.fun if flip else res.fun) + const
        dual = getattr(res, "mip_dual_bound", None)
        if dual is None or not math.isfinite(dual):
            best_bound = obj
        else:
            best_bound = (-dual if flip else dual) + const
        values = {n: float(x) for n, x in zip(names, res.x)}
        if res.status == 1:
            return SolveOutcome(TIME_LIMIT, obj, best_bound, values, wall, res.message)
        gap = abs(best_bound - obj) / max(1e-10, abs(obj))
        status = OPTIMAL if gap <= 1e-9 or params.relative_mip_gap == 0 else FEASIBLE_GAP
        return SolveOutcome(status, obj, best_bound, values, wall, res.message)


_REGISTRY: dict[str, object] = {
    "reference": ReferenceBackend(),
    "highs": HighsBackend(),
}


def register_backend(name: str, backend) -> None:
    if not hasattr(backend, "solve"):
        raise TypeError("a backend must provide solve(model, params, warm_start=None)")
    _REGISTRY[name] = backend


def available_backends() -> list[str]:
    return sorted(_REGISTRY)


def get_backend(name: str | None = None):
    """Resolve a backend by name, the environment variable, or the default."""
    chosen = name or os.environ.get(BACKEND_ENV_VAR) or "reference"
    try:
        return _REGISTRY[chosen]
    except KeyError:
        raise SolveError(
            f"unknown backend {chosen!r}; available: {', '.join(available_backends())}"
        ) from None


def solve(model: LinearModel, params: SolveParams | None = None, backend=None, warm_start=None) -> SolveOutcome:
    """Solve with the given backend object or name (default per environment)."""
    if backend is None or isinstance(backend, str):
        backend = get_backend(backend)
    return backend.solve(model, params or SolveParams(), warm_start)
