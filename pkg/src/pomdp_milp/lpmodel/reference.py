"""Self-contained reference solver: LP relaxations via scipy's HiGHS interface
and a deterministic branch-and-bound over the binary variables.

Branching picks the most fractional binary (closest to 1/2), ties broken by
lowest variable index; node selection is best-bound.  Adequate for the
desk-scale models this package builds, where binaries number T * |X_O| * |X_A|
per component.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import optimize, sparse

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

_INT_TOL = 1e-6


@dataclass
class _Prepared:
    """Matrix form of a model, normalized to maximization."""

    c: np.ndarray  # maximize c @ x + constant
    constant: float
    A_ub: sparse.csr_matrix | None
    b_ub: np.ndarray
    A_eq: sparse.csr_matrix | None
    b_eq: np.ndarray
    ub_names: list[str]
    eq_names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    flip: bool  # True when the original model minimizes


def _prepare(model: LinearModel) -> _Prepared:
    c = model.objective_vector()
    constant = model.objective_constant
    flip = model.objective_sense == "min"
    if flip:
        c = -c
        constant = -constant
    A, senses, rhs = model.constraint_arrays()
    ub_rows, eq_rows = [], []
    ub_rhs, eq_rhs = [], []
    ub_names, eq_names = [], []
    ub_sign = []
    for r, sense in enumerate(senses):
        if sense == "=":
            eq_rows.append(r)
            eq_rhs.append(rhs[r])
            eq_names.append(model.constraints[r].name)
        elif sense == "<=":
            ub_rows.append(r)
            ub_rhs.append(rhs[r])
            ub_sign.append(1.0)
            ub_names.append(model.constraints[r].name)
        else:  # >=  ->  negate into <=
            ub_rows.append(r)
            ub_rhs.append(-rhs[r])
            ub_sign.append(-1.0)
            ub_names.append(model.constraints[r].name)
    A_ub = None
    b_ub = np.zeros(0)
    if ub_rows:
        A_ub = sparse.diags(ub_sign) @ A[ub_rows]
        A_ub = sparse.csr_matrix(A_ub)
        b_ub = np.asarray(ub_rhs)
    A_eq = None
    b_eq = np.zeros(0)
    if eq_rows:
        A_eq = sparse.csr_matrix(A[eq_rows])
        b_eq = np.asarray(eq_rhs)
    lb, ub = model.bounds_arrays()
    return _Prepared(c, constant, A_ub, b_ub, A_eq, b_eq, ub_names, eq_names, lb, ub, flip)


def _linprog(prep: _Prepared, lb: np.ndarray, ub: np.ndarray):
    """Maximize prep.c over the prepared constraints with the given bounds."""
    res = optimize.linprog(
        -prep.c,
        A_ub=prep.A_ub,
        b_ub=prep.b_ub if prep.A_ub is not None else None,
        A_eq=prep.A_eq,
        b_eq=prep.b_eq if prep.A_eq is not None else None,
        bounds=np.column_stack([lb, ub]),
        method="highs",
    )
    return res


def solve_lp(model: LinearModel, want_duals: bool = False):
    """Solve the continuous relaxation (integrality dropped).

    Returns a SolveOutcome; with ``want_duals`` a second return value maps
    constraint names to duals, signed so a dual is the derivative of the
    model's objective (in its own sense) with respect to that constraint's
    right-hand side.
    """
    prep = _prepare(model)
    t0 = time.monotonic()
    res = _linprog(prep, prep.lb, prep.ub)
    wall = time.monotonic() - t0
    names = [v.name for v in model.variables]
    if res.status == 2:
        out = SolveOutcome(INFEASIBLE, math.nan, math.nan, {}, wall, res.message)
        return (out, {}) if want_duals else out
    if res.status == 3:
        out = SolveOutcome(UNBOUNDED, math.inf, math.inf, {}, wall, res.message)
        return (out, {}) if want_duals else out
    if res.status != 0:
        out = SolveOutcome(ERROR, math.nan, math.nan, {}, wall, res.message)
        return (out, {}) if want_duals else out
    obj_max = -res.fun + prep.constant
    obj = -obj_max if prep.flip else obj_max
    values = {n: float(x) for n, x in zip(names, res.x)}
    out = SolveOutcome(OPTIMAL, obj, obj, values, wall)
    if not want_duals:
        return out
    # HiGHS marginals are for the minimization linprog solved above; flip to
    # d(objective)/d(rhs) of the original model.
    duals: dict[str, float] = {}
    sign = -1.0 if prep.flip else 1.0
    if prep.A_ub is not None and res.ineqlin is not None:
        for name, marg in zip(prep.ub_names, res.ineqlin.marginals):
            base = -float(marg)  # max-objective sensitivity to the <= rhs
            # >= rows were negated into <=: sensitivity to the original rhs
            # flips sign again, folded in by how the row was stored.
            duals[name] = sign * base
    if prep.A_eq is not None and res.eqlin is not None:
        for name, marg in zip(prep.eq_names, res.eqlin.marginals):
            duals[name] = sign * -float(marg)
    # Undo the >= negation: the stored rhs was -rhs, so d/d(rhs) = -d/d(-rhs).
    for con in model.constraints:
        if con.sense == ">=" and con.name in duals:
            duals[con.name] = -duals[con.name]
    return out, duals


def _round_binaries(x: np.ndarray, binaries: list[int]) -> np.ndarray:
    out = x.copy()
    out[binaries] = np.round(out[binaries])
    return out


def branch_and_bound(
    model: LinearModel,
    params: SolveParams | None = None,
    warm_start: dict[str, float] | None = None,
) -> SolveOutcome:
    """Deterministic best-bound branch-and-bound over the binary variables."""
    params = params or SolveParams()
    prep = _prepare(model)
    binaries = model.binary_indices()
    t0 = time.monotonic()
    names = [v.name for v in model.variables]

    incumbent_obj = -math.inf
    incumbent_x: np.ndarray | None = None

    if warm_start is not None:
        x0 = np.array([warm_start.get(n, 0.0) for n in names])
        val = _feasible_value(prep, binaries, x0)
        if val is not None:
            incumbent_obj = val
            incumbent_x = x0

    # Root relaxation.
    res = _linprog(prep, prep.lb, prep.ub)
    wall = lambda: time.monotonic() - t0
    if res.status == 2:
        return SolveOutcome(INFEASIBLE, math.nan, math.nan, {}, wall(), res.message)
    if res.status == 3:
        return SolveOutcome(UNBOUNDED, math.inf, math.inf, {}, wall(), res.message)
    if res.status != 0:
        return SolveOutcome(ERROR, math.nan, math.nan, {}, wall(), res.message)

    root_bound = -res.fun + prep.constant
    counter = 0
    # Heap entries: (-parent_bound, counter, fixed) with fixed a dict idx -> 0/1.
    heap: list[tuple[float, int, dict[int, int], np.ndarray | None]] = []
    heapq.heappush(heap, (-root_bound, counter, {}, res.x))
    best_open_bound = root_bound
    status = OPTIMAL
    abs_tol = params.absolute_tolerance

    while heap:
        neg_bound, _, fixed, cached_x = heapq.heappop(heap)
        node_parent_bound = -neg_bound
        best_open_bound = node_parent_bound
        if node_parent_bound <= incumbent_obj + abs_tol:
            # Best-bound order: nothing better remains anywhere.
            best_open_bound = incumbent_obj
            break
        if incumbent_obj > -math.inf and params.relative_mip_gap > 0:
            gap = (node_parent_bound - incumbent_obj) / max(1e-10, abs(incumbent_obj))
            if gap <= params.relative_mip_gap:
                status = FEASIBLE_GAP
                break
        if wall() > params.time_limit_seconds:
            status = TIME_LIMIT
            break

        if cached_x is not None:
            x, bound = cached_x, node_parent_bound
        else:
            lb = prep.lb.copy()
            ub = prep.ub.copy()
            for i, v in fixed.items():
                lb[i] = ub[i] = v
            res = _linprog(prep, lb, ub)
            if res.status == 2:
                continue
            if res.status != 0:
                return SolveOutcome(ERROR, math.nan, math.nan, {}, wall(), res.message)
            bound = -res.fun + prep.constant
            x = res.x
            if bound <= incumbent_obj + abs_tol:
                continue

        frac = [(abs(x[i] - round(x[i])), i) for i in binaries if i not in fixed]
        frac = [(f, i) for f, i in frac if f > _INT_TOL]
        if not frac:
            xi = _round_binaries(x, binaries)
            val = bound
            if val > incumbent_obj:
                incumbent_obj = val
                incumbent_x = xi
            continue
        # Most fractional: largest distance to the nearest integer; ties by
        # lowest index.
        _, branch_var = max(frac, key=lambda fi: (fi[0], -fi[1]))
        for v in (0, 1):
            counter += 1
            child = dict(fixed)
            child[branch_var] = v
            heapq.heappush(heap, (-bound, counter, child, None))

    if not heap and status == OPTIMAL:
        best_open_bound = incumbent_obj

    best_bound = max(best_open_bound, incumbent_obj) if incumbent_obj > -math.inf else best_open_bound
    if incumbent_x is None:
        if status in (TIME_LIMIT, FEASIBLE_GAP):
            return SolveOutcome(status, math.nan, _signed(best_bound, prep), {}, wall(), "no incumbent found")
        return SolveOutcome(INFEASIBLE, math.nan, math.nan, {}, wall(), "no integer-feasible point")

    values = {n: float(v) for n, v in zip(names, incumbent_x)}
    obj, bb = _signed(incumbent_obj, prep), _signed(best_bound, prep)
    return SolveOutcome(status, obj, bb, values, wall())


def _signed(v: float, prep: _Prepared) -> float:
    return -v if prep.flip else v


def _feasible_value(prep: _Prepared, binaries: list[int], x: np.ndarray) -> float | None:
    """Objective of x when x satisfies bounds, constraints, and integrality."""
    tol = 1e-7
    if np.any(x < prep.lb - tol) or np.any(x > prep.ub + tol):
        return None
    for i in binaries:
        if abs(x[i] - round(x[i])) > tol:
            return None
    if prep.A_ub is not None and np.any(prep.A_ub @ x > prep.b_ub + tol):
        return None
    if prep.A_eq is not None and np.any(np.abs(prep.A_eq @ x - prep.b_eq) > tol):
        return None
    return float(prep.c @ x + prep.constant)
