"""Mixed-integer formulations for memoryless policies on a single POMDP.

The exact formulation maximizes sum_t sum_{s,a,s'} r(s,a,s') mu_sas[t,s,a,s']
over joint-event probabilities (moments) tied to a policy table delta.
The bilinear coupling between delta and the observation-weighted state mass
is linearized exactly by McCormick rows, valid because delta is binary.  An
optional extended block over (s_prev, a_prev, s, o, a) moments tightens the
linear relaxation without cutting off any integral point.

All variables follow the naming contract

    mu1[s]  mu_soa[t,s,o,a]  mu_sas[t,s,a,sp]  mu_x[t,sp,ap,s,o,a]  delta[t,o,a]

with 0-based indices and t = 0..T-1 (the extended block exists for t >= 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core.evaluate import evaluate_policy_exact, first_period_setup
from .core.model import MemorylessPolicy, MomentVector, Pomdp, _freeze
from .errors import SolveError
from .lpmodel import (
    BINARY,
    CONTINUOUS,
    FEASIBLE_GAP,
    OPTIMAL,
    TIME_LIMIT,
    LinearModel,
    ModelBuilder,
    SolveOutcome,
    SolveParams,
)
from .lpmodel.backends import solve as backend_solve
from .lpmodel.reference import solve_lp


@dataclass(frozen=True)
class FormulationOptions:
    """Build switches for the memoryless MILP.

    use_cuts    add the extended-moment tightening block
    relax       drop integrality on delta (linear relaxation)
    initial_obs pin the first observation and condition the prior on it
    fix_prefix  belief vector replacing the initial distribution (used by the
                re-solving policies: the predictive belief of the remaining
                window; requires/composes with initial_obs as in
                core.evaluate.first_period_setup)
    prev_action action taken just before the window, selecting the
                first-period row of an action-conditional emission table
    """

    use_cuts: bool = False
    relax: bool = False
    initial_obs: int | None = None
    fix_prefix: np.ndarray | None = None
    prev_action: int | None = None


@dataclass(frozen=True)
class VarMap:
    """Generates the canonical variable names of one formulation block."""

    T: int
    n_states: int
    n_obs: int
    n_actions: int
    prefix: str = ""
    use_cuts: bool = False

    def mu1(self, s: int) -> str:
        return f"{self.prefix}mu1[{s}]"

    def mu_soa(self, t: int, s: int, o: int, a: int) -> str:
        return f"{self.prefix}mu_soa[{t},{s},{o},{a}]"

    def mu_sas(self, t: int, s: int, a: int, sp: int) -> str:
        return f"{self.prefix}mu_sas[{t},{s},{a},{sp}]"

    def mu_x(self, t: int, sp: int, ap: int, s: int, o: int, a: int) -> str:
        return f"{self.prefix}mu_x[{t},{sp},{ap},{s},{o},{a}]"

    def delta(self, t: int, o: int, a: int) -> str:
        return f"{self.prefix}delta[{t},{o},{a}]"


@dataclass(frozen=True)
class BayesTable:
    """p(s | s_prev, a_prev, o), indexed [s_prev, a_prev, o, s].

    Slices with an impossible (s_prev, a_prev, o) combination are all zero.
    """

    table: np.ndarray


def compute_bayes_table(pomdp: Pomdp) -> BayesTable:
    S, A, O = pomdp.n_states, pomdp.n_actions, pomdp.n_obs
    # joint[sp, ap, s, o] = p(o | ap, s) p(s | sp, ap)
    joint = np.einsum("aso,pas->paso", pomdp.emission, pomdp.transition)
    denom = joint.sum(axis=2)  # (sp, ap, o)
    table = np.zeros((S, A, O, S))
    nz = denom > 0.0
    for sp in range(S):
        for ap in range(A):
            for o in range(O):
                if nz[sp, ap, o]:
                    table[sp, ap, o, :] = joint[sp, ap, :, o] / denom[sp, ap, o]
    return BayesTable(table=_freeze(table))


def _emission_factor(pomdp: Pomdp, vm: VarMap, t: int, s: int, o: int, e1: np.ndarray, initial_obs: int | None):
    """Linear expression for P(S_t=s, O_t=o) as {name: coef}.

    At t=0 the mass is mu1[s] weighted by the first-period kernel (an
    indicator when the observation is pinned); afterwards it aggregates the
    previous period's mu_sas with the (possibly action-conditional) emission.
    """
    if t == 0:
        if initial_obs is not None:
            return {vm.mu1(s): 1.0} if o == initial_obs else {}
        w = e1[s, o]
        return {vm.mu1(s): w} if w else {}
    expr: dict[str, float] = {}
    for sp in range(pomdp.n_states):
        for ap in range(pomdp.n_actions):
            w = pomdp.emission[ap, s, o]
            if w:
                expr[vm.mu_sas(t - 1, sp, ap, s)] = w
    return expr


def add_pomdp_block(
    builder: ModelBuilder,
    pomdp: Pomdp,
    T: int,
    opts: FormulationOptions,
    prefix: str = "",
) -> tuple[VarMap, dict[str, float]]:
    """Add one complete memoryless-policy block to ``builder``.

    Returns the block's VarMap and its objective contribution (reward
    coefficients on the block's mu_sas variables).
    """
    if T < 1:
        raise ValueError("horizon must be at least 1")
    S, O, A = pomdp.n_states, pomdp.n_obs, pomdp.n_actions
    vm = VarMap(T=T, n_states=S, n_obs=O, n_actions=A, prefix=prefix, use_cuts=opts.use_cuts)
    init, e1 = first_period_setup(pomdp, opts.initial_obs, opts.fix_prefix, opts.prev_action)

    for s in range(S):
        builder.add_variable(vm.mu1(s), CONTINUOUS, 0.0, 1.0)
    for t in range(T):
        for s in range(S):
            for o in range(O):
                for a in range(A):
                    builder.add_variable(vm.mu_soa(t, s, o, a), CONTINUOUS, 0.0, 1.0)
    for t in range(T):
        for s in range(S):
            for a in range(A):
                for sp in range(S):
                    builder.add_variable(vm.mu_sas(t, s, a, sp), CONTINUOUS, 0.0, 1.0)
    dkind = CONTINUOUS if opts.relax else BINARY
    for t in range(T):
        for o in range(O):
            for a in range(A):
                builder.add_variable(vm.delta(t, o, a), dkind, 0.0, 1.0)
    if opts.use_cuts:
        for t in range(1, T):
            for sp in range(S):
                for ap in range(A):
                    for s in range(S):
                        for o in range(O):
                            for a in range(A):
                                builder.add_variable(vm.mu_x(t, sp, ap, s, o, a), CONTINUOUS, 0.0, 1.0)

    p = prefix
    # Initial distribution and its tie to the first-period moments.
    for s in range(S):
        builder.add_constraint(f"{p}init[{s}]", {vm.mu1(s): 1.0}, "=", float(init[s]))
        coeffs = {vm.mu1(s): 1.0}
        for o in range(O):
            for a in range(A):
                coeffs[vm.mu_soa(0, s, o, a)] = -1.0
        builder.add_constraint(f"{p}first_marginal[{s}]", coeffs, "=", 0.0)

    # Per-period consistency between the two moment families.
    for t in range(T):
        for s in range(S):
            for a in range(A):
                coeffs = {}
                for o in range(O):
                    coeffs[vm.mu_soa(t, s, o, a)] = 1.0
                for sp in range(S):
                    coeffs[vm.mu_sas(t, s, a, sp)] = coeffs.get(vm.mu_sas(t, s, a, sp), 0.0) - 1.0
                builder.add_constraint(f"{p}sa_link[{t},{s},{a}]", coeffs, "=", 0.0)

    # Flow between consecutive periods.
    for t in range(T - 1):
        for sp in range(S):
            coeffs = {}
            for s in range(S):
                for a in range(A):
                    coeffs[vm.mu_sas(t, s, a, sp)] = 1.0
            for o in range(O):
                for a in range(A):
                    coeffs[vm.mu_soa(t + 1, sp, o, a)] = coeffs.get(vm.mu_soa(t + 1, sp, o, a), 0.0) - 1.0
            builder.add_constraint(f"{p}flow[{t},{sp}]", coeffs, "=", 0.0)

    # Transition-kernel consistency.
    for t in range(T):
        for s in range(S):
            for a in range(A):
                for sp in range(S):
                    coeffs = {vm.mu_sas(t, s, a, sp): 1.0}
                    for s2 in range(S):
                        name = vm.mu_sas(t, s, a, s2)
                        coeffs[name] = coeffs.get(name, 0.0) - float(pomdp.transition[s, a, sp])
                    builder.add_constraint(f"{p}kernel[{t},{s},{a},{sp}]", coeffs, "=", 0.0)

    # Policy rows.
    for t in range(T):
        for o in range(O):
            builder.add_constraint(
                f"{p}policy[{t},{o}]", {vm.delta(t, o, a): 1.0 for a in range(A)}, "=", 1.0
            )

    # McCormick linearization of mu_soa = delta * (observation-weighted mass).
    for t in range(T):
        for s in range(S):
            for o in range(O):
                factor = _emission_factor(pomdp, vm, t, s, o, e1, opts.initial_obs)
                for a in range(A):
                    m = vm.mu_soa(t, s, o, a)
                    coeffs = {m: 1.0}
                    for name, w in factor.items():
                        coeffs[name] = coeffs.get(name, 0.0) - w
                    builder.add_constraint(f"{p}mc_mass[{t},{s},{o},{a}]", dict(coeffs), "<=", 0.0)
                    builder.add_constraint(
                        f"{p}mc_policy[{t},{s},{o},{a}]",
                        {m: 1.0, vm.delta(t, o, a): -1.0},
                        "<=",
                        0.0,
                    )
                    coeffs[vm.delta(t, o, a)] = coeffs.get(vm.delta(t, o, a), 0.0) - 1.0
                    builder.add_constraint(f"{p}mc_lower[{t},{s},{o},{a}]", coeffs, ">=", -1.0)

    if opts.use_cuts:
        bayes = compute_bayes_table(pomdp).table
        for t in range(1, T):
            for s in range(S):
                for o in range(O):
                    for a in range(A):
                        coeffs = {vm.mu_soa(t, s, o, a): -1.0}
                        for sp in range(S):
                            for ap in range(A):
                                coeffs[vm.mu_x(t, sp, ap, s, o, a)] = 1.0
                        builder.add_constraint(f"{p}ext_marginal[{t},{s},{o},{a}]", coeffs, "=", 0.0)
            for sp in range(S):
                for ap in range(A):
                    for s in range(S):
                        for o in range(O):
                            coeffs = {vm.mu_x(t, sp, ap, s, o, a): 1.0 for a in range(A)}
                            w = float(pomdp.emission[ap, s, o])
                            name = vm.mu_sas(t - 1, sp, ap, s)
                            coeffs[name] = coeffs.get(name, 0.0) - w
                            builder.add_constraint(f"{p}ext_mass[{t},{sp},{ap},{s},{o}]", coeffs, "=", 0.0)
            for sp in range(S):
                for ap in range(A):
                    for o in range(O):
                        slice_b = bayes[sp, ap, o]
                        for s in range(S):
                            b = float(slice_b[s])
                            for a in range(A):
                                coeffs = {vm.mu_x(t, sp, ap, s, o, a): 1.0}
                                for s2 in range(S):
                                    name = vm.mu_x(t, sp, ap, s2, o, a)
                                    coeffs[name] = coeffs.get(name, 0.0) - b
                                builder.add_constraint(
                                    f"{p}ext_bayes[{t},{sp},{ap},{s},{o},{a}]", coeffs, "=", 0.0
                                )

    objective: dict[str, float] = {}
    for t in range(T):
        for s in range(S):
            for a in range(A):
                for sp in range(S):
                    r = float(pomdp.reward[s, a, sp])
                    if r:
                        objective[vm.mu_sas(t, s, a, sp)] = r
    return vm, objective


def build_pomdp_milp(
    pomdp: Pomdp, T: int, opts: FormulationOptions | None = None
) -> tuple[LinearModel, VarMap]:
    opts = opts or FormulationOptions()
    builder = ModelBuilder()
    vm, objective = add_pomdp_block(builder, pomdp, T, opts)
    builder.set_objective("max", objective)
    return builder.finalize(), vm


def extract_policy(values: dict[str, float], vm: VarMap, relax: bool) -> MemorylessPolicy:
    """Policy table from solved variable values.

    Integral solves read delta directly.  Relaxed solves use the
    normalization delta[t,o,a] = sum_s mu_soa / sum_{s,a} mu_soa, with the
    unit vector on action 0 when an observation carries no mass.
    """
    T, O, A, S = vm.T, vm.n_obs, vm.n_actions, vm.n_states
    delta = np.zeros((T, O, A))
    if relax:
        for t in range(T):
            for o in range(O):
                num = np.array(
                    [sum(values[vm.mu_soa(t, s, o, a)] for s in range(S)) for a in range(A)]
                )
                total = num.sum()
                if total > 1e-12:
                    delta[t, o] = num / total
                else:
                    delta[t, o, 0] = 1.0
        delta = np.clip(delta, 0.0, None)
        delta /= delta.sum(axis=2, keepdims=True)
        return MemorylessPolicy.from_table(delta)
    for t in range(T):
        for o in range(O):
            for a in range(A):
                delta[t, o, a] = round(values[vm.delta(t, o, a)])
    return MemorylessPolicy.from_table(delta, deterministic=True)


def extract_moments(values: dict[str, float], vm: VarMap) -> MomentVector:
    T, S, O, A = vm.T, vm.n_states, vm.n_obs, vm.n_actions
    mu1 = np.array([values[vm.mu1(s)] for s in range(S)])
    mu_soa = np.zeros((T, S, O, A))
    mu_sas = np.zeros((T, S, A, S))
    for t in range(T):
        for s in range(S):
            for o in range(O):
                for a in range(A):
                    mu_soa[t, s, o, a] = values[vm.mu_soa(t, s, o, a)]
            for a in range(A):
                for sp in range(S):
                    mu_sas[t, s, a, sp] = values[vm.mu_sas(t, s, a, sp)]
    mu_ext = None
    if vm.use_cuts and T > 1:
        mu_ext = {}
        for t in range(1, T):
            ext = np.zeros((S, A, S, O, A))
            for sp in range(S):
                for ap in range(A):
                    for s in range(S):
                        for o in range(O):
                            for a in range(A):
                                ext[sp, ap, s, o, a] = values[vm.mu_x(t, sp, ap, s, o, a)]
            mu_ext[t] = _freeze(ext)
    return MomentVector(mu1=_freeze(mu1), mu_soa=_freeze(mu_soa), mu_sas=_freeze(mu_sas), mu_ext=mu_ext)


def solve_pomdp_milp(
    pomdp: Pomdp,
    T: int,
    opts: FormulationOptions | None = None,
    params: SolveParams | None = None,
    backend=None,
    warm_start: dict[str, float] | None = None,
) -> tuple[float, MemorylessPolicy, MomentVector, float]:
    """Solve the memoryless formulation; returns (z, policy, moments, best_bound)."""
    opts = opts or FormulationOptions()
    model, vm = build_pomdp_milp(pomdp, T, opts)
    if opts.relax:
        outcome = solve_lp(model)
    else:
        outcome = backend_solve(model, params, backend, warm_start)
    if outcome.status not in (OPTIMAL, FEASIBLE_GAP, TIME_LIMIT) or not outcome.values:
        raise SolveError(f"solve failed with status {outcome.status}: {outcome.message}")
    policy = extract_policy(outcome.values, vm, opts.relax)
    moments = extract_moments(outcome.values, vm)
    return outcome.objective, policy, moments, outcome.best_bound


def build_mdp_lp(pomdp: Pomdp, T: int, prefix: str = "") -> tuple[LinearModel, VarMap]:
    """Occupation-measure LP of the fully observed relaxation."""
    if T < 1:
        raise ValueError("horizon must be at least 1")
    S, A = pomdp.n_states, pomdp.n_actions
    vm = VarMap(T=T, n_states=S, n_obs=pomdp.n_obs, n_actions=A, prefix=prefix)
    builder = ModelBuilder()
    for s in range(S):
        builder.add_variable(vm.mu1(s), CONTINUOUS, 0.0, 1.0)
    for t in range(T):
        for s in range(S):
            for a in range(A):
                for sp in range(S):
                    builder.add_variable(vm.mu_sas(t, s, a, sp), CONTINUOUS, 0.0, 1.0)
    p = prefix
    for s in range(S):
        builder.add_constraint(f"{p}init[{s}]", {vm.mu1(s): 1.0}, "=", float(pomdp.initial[s]))
        coeffs = {vm.mu1(s): 1.0}
        for a in range(A):
            for sp in range(S):
                coeffs[vm.mu_sas(0, s, a, sp)] = -1.0
        builder.add_constraint(f"{p}first_marginal[{s}]", coeffs, "=", 0.0)
    for t in range(T - 1):
        for sp in range(S):
            coeffs = {}
            for s in range(S):
                for a in range(A):
                    coeffs[vm.mu_sas(t, s, a, sp)] = 1.0
            for a in range(A):
                for s2 in range(S):
                    name = vm.mu_sas(t + 1, sp, a, s2)
                    coeffs[name] = coeffs.get(name, 0.0) - 1.0
            builder.add_constraint(f"{p}flow[{t},{sp}]", coeffs, "=", 0.0)
    for t in range(T):
        for s in range(S):
            for a in range(A):
                for sp in range(S):
                    coeffs = {vm.mu_sas(t, s, a, sp): 1.0}
                    for s2 in range(S):
                        name = vm.mu_sas(t, s, a, s2)
                        coeffs[name] = coeffs.get(name, 0.0) - float(pomdp.transition[s, a, sp])
                    builder.add_constraint(f"{p}kernel[{t},{s},{a},{sp}]", coeffs, "=", 0.0)
    objective = {}
    for t in range(T):
        for s in range(S):
            for a in range(A):
                for sp in range(S):
                    r = float(pomdp.reward[s, a, sp])
                    if r:
                        objective[vm.mu_sas(t, s, a, sp)] = r
    builder.set_objective("max", objective)
    return builder.finalize(), vm


def solve_mdp_lp(pomdp: Pomdp, T: int) -> float:
    model, _ = build_mdp_lp(pomdp, T)
    outcome = solve_lp(model)
    if outcome.status != OPTIMAL:
        raise SolveError(f"fully observed LP failed: {outcome.status} {outcome.message}")
    return outcome.objective


def gap_metrics(z: float, z_rc: float) -> float:
    """Relative gap (z_rc - z) / z_rc; NaN when the reference value is 0."""
    if z_rc == 0.0:
        return math.nan
    return (z_rc - z) / z_rc


def integrity_gap(z: float, z_relaxed: float) -> float:
    """(z_relaxed - z) / |z_relaxed|; NaN when the relaxation value is 0."""
    if z_relaxed == 0.0:
        return math.nan
    return (z_relaxed - z) / abs(z_relaxed)


def final_gap(z: float, best_bound: float) -> float:
    """(best_bound - z) / |best_bound|; NaN when the bound is 0."""
    if best_bound == 0.0:
        return math.nan
    return (best_bound - z) / abs(best_bound)
