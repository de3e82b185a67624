"""Formulations for weakly coupled instances.

The decomposed program keeps one memoryless block per component, aggregates
per-period action marginals tau[t,m,a], and couples components only through
resource rows in expectation.  On top of it sit the almost-sure lower bound
(row generation over joint observations), the Lagrangian upper bound (column
generation with MILP pricing), and the fluid LP for shared-action instances.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core.evaluate import evaluate_policy_exact
from .core.model import MemorylessPolicy, MomentVector, Pomdp, WcPomdp, find_feasible_action
from .errors import IterationCapExceeded, SolveError
from .lpmodel import (
    CONTINUOUS,
    FEASIBLE_GAP,
    OPTIMAL,
    TIME_LIMIT,
    LinearModel,
    ModelBuilder,
    SolveParams,
)
from .lpmodel.backends import solve as backend_solve
from .lpmodel.reference import solve_lp
from .milp_pomdp import (
    FormulationOptions,
    VarMap,
    add_pomdp_block,
    extract_moments,
    extract_policy,
)


@dataclass(frozen=True)
class WcFormulationOptions:
    """Switches for the decomposed formulations.

    ``fix_prefix``/``initial_obs``/``prev_action`` are per-component lists
    (beliefs, pinned first observations, and preceding actions) used by the
    re-solving policies; each either None or of length M.
    """

    use_cuts: bool = False
    relax: bool = False
    fix_prefix: tuple | None = None
    initial_obs: tuple | None = None
    prev_action: tuple | None = None

    def component_options(self, m: int) -> FormulationOptions:
        return FormulationOptions(
            use_cuts=self.use_cuts,
            relax=self.relax,
            fix_prefix=None if self.fix_prefix is None else self.fix_prefix[m],
            initial_obs=None if self.initial_obs is None else self.initial_obs[m],
            prev_action=None if self.prev_action is None else self.prev_action[m],
        )

    def _check(self, M: int):
        for name in ("fix_prefix", "initial_obs", "prev_action"):
            v = getattr(self, name)
            if v is not None and len(v) != M:
                raise ValueError(f"{name} must have one entry per component")


@dataclass(frozen=True)
class WcVarMap:
    blocks: tuple[VarMap, ...]

    def tau(self, t: int, m: int, a: int) -> str:
        return f"tau[{t},{m},{a}]"


def _add_tau_block(builder: ModelBuilder, wc: WcPomdp, T: int, wvm: WcVarMap):
    """Aggregation variables tau[t,m,a] = sum_{s,o} mu_soa^m[t,s,o,a]."""
    for t in range(T):
        for m, comp in enumerate(wc.components):
            for a in range(comp.n_actions):
                builder.add_variable(wvm.tau(t, m, a), CONTINUOUS, 0.0, 1.0)
    for t in range(T):
        for m, comp in enumerate(wc.components):
            vm = wvm.blocks[m]
            for a in range(comp.n_actions):
                coeffs = {wvm.tau(t, m, a): -1.0}
                for s in range(comp.n_states):
                    for o in range(comp.n_obs):
                        coeffs[vm.mu_soa(t, s, o, a)] = 1.0
                builder.add_constraint(f"tau_def[{t},{m},{a}]", coeffs, "=", 0.0)


def _build_wc_base(
    wc: WcPomdp, T: int, opts: WcFormulationOptions, with_linking: bool
) -> tuple[ModelBuilder, WcVarMap]:
    """Shared skeleton: per-component blocks, tau aggregation, objective."""
    opts._check(wc.n_components)
    builder = ModelBuilder()
    blocks = []
    objective: dict[str, float] = {}
    for m, comp in enumerate(wc.components):
        vm, obj = add_pomdp_block(builder, comp, T, opts.component_options(m), prefix=f"m{m}:")
        blocks.append(vm)
        objective.update(obj)
    wvm = WcVarMap(blocks=tuple(blocks))
    _add_tau_block(builder, wc, T, wvm)
    if with_linking:
        q = wc.n_resources
        for t in range(T):
            for i in range(q):
                coeffs = {}
                for m, comp in enumerate(wc.components):
                    for a in range(comp.n_actions):
                        d = float(wc.consumption[m][a, i])
                        if d:
                            coeffs[wvm.tau(t, m, a)] = d
                builder.add_constraint(f"link[{t},{i}]", coeffs, "<=", float(wc.budget[i]))
    builder.set_objective("max", objective)
    return builder, wvm


def build_wc_milp(
    wc: WcPomdp, T: int, opts: WcFormulationOptions | None = None
) -> tuple[LinearModel, WcVarMap]:
    opts = opts or WcFormulationOptions()
    builder, wvm = _build_wc_base(wc, T, opts, with_linking=True)
    return builder.finalize(), wvm


def _extract_components(values, wc: WcPomdp, wvm: WcVarMap, relax: bool):
    policies = [extract_policy(values, vm, relax) for vm in wvm.blocks]
    moments = [extract_moments(values, vm) for vm in wvm.blocks]
    return policies, moments


def tau_from_moments(moments: MomentVector) -> np.ndarray:
    """Per-period action marginals (T, A) of one component."""
    return moments.mu_soa.sum(axis=(1, 2))


def warm_start_values(
    wc: WcPomdp, T: int, policies, opts: WcFormulationOptions
) -> dict[str, float]:
    """Complete variable assignment induced by per-component policies.

    Forward-evaluates each policy under the block's conditioning so the
    values satisfy every block constraint exactly; linking rows may or may
    not hold, which the solver checks before adopting the point as an
    incumbent.
    """
    values: dict[str, float] = {}
    for m, comp in enumerate(wc.components):
        copts = opts.component_options(m)
        vm = VarMap(
            T=T,
            n_states=comp.n_states,
            n_obs=comp.n_obs,
            n_actions=comp.n_actions,
            prefix=f"m{m}:",
            use_cuts=opts.use_cuts,
        )
        policy = policies[m]
        _, mom = evaluate_policy_exact(
            comp,
            policy,
            T,
            initial_obs=copts.initial_obs,
            initial_distribution=copts.fix_prefix,
            prev_action=copts.prev_action,
            extended=opts.use_cuts,
        )
        S, O, A = comp.n_states, comp.n_obs, comp.n_actions
        for s in range(S):
            values[vm.mu1(s)] = float(mom.mu1[s])
        for t in range(T):
            for o in range(O):
                for a in range(A):
                    values[vm.delta(t, o, a)] = float(policy.delta[t, o, a])
            for s in range(S):
                for o in range(O):
                    for a in range(A):
                        values[vm.mu_soa(t, s, o, a)] = float(mom.mu_soa[t, s, o, a])
                for a in range(A):
                    for sp in range(S):
                        values[vm.mu_sas(t, s, a, sp)] = float(mom.mu_sas[t, s, a, sp])
        if opts.use_cuts and mom.mu_ext:
            for t in range(1, T):
                ext = mom.mu_ext[t]
                for sp in range(S):
                    for ap in range(A):
                        for s in range(S):
                            for o in range(O):
                                for a in range(A):
                                    values[vm.mu_x(t, sp, ap, s, o, a)] = float(
                                        ext[sp, ap, s, o, a]
                                    )
        tau = tau_from_moments(mom)
        wvm = WcVarMap(blocks=())
        for t in range(T):
            for a in range(A):
                values[wvm.tau(t, m, a)] = float(tau[t, a])
    return values


def solve_wc_milp(
    wc: WcPomdp,
    T: int,
    opts: WcFormulationOptions | None = None,
    params: SolveParams | None = None,
    backend=None,
    warm_start: dict[str, float] | None = None,
) -> tuple[float, list[MemorylessPolicy], list[MomentVector], float]:
    """Solve the expectation-linked program; (z, policies, moments, best_bound)."""
    opts = opts or WcFormulationOptions()
    model, wvm = build_wc_milp(wc, T, opts)
    if opts.relax:
        outcome = solve_lp(model)
    else:
        outcome = backend_solve(model, params, backend, warm_start)
    if outcome.status not in (OPTIMAL, FEASIBLE_GAP, TIME_LIMIT) or not outcome.values:
        raise SolveError(f"solve failed with status {outcome.status}: {outcome.message}")
    policies, moments = _extract_components(outcome.values, wc, wvm, opts.relax)
    return outcome.objective, policies, moments, outcome.best_bound


# ---------------------------------------------------------------------------
# Almost-sure lower bound by row generation over joint observations.


@dataclass
class LowerBoundResult:
    z: float
    policies: list[MemorylessPolicy]
    iterations: int
    added_rows: list[tuple[int, tuple, int]]  # (t, joint observation, resource row)
    feasible: bool  # False only when the iteration cap was hit


def _separation(wc: WcPomdp, T: int, deltas: list[np.ndarray], tol: float = 1e-7):
    """Most violated almost-sure row per (t, resource); yields (t, o_joint, i, excess)."""
    out = []
    q = wc.n_resources
    for t in range(T):
        for i in range(q):
            total = 0.0
            obs_choice = []
            for m, comp in enumerate(wc.components):
                # For each component pick the observation whose induced action
                # consumes the most of resource i at period t.
                scores = deltas[m][t] @ wc.consumption[m][:, i]  # (O_m,)
                o_best = int(np.argmax(scores))
                obs_choice.append(o_best)
                total += float(scores[o_best])
            if total > float(wc.budget[i]) + tol:
                out.append((t, tuple(obs_choice), i, total - float(wc.budget[i])))
    return out


def solve_lower_bound(
    wc: WcPomdp,
    T: int,
    opts: WcFormulationOptions | None = None,
    params: SolveParams | None = None,
    backend=None,
    max_iterations: int = 10**4,
) -> LowerBoundResult:
    """Best decomposable policy under the almost-sure budget, by row generation.

    The master program is the decomposed model without expectation linking;
    violated rows  sum_m sum_a D^m_i(a) delta^m[t, o^m, a] <= b_i  are added
    until the returned policy satisfies the budget for every joint
    observation.
    """
    opts = opts or WcFormulationOptions()
    if opts.relax:
        raise ValueError("the almost-sure bound is defined for integral policies")
    rows: list[tuple[int, tuple, int]] = []
    last = None
    for it in range(1, max_iterations + 1):
        builder, wvm = _build_wc_base(wc, T, opts, with_linking=False)
        for t, obs, i in rows:
            coeffs = {}
            for m, comp in enumerate(wc.components):
                vm = wvm.blocks[m]
                for a in range(comp.n_actions):
                    d = float(wc.consumption[m][a, i])
                    if d:
                        coeffs[vm.delta(t, obs[m], a)] = d
            builder.add_constraint(
                f"as_link[{t},{i},{','.join(map(str, obs))}]", coeffs, "<=", float(wc.budget[i])
            )
        outcome = backend_solve(builder.finalize(), params, backend)
        if outcome.status not in (OPTIMAL, FEASIBLE_GAP) or not outcome.values:
            raise SolveError(f"lower-bound master failed: {outcome.status} {outcome.message}")
        policies, _ = _extract_components(outcome.values, wc, wvm, relax=False)
        deltas = [p.delta for p in policies]
        violated = _separation(wc, T, deltas)
        last = LowerBoundResult(
            z=outcome.objective,
            policies=policies,
            iterations=it,
            added_rows=list(rows),
            feasible=not violated,
        )
        if not violated:
            return last
        for t, obs, i, _ in violated:
            key = (t, obs, i)
            if key not in rows:
                rows.append(key)
    raise IterationCapExceeded(
        f"row generation did not converge within {max_iterations} iterations",
        partial=last,
    )


# ---------------------------------------------------------------------------
# Lagrangian relaxation by column generation.


@dataclass(frozen=True)
class Column:
    m: int
    policy: MemorylessPolicy
    value: float  # expected reward of the column's policy on component m
    tau: np.ndarray  # (T, A_m) action marginals under the policy
    cons: np.ndarray  # (T, q) expected consumption per period


@dataclass(frozen=True)
class DualPrices:
    beta: np.ndarray  # (T, q), nonnegative linking duals
    pi: np.ndarray  # (M,), convexity duals


@dataclass
class ColgenResult:
    z: float
    columns: list[Column]
    weights: list[float]
    tau: list[np.ndarray]  # per component (T, A_m) aggregated action marginals
    duals: DualPrices
    master_values: list[float]
    iterations: int
    converged: bool
    dual_bound: float


def _column_from_policy(
    wc: WcPomdp, T: int, m: int, policy: MemorylessPolicy, opts: WcFormulationOptions
) -> Column:
    comp = wc.components[m]
    copts = opts.component_options(m)
    value, moments = evaluate_policy_exact(
        comp,
        policy,
        T,
        initial_obs=copts.initial_obs,
        initial_distribution=copts.fix_prefix,
        prev_action=copts.prev_action,
    )
    tau = tau_from_moments(moments)  # (T, A_m)
    cons = tau @ wc.consumption[m]  # (T, q)
    return Column(m=m, policy=policy, value=float(value), tau=tau, cons=cons)


def _solve_master(wc: WcPomdp, T: int, columns: list[Column]):
    builder = ModelBuilder()
    for j, col in enumerate(columns):
        builder.add_variable(f"lam[{j}]", CONTINUOUS, 0.0, math.inf)
    q = wc.n_resources
    for t in range(T):
        for i in range(q):
            coeffs = {
                f"lam[{j}]": float(col.cons[t, i])
                for j, col in enumerate(columns)
                if col.cons[t, i] != 0.0
            }
            builder.add_constraint(f"link[{t},{i}]", coeffs, "<=", float(wc.budget[i]))
    for m in range(wc.n_components):
        coeffs = {f"lam[{j}]": 1.0 for j, col in enumerate(columns) if col.m == m}
        builder.add_constraint(f"convex[{m}]", coeffs, "=", 1.0)
    builder.set_objective("max", {f"lam[{j}]": col.value for j, col in enumerate(columns)})
    outcome, duals = solve_lp(builder.finalize(), want_duals=True)
    if outcome.status != OPTIMAL:
        raise SolveError(f"restricted master failed: {outcome.status} {outcome.message}")
    beta = np.zeros((T, q))
    for t in range(T):
        for i in range(q):
            beta[t, i] = max(0.0, duals.get(f"link[{t},{i}]", 0.0))
    pi = np.array([duals.get(f"convex[{m}]", 0.0) for m in range(wc.n_components)])
    lam = [outcome.values[f"lam[{j}]"] for j in range(len(columns))]
    return outcome.objective, lam, DualPrices(beta=beta, pi=pi)


def _pricing(
    wc: WcPomdp,
    T: int,
    m: int,
    beta: np.ndarray,
    opts: WcFormulationOptions,
    params: SolveParams | None,
    backend,
) -> tuple[float, MemorylessPolicy]:
    """max over component-m policies of (reward - beta-priced consumption)."""
    comp = wc.components[m]
    builder = ModelBuilder()
    copts = replace(opts.component_options(m), use_cuts=True, relax=False)
    vm, objective = add_pomdp_block(builder, comp, T, copts)
    # Per-period price on the action marginal, spread over mu_sas.
    price = wc.consumption[m] @ beta.T  # (A_m, T)
    for t in range(T):
        for s in range(comp.n_states):
            for a in range(comp.n_actions):
                w = float(price[a, t])
                if w:
                    for sp in range(comp.n_states):
                        name = vm.mu_sas(t, s, a, sp)
                        objective[name] = objective.get(name, 0.0) - w
    builder.set_objective("max", objective)
    outcome = backend_solve(builder.finalize(), params, backend)
    if outcome.status not in (OPTIMAL, FEASIBLE_GAP) or not outcome.values:
        raise SolveError(f"pricing on component {m} failed: {outcome.status}")
    policy = extract_policy(outcome.values, vm, relax=False)
    return outcome.objective, policy


def lagrangian_colgen(
    wc: WcPomdp,
    T: int,
    params: SolveParams | None = None,
    backend=None,
    max_iterations: int = 500,
    tol: float = 1e-6,
    opts: WcFormulationOptions | None = None,
) -> ColgenResult:
    """Lagrangian bound via a restricted master over per-component policy
    columns and MILP pricing with period-priced rewards.

    ``opts`` carries only the conditioning fields (fix_prefix, initial_obs,
    prev_action) so rolling sub-problems can be priced; cuts are always on in
    pricing and the relax flag is ignored.
    """
    opts = opts or WcFormulationOptions()
    opts._check(wc.n_components)
    M = wc.n_components
    a_e = find_feasible_action(wc)
    columns: list[Column] = []
    for m, comp in enumerate(wc.components):
        actions = np.full((T, comp.n_obs), a_e[m], dtype=int)
        policy = MemorylessPolicy.from_actions(actions, comp.n_actions)
        columns.append(_column_from_policy(wc, T, m, policy, opts))

    master_values: list[float] = []
    dual_bound = math.inf
    result = None
    for it in range(1, max_iterations + 1):
        z_master, lam, duals = _solve_master(wc, T, columns)
        master_values.append(z_master)
        reduced = np.zeros(M)
        new_cols: list[Column] = []
        pricing_sum = 0.0
        for m in range(M):
            z_m, policy = _pricing(wc, T, m, duals.beta, opts, params, backend)
            pricing_sum += z_m
            reduced[m] = z_m - duals.pi[m]
            if reduced[m] > tol:
                new_cols.append(_column_from_policy(wc, T, m, policy, opts))
        # Valid bound from the dual function at the current prices.
        g_beta = float(np.sum(duals.beta * np.asarray(wc.budget)[None, :])) + pricing_sum
        dual_bound = min(dual_bound, g_beta)
        tau = _aggregate_tau(wc, T, columns, lam)
        result = ColgenResult(
            z=z_master,
            columns=list(columns),
            weights=lam,
            tau=tau,
            duals=duals,
            master_values=list(master_values),
            iterations=it,
            converged=not new_cols and float(reduced.sum()) <= tol,
            dual_bound=dual_bound,
        )
        if result.converged:
            return result
        if not new_cols:
            # Numerical stall: reduced costs within tolerance individually.
            result.converged = True
            return result
        columns.extend(new_cols)
    raise IterationCapExceeded(
        f"column generation did not converge within {max_iterations} iterations",
        partial=result,
    )


def _aggregate_tau(wc: WcPomdp, T: int, columns: list[Column], lam: list[float]):
    """Per-component convex combinations of the columns' action marginals."""
    tau = [np.zeros((T, comp.n_actions)) for comp in wc.components]
    for j, col in enumerate(columns):
        if lam[j] <= 0.0:
            continue
        tau[col.m] += lam[j] * col.tau
    for m, comp in enumerate(wc.components):
        # Guard against an all-zero row when every column had weight 0
        # (cannot happen with the convexity rows, but stay safe).
        rows = tau[m].sum(axis=1)
        for t in range(T):
            if rows[t] <= 0.0:
                tau[m][t, :] = 1.0 / comp.n_actions
    return tau


# ---------------------------------------------------------------------------
# Fluid LP for shared-action (decomposable) instances.


def build_fluid(wc: WcPomdp, T: int) -> LinearModel:
    """LP over per-component flows x with shared per-period action mass A[t,a].

    Requires every component to share one action index set; observations play
    no role (the shared action process is decided from time alone).
    """
    n_actions = wc.components[0].n_actions
    if any(c.n_actions != n_actions for c in wc.components):
        raise ValueError("fluid form needs components with identical action sets")
    builder = ModelBuilder()
    M = wc.n_components

    def x1(m, s):
        return f"x1[{m},{s}]"

    def x(t, m, s, a, sp):
        return f"x[{t},{m},{s},{a},{sp}]"

    def A(t, a):
        return f"A[{t},{a}]"

    for m, comp in enumerate(wc.components):
        for s in range(comp.n_states):
            builder.add_variable(x1(m, s), CONTINUOUS, 0.0, 1.0)
    for t in range(T):
        for m, comp in enumerate(wc.components):
            for s in range(comp.n_states):
                for a in range(n_actions):
                    for sp in range(comp.n_states):
                        builder.add_variable(x(t, m, s, a, sp), CONTINUOUS, 0.0, 1.0)
    for t in range(T):
        for a in range(n_actions):
            builder.add_variable(A(t, a), CONTINUOUS, 0.0, 1.0)

    for m, comp in enumerate(wc.components):
        S = comp.n_states
        for s in range(S):
            builder.add_constraint(f"init[{m},{s}]", {x1(m, s): 1.0}, "=", float(comp.initial[s]))
            coeffs = {x1(m, s): 1.0}
            for a in range(n_actions):
                for sp in range(S):
                    coeffs[x(0, m, s, a, sp)] = -1.0
            builder.add_constraint(f"first_marginal[{m},{s}]", coeffs, "=", 0.0)
        for t in range(T - 1):
            for sp in range(S):
                coeffs = {}
                for s in range(S):
                    for a in range(n_actions):
                        coeffs[x(t, m, s, a, sp)] = 1.0
                for a in range(n_actions):
                    for s2 in range(S):
                        name = x(t + 1, m, sp, a, s2)
                        coeffs[name] = coeffs.get(name, 0.0) - 1.0
                builder.add_constraint(f"flow[{t},{m},{sp}]", coeffs, "=", 0.0)
        for t in range(T):
            for s in range(S):
                for a in range(n_actions):
                    for sp in range(S):
                        coeffs = {x(t, m, s, a, sp): 1.0}
                        for s2 in range(S):
                            name = x(t, m, s, a, s2)
                            coeffs[name] = coeffs.get(name, 0.0) - float(comp.transition[s, a, sp])
                        builder.add_constraint(f"kernel[{t},{m},{s},{a},{sp}]", coeffs, "=", 0.0)
        for t in range(T):
            for a in range(n_actions):
                coeffs = {A(t, a): -1.0}
                for s in range(S):
                    for sp in range(S):
                        coeffs[x(t, m, s, a, sp)] = 1.0
                builder.add_constraint(f"shared[{t},{m},{a}]", coeffs, "=", 0.0)

    objective = {}
    for t in range(T):
        for m, comp in enumerate(wc.components):
            for s in range(comp.n_states):
                for a in range(n_actions):
                    for sp in range(comp.n_states):
                        r = float(comp.reward[s, a, sp])
                        if r:
                            objective[x(t, m, s, a, sp)] = r
    builder.set_objective("max", objective)
    return builder.finalize()


def solve_fluid(wc: WcPomdp, T: int) -> float:
    outcome = solve_lp(build_fluid(wc, T))
    if outcome.status != OPTIMAL:
        raise SolveError(f"fluid LP failed: {outcome.status} {outcome.message}")
    return outcome.objective


def decomposable_coupling(components) -> WcPomdp:
    """Couple components so every feasible joint action is a shared one.

    Consecutive pairs get two opposite resource rows per action index,
    enforcing a^m = a^{m+1} in the almost-sure sense and equal marginals in
    expectation; budgets are all 0.
    """
    components = tuple(components)
    n_actions = components[0].n_actions
    if any(c.n_actions != n_actions for c in components):
        raise ValueError("shared-action coupling needs identical action sets")
    M = len(components)
    if M == 1:
        return WcPomdp.from_parts(components, [np.zeros((n_actions, 1))], [0.0])
    q = 2 * n_actions * (M - 1)
    consumption = [np.zeros((n_actions, q)) for _ in range(M)]
    for j in range(M - 1):
        for a in range(n_actions):
            r1 = 2 * (j * n_actions + a)
            r2 = r1 + 1
            consumption[j][a, r1] += 1.0
            consumption[j + 1][a, r1] -= 1.0
            consumption[j][a, r2] -= 1.0
            consumption[j + 1][a, r2] += 1.0
    return WcPomdp.from_parts(components, consumption, np.zeros(q))


# ---------------------------------------------------------------------------
# Bounds report.


@dataclass
class BoundsReport:
    instance: str
    T: int
    z_LB: float
    z_IP: float
    z_LR: float
    z_Rc: float
    z_R: float
    times: dict[str, float] = field(default_factory=dict)
    statuses: dict[str, str] = field(default_factory=dict)

    CSV_HEADER = "instance,T,z_LB,z_IP,z_LR,z_Rc,z_R,t_LB,t_IP,t_LR,t_Rc,t_R"

    def csv_row(self) -> str:
        vals = [self.instance, str(self.T)]
        for z in (self.z_LB, self.z_IP, self.z_LR, self.z_Rc, self.z_R):
            vals.append(f"{z:.6f}")
        for k in ("LB", "IP", "LR", "Rc", "R"):
            vals.append(f"{self.times.get(k, 0.0):.3f}")
        return ",".join(vals)

    def orderings(self, tol: float = 1e-5) -> list[tuple[str, bool]]:
        return [
            ("z_LB <= z_IP", self.z_LB <= self.z_IP + tol),
            ("z_IP <= z_LR", self.z_IP <= self.z_LR + tol),
            ("z_LR <= z_Rc", self.z_LR <= self.z_Rc + tol),
            ("z_Rc <= z_R", self.z_Rc <= self.z_R + tol),
        ]


def compute_bounds(
    wc: WcPomdp,
    T: int,
    params: SolveParams | None = None,
    backend=None,
    instance: str = "",
) -> BoundsReport:
    times: dict[str, float] = {}
    statuses: dict[str, str] = {}

    def _timed(key, fn):
        t0 = time.monotonic()
        try:
            value = fn()
            statuses[key] = "ok"
        except (SolveError, IterationCapExceeded) as e:
            statuses[key] = f"failed: {e}"
            value = math.nan
        times[key] = time.monotonic() - t0
        return value

    z_lb = _timed("LB", lambda: solve_lower_bound(wc, T, None, params, backend).z)
    z_ip = _timed("IP", lambda: solve_wc_milp(wc, T, WcFormulationOptions(), params, backend)[0])
    z_lr = _timed("LR", lambda: lagrangian_colgen(wc, T, params, backend).z)
    z_rc = _timed(
        "Rc", lambda: solve_wc_milp(wc, T, WcFormulationOptions(use_cuts=True, relax=True), params, backend)[0]
    )
    z_r = _timed("R", lambda: solve_wc_milp(wc, T, WcFormulationOptions(relax=True), params, backend)[0])
    return BoundsReport(
        instance=instance, T=T, z_LB=z_lb, z_IP=z_ip, z_LR=z_lr, z_Rc=z_rc, z_R=z_r,
        times=times, statuses=statuses,
    )
