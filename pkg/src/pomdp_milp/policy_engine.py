"""Implicit history-dependent policies and the rolling-horizon matheuristic.

The engine turns any of the coupled formulations into an executable
controller.  At a decision step it filters per-component beliefs from the
local histories, re-solves the formulation on the remaining window with the
belief as initial distribution and the newest observation pinned, and reads
or samples the first-step action.  Sub-solves are memoized on (window,
belief, observation, previous action) so repeated runs share work.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core.belief import belief_update, initial_belief_given_obs
from .core.evaluate import evaluate_policy_exact
from .core.model import History, MemorylessPolicy, WcPomdp
from .core.simulate import Trajectory, simulate
from .errors import RejectionCapExceeded, SolveError, ZeroLikelihood
from .lpmodel import FEASIBLE_GAP, OPTIMAL, TIME_LIMIT, SolveParams
from .lpmodel.backends import get_backend
from .lpmodel.backends import solve as backend_solve
from .milp_wcpomdp import (
    WcFormulationOptions,
    _extract_components,
    build_wc_milp,
    lagrangian_colgen,
    solve_lower_bound,
    solve_wc_milp,
    tau_from_moments,
    warm_start_values,
)
from .rng import derive_run_seed

KINDS = ("IP", "LB", "R", "Rc", "LR")


def _default_params() -> SolveParams:
    return SolveParams(relative_mip_gap=0.01)


@dataclass(frozen=True)
class PolicyFormulation:
    """Which program the implicit policy re-solves, and how.

    kind IP and LB read the first-step action from the integral solution;
    R, Rc and LR sample it from the aggregated first-step action marginals
    and reject jointly until the budget holds.
    """

    kind: str = "IP"
    params: SolveParams = field(default_factory=_default_params)
    max_rejections: int = 10**5
    use_cuts: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown formulation kind {self.kind!r}")


@dataclass(frozen=True)
class _SubSolve:
    """Cached result of one re-solve: enough to act and to warm-start."""

    action: tuple | None  # IP/LB: the joint first-step action
    tau0: tuple | None  # sampled kinds: per-component first-step marginals
    policies: tuple | None  # per-component policies when the solve yields them


class _WindowProgram:
    """Reusable window program for one horizon, patched per decision step.

    With the first observation pinned, the window MILP's structure does not
    depend on which observation was seen or on the preceding action: both
    enter only through the Bayes posterior that becomes the initial belief
    (the pinned slot merely says which first-period observation column
    carries the mass, and rewards never read the observation index).  The
    program is therefore built once per horizon against a virtual pinned
    slot, and each step merely rewrites the initial-belief equality rows
    before calling the solver on the prebuilt arrays.
    """

    def __init__(self, wc: WcPomdp, H: int, use_cuts: bool):
        self.wc = wc
        self.H = H
        dummy = tuple(np.full(c.n_states, 1.0 / c.n_states) for c in wc.components)
        self.virtual_obs = tuple(
            int(np.argmax(c.emission_initial.sum(axis=0))) for c in wc.components
        )
        opts = WcFormulationOptions(
            use_cuts=use_cuts,
            relax=False,
            fix_prefix=dummy,
            initial_obs=self.virtual_obs,
            prev_action=None,
        )
        model, wvm = build_wc_milp(wc, H, opts)
        self.constant = model.objective_constant
        self.c = model.objective_vector()
        A, senses, rhs = model.constraint_arrays()
        self.A = A
        self.lo = np.where([s == "<=" for s in senses], -np.inf, rhs)
        self.hi = np.where([s == ">=" for s in senses], np.inf, rhs)
        lb, ub = model.bounds_arrays()
        self.bounds = optimize.Bounds(lb, ub)
        self.integrality = np.zeros(model.n_variables)
        self.integrality[model.binary_indices()] = 1.0
        row_of = {con.name: r for r, con in enumerate(model.constraints)}
        self.init_rows = [
            np.array([row_of[f"m{m}:init[{s}]"] for s in range(comp.n_states)])
            for m, comp in enumerate(wc.components)
        ]
        vi = {v.name: i for i, v in enumerate(model.variables)}
        self.delta_idx = []
        self.mu_idx = []
        for m, comp in enumerate(wc.components):
            vm = wvm.blocks[m]
            S, O, A_ = comp.n_states, comp.n_obs, comp.n_actions
            self.delta_idx.append(
                np.array(
                    [[[vi[vm.delta(t, o, a)] for a in range(A_)] for o in range(O)]
                     for t in range(H)]
                )
            )
            self.mu_idx.append(
                np.array(
                    [[[[vi[vm.mu_soa(t, s, o, a)] for a in range(A_)] for o in range(O)]
                      for s in range(S)]
                     for t in range(H)]
                )
            )

    def posteriors(self, states):
        """Bayes posteriors matching the evaluator's first-period setup."""
        out = []
        for m, comp in enumerate(self.wc.components):
            b_pred, pa, o0 = states[m]
            e1 = comp.emission[pa] if pa is not None else comp.emission_initial
            joint = np.asarray(b_pred, dtype=float) * e1[:, o0]
            total = joint.sum()
            if total <= 0.0:
                raise ZeroLikelihood(f"observation {o0} has probability 0 on component {m}")
            out.append(joint / total)
        return out

    def _constraints(self, posteriors):
        lo = self.lo.copy()
        hi = self.hi.copy()
        for m, rows in enumerate(self.init_rows):
            lo[rows] = posteriors[m]
            hi[rows] = posteriors[m]
        return optimize.LinearConstraint(self.A, lo, hi)

    def relax_bound(self, posteriors):
        """(upper bound, raw solution vector) of the linear relaxation."""
        res = optimize.milp(-self.c, constraints=self._constraints(posteriors), bounds=self.bounds)
        if res.status != 0 or res.x is None:
            return None, None
        return -res.fun + self.constant, res.x

    def solve_integral(self, posteriors, params: SolveParams):
        """Best integral solution within the gap/time limits, or None."""
        res = optimize.milp(
            -self.c,
            constraints=self._constraints(posteriors),
            bounds=self.bounds,
            integrality=self.integrality,
            options={
                "time_limit": params.time_limit_seconds,
                "mip_rel_gap": params.relative_mip_gap,
                "disp": False,
            },
        )
        return res.x

    def _assemble(self, acts_of):
        """Deterministic per-component policies with the virtual first-period
        row copied across all observation slots; only the slot of the actually
        pinned observation is ever queried downstream."""
        out = []
        for m, comp in enumerate(self.wc.components):
            acts = acts_of(m)
            acts[0, :] = acts[0, self.virtual_obs[m]]
            out.append(MemorylessPolicy.from_actions(acts, comp.n_actions))
        return tuple(out)

    def policies_from(self, x):
        """Window policies read off an integral solution's delta values."""
        return self._assemble(lambda m: np.argmax(x[self.delta_idx[m]], axis=2))

    def rounded(self, x):
        """Window policies rounded from a relaxed solution.

        Observations are decided by the action mass they carry (summed over
        states); rows without mass fall back to the delta variables.
        """

        def one(m):
            mass = x[self.mu_idx[m]].sum(axis=1)  # (H, O, A)
            acts = np.argmax(mass, axis=2)
            empty = mass.sum(axis=2) <= 1e-12
            if np.any(empty):
                acts_d = np.argmax(x[self.delta_idx[m]], axis=2)
                acts = np.where(empty, acts_d, acts)
            return acts

        return self._assemble(one)


class PolicyEngine:
    """Stateful wrapper owning the memo table and timing counters.

    One engine serves many runs; the memo is safe to share because
    sub-solves are deterministic in their key.  Within a run the engine
    also keeps the previous step's policies to seed the next sub-solve.
    """

    LIBRARY_CAP = 64

    def __init__(self, wc: WcPomdp, formulation: PolicyFormulation, backend=None):
        self.wc = wc
        self.formulation = formulation
        self.backend = backend
        self.memo: dict = {}
        self.act_times: list[float] = []
        self.rejection_counts: list[int] = []
        self.sub_solves = 0
        self.fast_accepts = 0
        self._last: tuple | None = None  # (policies, horizon) from this run
        self._programs: dict[tuple[int, bool], _WindowProgram] = {}
        self._library: dict[int, dict[tuple, tuple]] = {}
        resolved = backend if hasattr(backend, "solve") else get_backend(backend)
        backend_name = getattr(resolved, "name", "")
        self._warm_ok = backend_name == "reference"
        self._template_ip = backend_name == "highs"

    def begin_run(self):
        self._last = None

    # -- belief filtering ---------------------------------------------------

    def _component_state(self, comp, h: History):
        """(predictive belief, previous action, newest observation)."""
        if h.t == 1:
            return np.asarray(comp.initial, dtype=float), None, int(h.observations[0])
        b = initial_belief_given_obs(comp, int(h.observations[0]))
        for k in range(1, h.t - 1):
            b = belief_update(comp, b, int(h.actions[k - 1]), int(h.observations[k]))
        a_prev = int(h.actions[h.t - 2])
        b_pred = b.probs @ comp.transition[:, a_prev, :]
        return b_pred, a_prev, int(h.observations[h.t - 1])

    def _states(self, histories, t: int):
        if isinstance(histories, History):
            histories = [histories.project(m) for m in range(self.wc.n_components)]
        out = []
        for m, comp in enumerate(self.wc.components):
            h = histories[m]
            if h.t != t:
                raise ValueError(
                    f"component {m} history covers period {h.t}, acting at period {t}"
                )
            out.append(self._component_state(comp, h))
        return out

    # -- sub-solves ----------------------------------------------------------

    def _options(self, states, **flags) -> WcFormulationOptions:
        return WcFormulationOptions(
            fix_prefix=tuple(b for b, _, _ in states),
            prev_action=tuple(pa for _, pa, _ in states),
            initial_obs=tuple(o for _, _, o in states),
            **flags,
        )

    def _shifted_last(self, H):
        """Last window's policies advanced one period, padded to length H."""
        if self._last is None:
            return None
        policies, _ = self._last
        shifted = []
        for m in range(self.wc.n_components):
            rows = list(policies[m].delta[1:])
            if not rows:
                rows = [policies[m].delta[-1]]
            while len(rows) < H:
                rows.append(rows[-1])
            shifted.append(MemorylessPolicy.from_table(np.array(rows[:H])))
        return tuple(shifted)

    def _joint_window_eval(self, cand, opts, H: int):
        """(total conditioned value, per-period expected consumption) of a
        joint candidate, or None when some component's conditioning has zero
        likelihood under it."""
        total = 0.0
        cons = np.zeros((H, self.wc.n_resources))
        for m, comp in enumerate(self.wc.components):
            copts = opts.component_options(m)
            try:
                v, mom = evaluate_policy_exact(
                    comp,
                    cand[m],
                    H,
                    initial_obs=copts.initial_obs,
                    initial_distribution=copts.fix_prefix,
                    prev_action=copts.prev_action,
                )
            except ZeroLikelihood:
                return None
            total += v
            cons += tau_from_moments(mom) @ self.wc.consumption[m]
        return total, cons

    def _program(self, H: int, use_cuts: bool) -> _WindowProgram:
        key = (H, use_cuts)
        prog = self._programs.get(key)
        if prog is None:
            prog = _WindowProgram(self.wc, H, use_cuts)
            self._programs[key] = prog
        return prog

    def _library_add(self, H: int, policies: tuple):
        lib = self._library.setdefault(H, {})
        key = tuple(p.delta.tobytes() for p in policies)
        lib.pop(key, None)
        lib[key] = policies
        while len(lib) > self.LIBRARY_CAP:
            lib.pop(next(iter(lib)))

    def _solve_ip(self, states, H: int, opts, params):
        """Integral window solve, fast-pathed through a relaxation bound.

        Cheap integral candidates (the previous window's policies shifted by
        one period, the rounded relaxation optimum, and recent window
        policies) are evaluated exactly; the best budget-feasible one is
        returned directly when it sits within params.relative_mip_gap of the
        tightened relaxation bound, the same optimality contract a
        branch-and-bound incumbent meets at that gap.  Otherwise the full
        integral solve runs, warm-started with the best candidate where the
        backend supports that.
        """
        prog = self._program(H, True)
        posteriors = prog.posteriors(states)
        bound, x_lp = prog.relax_bound(posteriors)
        cands = []
        shifted = self._shifted_last(H)
        if shifted is not None:
            cands.append(shifted)
        if x_lp is not None:
            cands.append(prog.rounded(x_lp))
        cands.extend(self._library.get(H, {}).values())
        budget = np.asarray(self.wc.budget, dtype=float)
        best_v, best_cand = -math.inf, None
        seen = set()
        for cand in cands:
            key = tuple(p.delta.tobytes() for p in cand)
            if key in seen:
                continue
            seen.add(key)
            ev = self._joint_window_eval(cand, opts, H)
            if ev is None:
                continue
            v, cons = ev
            if np.all(cons <= budget[None, :] + 1e-9) and v > best_v:
                best_v, best_cand = v, cand
        if bound is not None and best_cand is not None:
            gap = (bound - best_v) / max(1e-10, abs(best_v))
            if gap <= params.relative_mip_gap:
                self.fast_accepts += 1
                return list(best_cand)
        # Integral fallback.  The strengthening rows never move an integral
        # optimum, but they pull the relaxation close enough to integral that
        # branch and bound with a warm incumbent terminates almost at the
        # root, so the fallback model always carries them.
        if self._template_ip:
            ip_prog = self._program(H, True)
            x = ip_prog.solve_integral(posteriors, params)
            if x is None:
                raise SolveError("window solve found no integral point within its limits")
            policies = ip_prog.policies_from(x)
        else:
            cut_opts = self._options(states, use_cuts=True, relax=False)
            model, wvm = build_wc_milp(self.wc, H, cut_opts)
            warm = None
            if self._warm_ok and best_cand is not None:
                try:
                    warm = warm_start_values(self.wc, H, list(best_cand), cut_opts)
                except ZeroLikelihood:
                    warm = None
            outcome = backend_solve(model, params, self.backend, warm)
            if outcome.status not in (OPTIMAL, FEASIBLE_GAP, TIME_LIMIT) or not outcome.values:
                raise SolveError(f"solve failed with status {outcome.status}: {outcome.message}")
            comps, _ = _extract_components(outcome.values, self.wc, wvm, relax=False)
            policies = tuple(comps)
        self._library_add(H, policies)
        return list(policies)

    def _solve(self, states, H: int) -> _SubSolve:
        kind = self.formulation.kind
        params = self.formulation.params
        self.sub_solves += 1
        if kind in ("IP", "LB"):
            opts = self._options(states, use_cuts=self.formulation.use_cuts, relax=False)
            if kind == "IP":
                policies = self._solve_ip(states, H, opts, params)
            else:
                policies = solve_lower_bound(self.wc, H, opts, params, self.backend).policies
            action = tuple(
                int(np.argmax(policies[m].delta[0, states[m][2]]))
                for m in range(self.wc.n_components)
            )
            if not self.wc.action_feasible(action):
                raise SolveError(f"integral sub-solve produced infeasible action {action}")
            return _SubSolve(action=action, tau0=None, policies=tuple(policies))
        if kind in ("R", "Rc"):
            opts = self._options(states, use_cuts=(kind == "Rc"), relax=True)
            _, _, moments, _ = solve_wc_milp(self.wc, H, opts, params, self.backend)
            tau0 = tuple(tau_from_moments(mom)[0] for mom in moments)
            return _SubSolve(action=None, tau0=tau0, policies=None)
        opts = self._options(states)
        result = lagrangian_colgen(self.wc, H, params, self.backend, opts=opts)
        tau0 = tuple(result.tau[m][0] for m in range(self.wc.n_components))
        return _SubSolve(action=None, tau0=tau0, policies=None)

    def _key(self, states, H: int):
        parts = [H]
        for b, pa, o in states:
            parts.append((np.round(b, 10).tobytes(), pa, o))
        return tuple(parts)

    def _sample(self, tau0, rng: np.random.Generator) -> tuple:
        probs = []
        for tau in tau0:
            p = np.clip(np.asarray(tau, dtype=float), 0.0, None)
            total = p.sum()
            p = p / total if total > 0 else np.full(len(p), 1.0 / len(p))
            probs.append(p)
        cap = self.formulation.max_rejections
        for attempt in range(1, cap + 1):
            a = tuple(int(rng.choice(len(p), p=p)) for p in probs)
            if self.wc.action_feasible(a):
                self.rejection_counts.append(attempt - 1)
                return a
        raise RejectionCapExceeded(
            f"no feasible joint action after {cap} draws from the relaxed marginals"
        )

    def act(self, histories, t: int, end_horizon: int, rng: np.random.Generator | None = None):
        """Joint action for period t given per-component histories up to o_t."""
        t0 = time.monotonic()
        states = self._states(histories, t)
        H = end_horizon - t + 1
        if H < 1:
            raise ValueError("end horizon precedes the current period")
        key = self._key(states, H)
        payload = self.memo.get(key)
        if payload is None:
            payload = self._solve(states, H)
            self.memo[key] = payload
        if payload.policies is not None:
            self._last = (payload.policies, H)
        if payload.action is not None:
            self.act_times.append(time.monotonic() - t0)
            return payload.action
        if rng is None:
            raise ValueError(f"kind {self.formulation.kind} samples actions and needs an rng")
        a = self._sample(payload.tau0, rng)
        self.act_times.append(time.monotonic() - t0)
        return a


def act(wc: WcPomdp, histories, t: int, end_horizon: int, formulation: PolicyFormulation,
        backend=None, rng=None, engine: PolicyEngine | None = None):
    """One-shot action choice; see PolicyEngine.act for the semantics."""
    engine = engine or PolicyEngine(wc, formulation, backend)
    return engine.act(histories, t, end_horizon, rng)


def rolling_horizon_run(
    wc: WcPomdp,
    T: int,
    T_r: int,
    formulation: PolicyFormulation,
    rng_seed: int,
    backend=None,
    run_index: int = 0,
    engine: PolicyEngine | None = None,
) -> Trajectory:
    """Simulate one run, re-solving over the clipped window at every step."""
    if not 1 <= T_r <= T:
        raise ValueError("need 1 <= T_r <= T")
    engine = engine or PolicyEngine(wc, formulation, backend)
    engine.begin_run()
    act_rng = np.random.default_rng(derive_run_seed(rng_seed, run_index) + 0x9E3779B9)

    def choose(t0: int, history: History):
        t = t0 + 1
        end = min(t + T_r - 1, T)
        return engine.act(history, t, end, act_rng)

    return simulate(wc, choose, T, rng_seed, run_index)


@dataclass
class RunReport:
    """Monte-Carlo summary of an implicit policy."""

    instance: str
    M: int
    gamma: float
    T: int
    T_r: int
    formulation: str
    n_runs: int
    nu_mean: float
    nu_stderr: float
    failures_mean: float
    failures_stderr: float
    G_LR: float
    G_Rc: float
    time_per_action_s: float
    z_LR: float = math.nan
    z_Rc: float = math.nan
    time_per_action_median_s: float = math.nan
    rejections_mean: float = 0.0

    CSV_HEADER = (
        "instance,M,gamma,T,T_r,formulation,nu_mean,nu_stderr,"
        "failures_mean,failures_stderr,G_LR,G_Rc,time_per_action_s"
    )

    def csv_row(self) -> str:
        cells = [
            self.instance,
            str(self.M),
            f"{self.gamma:g}",
            str(self.T),
            str(self.T_r),
            self.formulation,
            f"{self.nu_mean:.6f}",
            f"{self.nu_stderr:.6f}",
            f"{self.failures_mean:.6f}",
            f"{self.failures_stderr:.6f}",
            f"{self.G_LR:.6f}",
            f"{self.G_Rc:.6f}",
            f"{self.time_per_action_s:.6f}",
        ]
        return ",".join(cells)


def count_failures(wc: WcPomdp, traj: Trajectory) -> int:
    """Entries into a component's failure state from a different state."""
    n = 0
    for m, comp in enumerate(wc.components):
        f = comp.failure_state
        if f is None:
            continue
        for t in range(len(traj.actions)):
            if traj.states[t + 1][m] == f and traj.states[t][m] != f:
                n += 1
    return n


def _mean_se(xs: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(xs))
    if len(xs) < 2:
        return mean, 0.0
    return mean, float(np.std(xs, ddof=1) / math.sqrt(len(xs)))


def monte_carlo_eval(
    wc: WcPomdp,
    T: int,
    T_r: int,
    formulation: PolicyFormulation,
    N: int,
    seed: int,
    backend=None,
    instance: str = "",
    gamma: float = math.nan,
    z_lr: float | None = None,
    z_rc: float | None = None,
    compute_gaps: bool = True,
    engine: PolicyEngine | None = None,
) -> RunReport:
    """Run N independent rolling-horizon simulations and summarize them.

    The upper bounds feeding the gaps are solved once over the full horizon
    unless supplied by the caller.
    """
    if N < 1:
        raise ValueError("need at least one run")
    engine = engine or PolicyEngine(wc, formulation, backend)
    totals = np.zeros(N)
    failures = np.zeros(N)
    for i in range(N):
        traj = rolling_horizon_run(
            wc, T, T_r, formulation, seed, backend=backend, run_index=i, engine=engine
        )
        totals[i] = traj.total_reward
        failures[i] = count_failures(wc, traj)
    nu_mean, nu_se = _mean_se(totals)
    f_mean, f_se = _mean_se(failures)

    if compute_gaps:
        if z_lr is None:
            z_lr = lagrangian_colgen(wc, T, formulation.params, backend).z
        if z_rc is None:
            z_rc = solve_wc_milp(
                wc, T, WcFormulationOptions(use_cuts=True, relax=True), formulation.params, backend
            )[0]
    g_lr = (z_lr - nu_mean) / abs(z_lr) if z_lr else math.nan
    g_rc = (z_rc - nu_mean) / abs(z_rc) if z_rc else math.nan

    times = engine.act_times
    return RunReport(
        instance=instance,
        M=wc.n_components,
        gamma=gamma,
        T=T,
        T_r=T_r,
        formulation=formulation.kind,
        n_runs=N,
        nu_mean=nu_mean,
        nu_stderr=nu_se,
        failures_mean=f_mean,
        failures_stderr=f_se,
        G_LR=g_lr if z_lr is not None else math.nan,
        G_Rc=g_rc if z_rc is not None else math.nan,
        time_per_action_s=float(np.mean(times)) if times else math.nan,
        z_LR=z_lr if z_lr is not None else math.nan,
        z_Rc=z_rc if z_rc is not None else math.nan,
        time_per_action_median_s=statistics.median(times) if times else math.nan,
        rejections_mean=(
            float(np.mean(engine.rejection_counts)) if engine.rejection_counts else 0.0
        ),
    )
