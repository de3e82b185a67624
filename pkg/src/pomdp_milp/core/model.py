"""Canonical data model: POMDP components, weakly coupled instances, policies,
beliefs, histories, and moment vectors.

Conventions used across the package:

* All indices (states, observations, actions, time) are 0-based.
* Time runs t = 0..T-1; rewards are collected on every step, including the
  transition out of the final period.
* Emissions are stored in the action-conditional form p(o | a_prev, s) as a
  table of shape (A, S, O), together with a dedicated initial-emission table
  of shape (S, O) used at t = 0 where no previous action exists.  Models whose
  observations depend only on the state simply replicate the same row across
  the action axis; ``emission_is_state_conditional`` records which flavor the
  model was built from.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import EmptyActionSpace, SizeLimitExceeded

#: Rows whose sums deviate from 1 by at most this much are renormalized on load.
DEFAULT_NORMALIZE_TOL = 1e-6

#: Row sums must match 1 to this tolerance after construction.
ROW_SUM_TOL = 1e-9

#: Default cap on explicit enumerations (joint actions, policy sets, ...).
DEFAULT_ENUM_GUARD = 10**6


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.flags.writeable = False
    return a


def _normalize_rows(table: np.ndarray, tol: float, what: str) -> np.ndarray:
    """Renormalize the last axis of ``table`` to sum to 1.

    Rows further than ``tol`` from summing to 1 are rejected.
    """
    table = np.asarray(table, dtype=float)
    if np.any(table < -1e-12):
        bad = np.argwhere(table < -1e-12)[0]
        raise ValueError(f"{what}: negative probability at index {tuple(bad)}")
    sums = table.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        bad = np.argwhere(np.abs(sums - 1.0) > tol)[0]
        raise ValueError(
            f"{what}: row {tuple(bad)} sums to {sums[tuple(bad)]:.6g}, "
            f"further than {tol:g} from 1"
        )
    return np.clip(table, 0.0, None) / sums[..., None]


@dataclass(frozen=True)
class Pomdp:
    """One partially observed component.

    Fields
    ------
    initial:   p(s), shape (S,)
    transition: p(s'|s,a), shape (S, A, S) indexed [s, a, s']
    emission:  p(o|a_prev, s), shape (A, S, O)
    emission_initial: p(o|s) at t=0, shape (S, O)
    reward:    r(s, a, s'), shape (S, A, S)
    failure_state: optional designated failure state (used by maintenance
        instances when counting failures in simulation reports)
    """

    n_states: int
    n_obs: int
    n_actions: int
    initial: np.ndarray
    transition: np.ndarray
    emission: np.ndarray
    emission_initial: np.ndarray
    reward: np.ndarray
    emission_is_state_conditional: bool = True
    labels: dict | None = None
    failure_state: int | None = None

    @staticmethod
    def from_tables(
        initial,
        transition,
        emission,
        reward,
        *,
        emission_initial=None,
        labels=None,
        failure_state=None,
        normalize_tol: float = DEFAULT_NORMALIZE_TOL,
    ) -> "Pomdp":
        """Build a component from raw tables.

        ``emission`` may be state-conditional with shape (S, O) or
        action-conditional with shape (A, S, O).  Rows are renormalized when
        they are within ``normalize_tol`` of summing to 1 and rejected
        otherwise.
        """
        initial = _normalize_rows(np.asarray(initial, dtype=float), normalize_tol, "initial")
        transition = np.asarray(transition, dtype=float)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {transition.shape}")
        n_states, n_actions, _ = transition.shape
        transition = _normalize_rows(transition, normalize_tol, "transition")

        emission = np.asarray(emission, dtype=float)
        if emission.ndim == 2:
            state_conditional = True
            n_obs = emission.shape[1]
            if emission.shape[0] != n_states:
                raise ValueError("emission rows must match the state count")
            emission = _normalize_rows(emission, normalize_tol, "emission")
            if emission_initial is None:
                emission_initial = emission
            emission = np.broadcast_to(emission, (n_actions, n_states, n_obs)).copy()
        elif emission.ndim == 3:
            state_conditional = False
            if emission.shape[:2] != (n_actions, n_states):
                raise ValueError(
                    f"action-conditional emission must have shape (A, S, O), got {emission.shape}"
                )
            n_obs = emission.shape[2]
            emission = _normalize_rows(emission, normalize_tol, "emission")
            if emission_initial is None:
                raise ValueError(
                    "action-conditional emissions need an explicit initial emission table"
                )
        else:
            raise ValueError("emission must be 2-d (S, O) or 3-d (A, S, O)")

        emission_initial = _normalize_rows(
            np.asarray(emission_initial, dtype=float), normalize_tol, "initial emission"
        )
        if emission_initial.shape != (n_states, n_obs):
            raise ValueError("initial emission table must have shape (S, O)")

        reward = np.asarray(reward, dtype=float)
        if reward.shape != (n_states, n_actions, n_states):
            raise ValueError(f"reward must have shape (S, A, S), got {reward.shape}")
        if not np.all(np.isfinite(reward)):
            raise ValueError("reward entries must be finite")
        if len(initial) != n_states:
            raise ValueError("initial distribution length must match the state count")
        if failure_state is not None and not (0 <= failure_state < n_states):
            raise ValueError("failure_state out of range")

        return Pomdp(
            n_states=n_states,
            n_obs=n_obs,
            n_actions=n_actions,
            initial=_freeze(initial),
            transition=_freeze(transition),
            emission=_freeze(emission),
            emission_initial=_freeze(emission_initial),
            reward=_freeze(reward),
            emission_is_state_conditional=state_conditional,
            labels=labels,
            failure_state=failure_state,
        )

    def state_emission(self) -> np.ndarray:
        """The (S, O) emission table; only valid for state-conditional models."""
        if not self.emission_is_state_conditional:
            raise ValueError("model has action-conditional emissions")
        return self.emission[0]


@dataclass(frozen=True)
class WcPomdp:
    """Weakly coupled instance: M components linked by resource constraints.

    The joint action space is {a : sum_m consumption[m][a_m] <= budget}.
    The budget is shifted on construction so every coordinate is nonnegative
    (consumption[m] -= k/M, budget -= k with k the smallest budget entry);
    ``budget_shift`` records k so the original data stays recoverable.
    """

    components: tuple[Pomdp, ...]
    consumption: tuple[np.ndarray, ...]  # per component, shape (A_m, q)
    budget: np.ndarray  # shape (q,)
    budget_shift: float = 0.0
    labels: dict | None = None

    @staticmethod
    def from_parts(components, consumption, budget, *, labels=None, probe_guard=DEFAULT_ENUM_GUARD) -> "WcPomdp":
        components = tuple(components)
        if not components:
            raise ValueError("need at least one component")
        budget = np.asarray(budget, dtype=float).reshape(-1)
        q = len(budget)
        mats = []
        for m, dm in enumerate(consumption):
            dm = np.asarray(dm, dtype=float)
            if dm.ndim != 2 or dm.shape != (components[m].n_actions, q):
                raise ValueError(
                    f"component {m}: consumption must have shape "
                    f"({components[m].n_actions}, {q}), got {dm.shape}"
                )
            mats.append(dm)
        if len(mats) != len(components):
            raise ValueError("one consumption table per component required")

        shift = float(budget.min())
        if shift < 0.0:
            mats = [dm - shift / len(components) for dm in mats]
            budget = budget - shift
        else:
            shift = 0.0

        wc = WcPomdp(
            components=components,
            consumption=tuple(_freeze(dm) for dm in mats),
            budget=_freeze(budget),
            budget_shift=shift,
            labels=labels,
        )
        # Fail fast on an empty joint action space.
        find_feasible_action(wc, guard=probe_guard)
        return wc

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def n_resources(self) -> int:
        return len(self.budget)

    def action_feasible(self, action: Sequence[int], tol: float = 1e-9) -> bool:
        total = np.zeros(self.n_resources)
        for m, a in enumerate(action):
            total += self.consumption[m][a]
        return bool(np.all(total <= self.budget + tol))


def find_feasible_action(wc: WcPomdp, guard: int = DEFAULT_ENUM_GUARD) -> tuple[int, ...]:
    """First joint action (lexicographic order) satisfying the budget.

    Raises EmptyActionSpace when no feasible action exists among the first
    ``guard`` tuples (which is exhaustive whenever the product space fits the
    guard).
    """
    spaces = [range(c.n_actions) for c in wc.components]
    total = 1
    for s in spaces:
        total *= len(s)
    for count, joint in enumerate(itertools.product(*spaces)):
        if count >= guard:
            raise EmptyActionSpace(
                f"no feasible joint action among the first {guard} of {total} candidates"
            )
        if wc.action_feasible(joint):
            return joint
    raise EmptyActionSpace(f"the joint action space is empty ({total} candidates checked)")


def enumerate_joint_actions(wc: WcPomdp, guard: int = DEFAULT_ENUM_GUARD) -> list[tuple[int, ...]]:
    """All feasible joint actions, lexicographic. Guarded against blowups."""
    spaces = [range(c.n_actions) for c in wc.components]
    total = 1
    for s in spaces:
        total *= len(s)
    if total > guard:
        raise SizeLimitExceeded(f"joint action space has {total} candidates, guard is {guard}")
    out = [joint for joint in itertools.product(*spaces) if wc.action_feasible(joint)]
    if not out:
        raise EmptyActionSpace("the joint action space is empty")
    return out


@dataclass(frozen=True)
class MemorylessPolicy:
    """Time-indexed conditional action distributions delta[t, o, a]."""

    horizon: int
    delta: np.ndarray  # shape (T, O, A)
    deterministic: bool = False

    @staticmethod
    def from_table(delta, deterministic: bool | None = None) -> "MemorylessPolicy":
        delta = np.asarray(delta, dtype=float)
        if delta.ndim != 3:
            raise ValueError("delta must have shape (T, O, A)")
        sums = delta.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL) or np.any(delta < -ROW_SUM_TOL):
            raise ValueError("each delta[t, o, :] must be a probability distribution")
        if deterministic is None:
            deterministic = bool(np.all((delta < 1e-12) | (np.abs(delta - 1.0) < 1e-12)))
        return MemorylessPolicy(horizon=delta.shape[0], delta=_freeze(delta), deterministic=deterministic)

    @staticmethod
    def from_actions(actions, n_actions: int) -> "MemorylessPolicy":
        """Deterministic policy from an integer table actions[t, o]."""
        actions = np.asarray(actions, dtype=int)
        T, n_obs = actions.shape
        delta = np.zeros((T, n_obs, n_actions))
        for t in range(T):
            for o in range(n_obs):
                delta[t, o, actions[t, o]] = 1.0
        return MemorylessPolicy(horizon=T, delta=_freeze(delta), deterministic=True)

    def action_table(self) -> np.ndarray:
        """argmax actions per (t, o); exact for deterministic policies."""
        return np.argmax(self.delta, axis=-1)


@dataclass(frozen=True)
class Belief:
    """Distribution over one component's states."""

    probs: np.ndarray

    @staticmethod
    def from_probs(probs, tol: float = DEFAULT_NORMALIZE_TOL) -> "Belief":
        probs = _normalize_rows(np.asarray(probs, dtype=float).reshape(-1), tol, "belief")
        return Belief(probs=_freeze(probs))

    def __len__(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class History:
    """Alternating observation/action record o_1, a_1, ..., a_{t-1}, o_t.

    Entries are ints for a single POMDP and tuples (one index per component)
    for weakly coupled instances.
    """

    observations: tuple
    actions: tuple

    def __post_init__(self):
        if len(self.observations) != len(self.actions) + 1:
            raise ValueError("a history holds exactly one more observation than actions")

    @property
    def t(self) -> int:
        """Current period (1-based length of the observation record)."""
        return len(self.observations)

    def extended(self, action, observation) -> "History":
        return History(self.observations + (observation,), self.actions + (action,))

    def project(self, m: int) -> "History":
        """Component m's own history (for weakly coupled instances)."""
        return History(
            tuple(o[m] for o in self.observations),
            tuple(a[m] for a in self.actions),
        )


@dataclass(frozen=True)
class MomentVector:
    """Joint-event probabilities under a policy.

    mu1[s]            = P(S_1 = s)
    mu_soa[t, s, o, a] = P(S_t=s, O_t=o, A_t=a)
    mu_sas[t, s, a, s'] = P(S_t=s, A_t=a, S_{t+1}=s')
    mu_ext (optional) maps 0-based t >= 1 to tables over (s_prev, a_prev, s, o, a).
    """

    mu1: np.ndarray
    mu_soa: np.ndarray
    mu_sas: np.ndarray
    mu_ext: dict[int, np.ndarray] | None = None

    @property
    def horizon(self) -> int:
        return self.mu_soa.shape[0]


@dataclass
class ValidationReport:
    ok: bool
    issues: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def _check_rows(issues: list[str], table: np.ndarray, name: str, tol: float = ROW_SUM_TOL):
    sums = table.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > tol)
    for idx in bad[:5]:
        issues.append(f"{name}{tuple(int(i) for i in idx)} sums to {sums[tuple(idx)]:.12g}")
    if len(bad) > 5:
        issues.append(f"{name}: {len(bad) - 5} more rows off")
    if np.any(table < -tol):
        idx = tuple(int(i) for i in np.argwhere(table < -tol)[0])
        issues.append(f"{name}{idx} is negative")


def validate(model) -> ValidationReport:
    """Structural validation for Pomdp and WcPomdp instances."""
    issues: list[str] = []
    if isinstance(model, Pomdp):
        if model.initial.shape != (model.n_states,):
            issues.append("initial distribution shape mismatch")
        else:
            _check_rows(issues, model.initial[None, :], "initial")
        if model.transition.shape != (model.n_states, model.n_actions, model.n_states):
            issues.append("transition shape mismatch")
        else:
            _check_rows(issues, model.transition, "transition")
        if model.emission.shape != (model.n_actions, model.n_states, model.n_obs):
            issues.append("emission shape mismatch")
        else:
            _check_rows(issues, model.emission, "emission")
        if model.emission_initial.shape != (model.n_states, model.n_obs):
            issues.append("initial emission shape mismatch")
        else:
            _check_rows(issues, model.emission_initial, "initial emission")
        if model.reward.shape != (model.n_states, model.n_actions, model.n_states):
            issues.append("reward shape mismatch")
        elif not np.all(np.isfinite(model.reward)):
            issues.append("reward has non-finite entries")
    elif isinstance(model, WcPomdp):
        for m, comp in enumerate(model.components):
            sub = validate(comp)
            issues.extend(f"component {m}: {msg}" for msg in sub.issues)
        q = model.n_resources
        for m, dm in enumerate(model.consumption):
            if dm.shape != (model.components[m].n_actions, q):
                issues.append(f"component {m}: consumption shape mismatch")
        if np.any(model.budget < -1e-12):
            issues.append("budget has a negative coordinate after normalization")
        try:
            find_feasible_action(model)
        except EmptyActionSpace:
            issues.append("joint action space is empty")
    else:
        raise TypeError(f"cannot validate {type(model).__name__}")
    return ValidationReport(ok=not issues, issues=issues)


def validate_moments(m: MomentVector, tol: float = 1e-8) -> ValidationReport:
    """Check the distribution and flow identities a moment vector must satisfy."""
    issues: list[str] = []
    T = m.horizon
    if np.any(m.mu_soa < -tol) or np.any(m.mu_soa > 1 + tol):
        issues.append("mu_soa outside [0, 1]")
    if np.any(m.mu_sas < -tol) or np.any(m.mu_sas > 1 + tol):
        issues.append("mu_sas outside [0, 1]")
    for t in range(T):
        if abs(m.mu_soa[t].sum() - 1.0) > tol:
            issues.append(f"mu_soa[{t}] sums to {m.mu_soa[t].sum():.12g}")
        if abs(m.mu_sas[t].sum() - 1.0) > tol:
            issues.append(f"mu_sas[{t}] sums to {m.mu_sas[t].sum():.12g}")
        # Same-period consistency: summing out o and s' must agree.
        lhs = m.mu_soa[t].sum(axis=1)  # (s, a)
        rhs = m.mu_sas[t].sum(axis=2)  # (s, a)
        if np.max(np.abs(lhs - rhs)) > tol:
            issues.append(f"per-period (s, a) marginals disagree at t={t}")
    for t in range(T - 1):
        # Flow: next-period state marginal matches pushed-forward mass.
        lhs = m.mu_sas[t].sum(axis=(0, 1))  # (s',)
        rhs = m.mu_soa[t + 1].sum(axis=(1, 2))  # (s,)
        if np.max(np.abs(lhs - rhs)) > tol:
            issues.append(f"state flow broken between t={t} and t={t + 1}")
    if abs(m.mu1.sum() - 1.0) > tol:
        issues.append("mu1 does not sum to 1")
    if np.max(np.abs(m.mu1 - m.mu_soa[0].sum(axis=(1, 2)))) > tol:
        issues.append("mu1 disagrees with the first-period marginal")
    return ValidationReport(ok=not issues, issues=issues)
