"""Exact evaluation of memoryless policies via the moment recursion."""

from __future__ import annotations

import itertools

import numpy as np

from ..errors import SizeLimitExceeded, ZeroLikelihood
from .model import (
    DEFAULT_ENUM_GUARD,
    MemorylessPolicy,
    MomentVector,
    Pomdp,
    _freeze,
)


def first_period_setup(
    pomdp: Pomdp,
    initial_obs: int | None,
    initial_distribution: np.ndarray | None,
    prev_action: int | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Resolve the first-period state distribution and observation kernel.

    The prior is the model's initial distribution unless ``initial_distribution``
    overrides it (a predictive belief in the re-solving policies).  The
    first-period emission is the dedicated initial table, or row
    ``prev_action`` of the action-conditional table when the caller knows
    which action preceded the window.  When ``initial_obs`` is given the
    prior is conditioned on it by Bayes rule and the observation kernel
    collapses to the indicator at that index.

    Returns (mu1, e1) with e1[s, o] the kernel weighting P(O_1 = o | S_1 = s).
    """
    S, O = pomdp.n_states, pomdp.n_obs
    prior = pomdp.initial if initial_distribution is None else np.asarray(initial_distribution, dtype=float)
    if prior.shape != (S,):
        raise ValueError("initial distribution length must match the state count")
    e1 = pomdp.emission[prev_action] if prev_action is not None else pomdp.emission_initial
    if initial_obs is None:
        return prior.copy(), np.asarray(e1, dtype=float)
    if not 0 <= initial_obs < O:
        raise IndexError(f"observation {initial_obs} out of range")
    joint = prior * e1[:, initial_obs]
    total = joint.sum()
    if total <= 0.0:
        raise ZeroLikelihood(f"initial observation {initial_obs} has probability 0")
    indicator = np.zeros((S, O))
    indicator[:, initial_obs] = 1.0
    return joint / total, indicator


def evaluate_policy_exact(
    pomdp: Pomdp,
    policy: MemorylessPolicy,
    T: int | None = None,
    initial_obs: int | None = None,
    *,
    initial_distribution: np.ndarray | None = None,
    prev_action: int | None = None,
    extended: bool = False,
) -> tuple[float, MomentVector]:
    """Expected total reward of ``policy`` plus the full moment vector.

    The recursion propagates joint probabilities forward:

        mu_soa[t, s, o, a] = P(S_t=s, O_t=o, A_t=a)
        mu_sas[t, s, a, s'] = P(S_t=s, A_t=a, S_{t+1}=s')

    and the value is sum_t sum_{s,a,s'} r(s,a,s') mu_sas[t,s,a,s'].

    ``initial_obs``/``initial_distribution``/``prev_action`` pin the first
    period as described in ``first_period_setup``; with ``initial_obs`` the
    value is conditional on seeing that observation.

    With ``extended=True`` the result also carries, for t >= 1, the tables
    P(S_{t-1}, A_{t-1}, S_t, O_t, A_t) used by the tightened formulations.
    """
    if T is None:
        T = policy.horizon
    if policy.horizon != T:
        raise ValueError(f"policy horizon {policy.horizon} does not match T={T}")
    S, O, A = pomdp.n_states, pomdp.n_obs, pomdp.n_actions
    if policy.delta.shape != (T, O, A):
        raise ValueError(
            f"policy table shape {policy.delta.shape} does not match (T, O, A)=({T}, {O}, {A})"
        )

    mu1, e1 = first_period_setup(pomdp, initial_obs, initial_distribution, prev_action)

    mu_soa = np.zeros((T, S, O, A))
    mu_sas = np.zeros((T, S, A, S))
    mu_ext: dict[int, np.ndarray] = {}

    w = mu1[:, None] * e1  # (s, o)
    mu_soa[0] = w[:, :, None] * policy.delta[0][None, :, :]

    for t in range(T):
        mass_sa = mu_soa[t].sum(axis=1)  # (s, a)
        mu_sas[t] = mass_sa[:, :, None] * pomdp.transition
        if t + 1 < T:
            # P(S_{t+1}=s', O_{t+1}=o) depends on the previous action when
            # emissions are action-conditional.
            w_next = np.einsum("sap,apo->po", mu_sas[t], pomdp.emission)
            mu_soa[t + 1] = w_next[:, :, None] * policy.delta[t + 1][None, :, :]
            if extended:
                ext = np.einsum(
                    "sap,apo,oq->sapoq", mu_sas[t], pomdp.emission, policy.delta[t + 1]
                )
                mu_ext[t + 1] = ext

    value = float(np.einsum("tsap,sap->", mu_sas, pomdp.reward))
    moments = MomentVector(
        mu1=_freeze(mu1),
        mu_soa=_freeze(mu_soa),
        mu_sas=_freeze(mu_sas),
        mu_ext={t: _freeze(v) for t, v in mu_ext.items()} if extended else None,
    )
    return value, moments


def enumerate_memoryless_policies(n_obs: int, n_actions: int, T: int, guard: int = DEFAULT_ENUM_GUARD):
    """Yield every deterministic memoryless policy exactly once.

    There are n_actions ** (T * n_obs) of them; refuses beyond ``guard``.
    """
    count = n_actions ** (T * n_obs)
    if count > guard:
        raise SizeLimitExceeded(
            f"{n_actions}^{T * n_obs} = {count} deterministic policies exceeds the guard {guard}"
        )
    for assignment in itertools.product(range(n_actions), repeat=T * n_obs):
        table = np.asarray(assignment, dtype=int).reshape(T, n_obs)
        yield MemorylessPolicy.from_actions(table, n_actions)
