"""Explicit construction of the joint POMDP of a weakly coupled instance."""

from __future__ import annotations

import math
from functools import reduce

import numpy as np

from ..errors import SizeLimitExceeded
from .model import DEFAULT_ENUM_GUARD, Pomdp, WcPomdp, enumerate_joint_actions


def product_pomdp(wc: WcPomdp, guard: int = DEFAULT_ENUM_GUARD) -> Pomdp:
    """Build the joint POMDP with Cartesian state/observation spaces and only
    the budget-feasible joint actions.

    Joint indices follow row-major (C) order over the component tuples, so
    component 0 varies slowest; ``labels["joint_actions"]`` records the action
    tuples in index order and ``labels["state_dims"]`` / ``labels["obs_dims"]``
    keep the per-component cardinalities for decoding.
    """
    comps = wc.components
    n_states = math.prod(c.n_states for c in comps)
    n_obs = math.prod(c.n_obs for c in comps)
    actions = enumerate_joint_actions(wc, guard=guard)
    if n_states * n_obs * len(actions) > guard:
        raise SizeLimitExceeded(
            f"joint build needs {n_states} states x {n_obs} observations x "
            f"{len(actions)} actions, guard is {guard}"
        )
    n_actions = len(actions)

    initial = reduce(np.kron, (c.initial for c in comps))
    emission_initial = reduce(np.kron, (c.emission_initial for c in comps))

    transition = np.zeros((n_states, n_actions, n_states))
    reward = np.zeros((n_states, n_actions, n_states))
    all_state_conditional = all(c.emission_is_state_conditional for c in comps)
    emission = np.zeros((n_actions, n_states, n_obs))

    ones = [np.ones((c.n_states, c.n_states)) for c in comps]
    for k, a in enumerate(actions):
        transition[:, k, :] = reduce(
            np.kron, (c.transition[:, a[m], :] for m, c in enumerate(comps))
        )
        for m, c in enumerate(comps):
            factors = list(ones)
            factors[m] = c.reward[:, a[m], :]
            reward[:, k, :] += reduce(np.kron, factors)
        emission[k] = reduce(np.kron, (c.emission[a[m]] for m, c in enumerate(comps)))

    labels = {
        "joint_actions": [tuple(a) for a in actions],
        "state_dims": [c.n_states for c in comps],
        "obs_dims": [c.n_obs for c in comps],
    }
    if all_state_conditional:
        return Pomdp.from_tables(
            initial,
            transition,
            emission[0],
            reward,
            emission_initial=emission_initial,
            labels=labels,
        )
    return Pomdp.from_tables(
        initial,
        transition,
        emission,
        reward,
        emission_initial=emission_initial,
        labels=labels,
    )


def joint_state_index(wc: WcPomdp, state_tuple) -> int:
    dims = [c.n_states for c in wc.components]
    return int(np.ravel_multi_index(tuple(state_tuple), dims))


def joint_obs_index(wc: WcPomdp, obs_tuple) -> int:
    dims = [c.n_obs for c in wc.components]
    return int(np.ravel_multi_index(tuple(obs_tuple), dims))
