"""Bayes filtering over a component's states."""

from __future__ import annotations

import numpy as np

from ..errors import ZeroLikelihood
from .model import Belief, History, Pomdp, _freeze


def initial_belief_given_obs(pomdp: Pomdp, o: int) -> Belief:
    """P(S_1 = s | O_1 = o) from the prior and the initial emission table."""
    if not 0 <= o < pomdp.n_obs:
        raise IndexError(f"observation {o} out of range")
    joint = pomdp.initial * pomdp.emission_initial[:, o]
    total = joint.sum()
    if total <= 0.0:
        raise ZeroLikelihood(f"initial observation {o} has probability 0 under the model")
    return Belief(probs=_freeze(joint / total))


def belief_update(pomdp: Pomdp, b: Belief, a: int, o: int) -> Belief:
    """One filtering step: condition the pushed-forward belief on observing o.

    b'(s') is proportional to p(o | a, s') * sum_s p(s'|s,a) b(s).
    """
    if not 0 <= a < pomdp.n_actions:
        raise IndexError(f"action {a} out of range")
    if not 0 <= o < pomdp.n_obs:
        raise IndexError(f"observation {o} out of range")
    pushed = b.probs @ pomdp.transition[:, a, :]
    joint = pushed * pomdp.emission[a, :, o]
    total = joint.sum()
    if total <= 0.0:
        raise ZeroLikelihood(
            f"observation {o} after action {a} has probability 0 given the current belief"
        )
    return Belief(probs=_freeze(joint / total))


def belief_from_history(pomdp: Pomdp, history: History) -> Belief:
    """Fold a full observation/action record into the current belief."""
    b = initial_belief_given_obs(pomdp, history.observations[0])
    for a, o in zip(history.actions, history.observations[1:]):
        b = belief_update(pomdp, b, a, o)
    return b
