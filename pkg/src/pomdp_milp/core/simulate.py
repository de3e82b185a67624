"""Monte-Carlo trajectory sampling for single and weakly coupled models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import InfeasibleAction
from ..rng import make_rng
from .model import History, MemorylessPolicy, Pomdp, WcPomdp


@dataclass(frozen=True)
class Trajectory:
    """One sampled run.

    states holds s_1 .. s_{T+1} (the landing state is included), observations
    and actions hold T entries each, rewards[t] = r(s_t, a_t, s_{t+1}) summed
    over components for weakly coupled models.
    """

    states: tuple
    observations: tuple
    actions: tuple
    rewards: tuple

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


def _draw(rng: np.random.Generator, probs: np.ndarray) -> int:
    return int(rng.choice(len(probs), p=probs))


def _policy_step(policy: MemorylessPolicy, rng: np.random.Generator):
    def step(t: int, history: History):
        o = history.observations[-1]
        return _draw(rng, policy.delta[t, o])

    return step


def simulate(
    model: Pomdp | WcPomdp,
    action_source,
    T: int,
    rng_seed: int,
    run_index: int = 0,
) -> Trajectory:
    """Sample one length-T trajectory.

    ``action_source`` is either a MemorylessPolicy (sampled per step; for a
    WcPomdp, a sequence of per-component policies), or a callback
    ``f(t, history) -> action`` with t 0-based and the newest observation at
    ``history.observations[-1]``.  Joint actions for weakly coupled models
    are tuples and are checked against the budget every step.

    The same (rng_seed, run_index) pair reproduces the same trajectory.
    """
    rng = make_rng(rng_seed, run_index)
    if isinstance(model, WcPomdp):
        return _simulate_wc(model, action_source, T, rng)
    return _simulate_single(model, action_source, T, rng)


def _simulate_single(pomdp: Pomdp, action_source, T: int, rng: np.random.Generator) -> Trajectory:
    if isinstance(action_source, MemorylessPolicy):
        step = _policy_step(action_source, rng)
    elif callable(action_source):
        step = action_source
    else:
        raise TypeError("action_source must be a MemorylessPolicy or a callable")

    s = _draw(rng, pomdp.initial)
    o = _draw(rng, pomdp.emission_initial[s])
    states, observations, actions, rewards = [s], [o], [], []
    history = History((o,), ())
    for t in range(T):
        a = int(step(t, history))
        if not 0 <= a < pomdp.n_actions:
            raise InfeasibleAction(f"action {a} out of range at t={t}")
        s_next = _draw(rng, pomdp.transition[s, a])
        rewards.append(float(pomdp.reward[s, a, s_next]))
        actions.append(a)
        states.append(s_next)
        s = s_next
        if t + 1 < T:
            o = _draw(rng, pomdp.emission[a, s])
            observations.append(o)
            history = history.extended(a, o)
    return Trajectory(tuple(states), tuple(observations), tuple(actions), tuple(rewards))


def _simulate_wc(wc: WcPomdp, action_source, T: int, rng: np.random.Generator) -> Trajectory:
    M = wc.n_components
    if isinstance(action_source, Sequence) and all(
        isinstance(p, MemorylessPolicy) for p in action_source
    ):
        per_comp = [_policy_step(p, rng) for p in action_source]

        def step(t: int, history: History):
            return tuple(per_comp[m](t, history.project(m)) for m in range(M))

    elif callable(action_source):
        step = action_source
    else:
        raise TypeError(
            "action_source must be a callable or one MemorylessPolicy per component"
        )

    s = tuple(_draw(rng, c.initial) for c in wc.components)
    o = tuple(_draw(rng, c.emission_initial[s[m]]) for m, c in enumerate(wc.components))
    states, observations, actions, rewards = [s], [o], [], []
    history = History((o,), ())
    for t in range(T):
        a = tuple(int(x) for x in step(t, history))
        if len(a) != M or not all(0 <= a[m] < wc.components[m].n_actions for m in range(M)):
            raise InfeasibleAction(f"malformed joint action {a} at t={t}")
        if not wc.action_feasible(a):
            raise InfeasibleAction(f"joint action {a} violates the budget at t={t}")
        s_next = tuple(
            _draw(rng, c.transition[s[m], a[m]]) for m, c in enumerate(wc.components)
        )
        r = sum(
            float(c.reward[s[m], a[m], s_next[m]]) for m, c in enumerate(wc.components)
        )
        rewards.append(r)
        actions.append(a)
        states.append(s_next)
        s = s_next
        if t + 1 < T:
            o = tuple(
                _draw(rng, c.emission[a[m], s[m]]) for m, c in enumerate(wc.components)
            )
            observations.append(o)
            history = history.extended(a, o)
    return Trajectory(tuple(states), tuple(observations), tuple(actions), tuple(rewards))
