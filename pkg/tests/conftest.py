"""Shared instance factories for the test suite."""

import numpy as np
import pytest

from pomdp_milp import WcPomdp, gen_random_pomdp


def micro_pomdp(seed, n_states=3):
    """Random component with two observations and two actions."""
    return gen_random_pomdp(n_states, 2, seed)


def micro_wc(seed, m=2, budget=1.0):
    """Weakly coupled instance of micro components, one shared resource."""
    comps = [micro_pomdp(101 * seed + j, n_states=2 + (seed + j) % 2) for j in range(m)]
    cons = [np.array([[0.0], [1.0]]) for _ in range(m)]
    return WcPomdp.from_parts(comps, cons, [budget])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
