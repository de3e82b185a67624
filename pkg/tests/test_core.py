"""Data model, exact evaluation, beliefs, products, and simulation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import micro_pomdp, micro_wc
from pomdp_milp import (
    History,
    MemorylessPolicy,
    Pomdp,
    WcPomdp,
    ZeroLikelihood,
    belief_from_history,
    belief_update,
    enumerate_joint_actions,
    enumerate_memoryless_policies,
    evaluate_policy_exact,
    find_feasible_action,
    gen_random_pomdp,
    initial_belief_given_obs,
    product_pomdp,
    simulate,
    validate,
    validate_moments,
)
from pomdp_milp.core.evaluate import first_period_setup
from pomdp_milp.core.product import joint_obs_index, joint_state_index
from pomdp_milp.errors import EmptyActionSpace
from pomdp_milp.rng import derive_run_seed, make_rng


def random_policy(pomdp, T, seed, stochastic=False):
    rng = np.random.default_rng(seed)
    if stochastic:
        delta = rng.uniform(size=(T, pomdp.n_obs, pomdp.n_actions))
        delta /= delta.sum(axis=-1, keepdims=True)
        return MemorylessPolicy.from_table(delta)
    table = rng.integers(pomdp.n_actions, size=(T, pomdp.n_obs))
    return MemorylessPolicy.from_actions(table, pomdp.n_actions)


# -- construction and validation ---------------------------------------------


def test_from_tables_renormalizes_within_tolerance():
    p = Pomdp.from_tables(
        [0.5 + 1e-8, 0.5],
        np.full((2, 1, 2), 0.5 - 1e-9),
        [[1.0, 0.0], [0.0, 1.0]],
        np.zeros((2, 1, 2)),
    )
    assert abs(p.initial.sum() - 1.0) < 1e-12
    assert np.allclose(p.transition.sum(axis=-1), 1.0, atol=1e-12)


def test_from_tables_rejects_bad_rows():
    with pytest.raises(ValueError, match="sums to"):
        Pomdp.from_tables(
            [0.7, 0.2],
            np.full((2, 1, 2), 0.5),
            [[1.0, 0.0], [0.0, 1.0]],
            np.zeros((2, 1, 2)),
        )
    with pytest.raises(ValueError, match="negative"):
        Pomdp.from_tables(
            [1.2, -0.2],
            np.full((2, 1, 2), 0.5),
            [[1.0, 0.0], [0.0, 1.0]],
            np.zeros((2, 1, 2)),
        )


def test_action_conditional_emission_requires_initial_table():
    emission = np.full((2, 2, 2), 0.5)
    with pytest.raises(ValueError, match="initial emission"):
        Pomdp.from_tables(
            [0.5, 0.5], np.full((2, 2, 2), 0.5), emission, np.zeros((2, 2, 2))
        )
    p = Pomdp.from_tables(
        [0.5, 0.5],
        np.full((2, 2, 2), 0.5),
        emission,
        np.zeros((2, 2, 2)),
        emission_initial=[[1.0, 0.0], [0.0, 1.0]],
    )
    assert not p.emission_is_state_conditional
    with pytest.raises(ValueError):
        p.state_emission()


def test_validate_passes_on_generated_instances():
    for seed in range(5):
        assert validate(gen_random_pomdp(3, 2, seed))
        assert validate(micro_wc(seed))


def test_history_invariants():
    h = History((0,), ())
    assert h.t == 1
    h2 = h.extended(1, 0)
    assert h2.t == 2 and h2.actions == (1,)
    with pytest.raises(ValueError):
        History((0, 1), ())
    joint = History(((0, 1), (1, 0)), ((1, 0),))
    assert joint.project(1).observations == (1, 0)
    assert joint.project(1).actions == (0,)


def test_policy_tables():
    p = MemorylessPolicy.from_actions([[0, 1], [1, 1]], 2)
    assert p.deterministic
    assert np.array_equal(p.action_table(), [[0, 1], [1, 1]])
    with pytest.raises(ValueError):
        MemorylessPolicy.from_table(np.full((1, 2, 2), 0.3))


# -- exact evaluation against path enumeration --------------------------------


@pytest.mark.parametrize("seed", range(6))
def test_exact_value_matches_path_enumeration(seed):
    pomdp = gen_random_pomdp(3, 2, seed)
    T = 2 + seed % 3
    policy = random_policy(pomdp, T, seed, stochastic=(seed % 2 == 0))
    v, moments = evaluate_policy_exact(pomdp, policy, T)
    assert v == pytest.approx(oracles.path_value(pomdp, policy.delta), abs=1e-10)
    mu_soa, mu_sas = oracles.path_moments(pomdp, policy.delta)
    assert np.allclose(moments.mu_soa, mu_soa, atol=1e-10)
    assert np.allclose(moments.mu_sas, mu_sas, atol=1e-10)
    assert validate_moments(moments)


@pytest.mark.parametrize("seed", range(4))
def test_conditioned_evaluation_matches_oracle(seed):
    pomdp = gen_random_pomdp(3, 2, seed)
    policy = random_policy(pomdp, 3, seed + 50, stochastic=True)
    v, moments = evaluate_policy_exact(pomdp, policy, 3, initial_obs=1)
    assert v == pytest.approx(
        oracles.path_value(pomdp, policy.delta, initial_obs=1), abs=1e-10
    )
    # The first-period state marginal is the Bayes posterior given the
    # observation.
    prior, _, _ = oracles.first_period(pomdp, initial_obs=1)
    assert np.allclose(moments.mu1, prior, atol=1e-12)


def test_prev_action_switches_emission_row():
    rng = np.random.default_rng(3)
    emission = rng.uniform(size=(2, 3, 2))
    emission /= emission.sum(axis=-1, keepdims=True)
    init_emission = rng.uniform(size=(3, 2))
    init_emission /= init_emission.sum(axis=-1, keepdims=True)
    transition = rng.uniform(size=(3, 2, 3))
    transition /= transition.sum(axis=-1, keepdims=True)
    pomdp = Pomdp.from_tables(
        [0.2, 0.3, 0.5],
        transition,
        emission,
        rng.uniform(size=(3, 2, 3)),
        emission_initial=init_emission,
    )
    policy = random_policy(pomdp, 2, 11, stochastic=True)
    for prev in (None, 0, 1):
        v, _ = evaluate_policy_exact(pomdp, policy, 2, prev_action=prev)
        assert v == pytest.approx(
            oracles.path_value(pomdp, policy.delta, prev_action=prev), abs=1e-10
        )
    v0, _ = evaluate_policy_exact(pomdp, policy, 2, prev_action=0)
    v1, _ = evaluate_policy_exact(pomdp, policy, 2, prev_action=1)
    assert v0 != pytest.approx(v1, abs=1e-9)


def test_zero_likelihood_observation_raises():
    pomdp = Pomdp.from_tables(
        [1.0, 0.0],
        np.full((2, 1, 2), 0.5),
        [[1.0, 0.0], [0.0, 1.0]],
        np.zeros((2, 1, 2)),
    )
    policy = MemorylessPolicy.from_actions([[0, 0], [0, 0]], 1)
    with pytest.raises(ZeroLikelihood):
        evaluate_policy_exact(pomdp, policy, 2, initial_obs=1)


def test_first_period_setup_posterior_is_joint_enumeration():
    pomdp = gen_random_pomdp(4, 3, 9)
    for o in range(pomdp.n_obs):
        mu1, e1 = first_period_setup(pomdp, o, None, None)
        prior, _, _ = oracles.first_period(pomdp, initial_obs=o)
        assert np.allclose(mu1, prior, atol=1e-12)
        assert np.allclose(e1[:, o], 1.0)
        assert e1.sum() == pytest.approx(pomdp.n_states)


def test_extended_moments_marginalize_consistently():
    pomdp = gen_random_pomdp(3, 2, 21)
    policy = random_policy(pomdp, 3, 4, stochastic=True)
    _, m = evaluate_policy_exact(pomdp, policy, 3, extended=True)
    assert set(m.mu_ext) == {1, 2}
    for t, ext in m.mu_ext.items():
        assert np.allclose(ext.sum(axis=(0, 1)), m.mu_soa[t], atol=1e-12)
        assert np.allclose(ext.sum(axis=(3, 4)), m.mu_sas[t - 1], atol=1e-12)


def test_enumerate_memoryless_policies_counts():
    policies = list(enumerate_memoryless_policies(2, 2, 2))
    assert len(policies) == 16
    tables = {tuple(p.action_table().ravel()) for p in policies}
    assert len(tables) == 16


# -- belief filtering ----------------------------------------------------------


@pytest.mark.parametrize("seed", range(3))
def test_belief_update_is_bayes_rule(seed):
    pomdp = gen_random_pomdp(4, 3, seed + 70)
    rng = np.random.default_rng(seed)
    b = rng.uniform(size=4)
    b /= b.sum()
    a, o = rng.integers(3), rng.integers(3)
    from pomdp_milp import Belief

    got = belief_update(pomdp, Belief.from_probs(b), int(a), int(o))
    pushed = b @ pomdp.transition[:, a, :]
    expect = pushed * pomdp.emission[a, :, o]
    expect /= expect.sum()
    assert np.allclose(got.probs, expect, atol=1e-12)


def test_belief_from_history_composes_updates():
    pomdp = gen_random_pomdp(3, 2, 33)
    h = History((0, 1, 0), (1, 0))
    b = belief_from_history(pomdp, h)
    manual = initial_belief_given_obs(pomdp, 0)
    manual = belief_update(pomdp, manual, 1, 1)
    manual = belief_update(pomdp, manual, 0, 0)
    assert np.allclose(b.probs, manual.probs, atol=1e-15)


# -- weakly coupled structure ---------------------------------------------------


def test_budget_shift_preserves_feasible_set():
    comps = [micro_pomdp(5), micro_pomdp(6)]
    cons = [np.array([[0.0, 0.0], [1.0, -1.0]]) for _ in range(2)]
    wc = WcPomdp.from_parts(comps, cons, [1.0, -1.0])
    assert wc.budget_shift == -1.0
    assert np.all(wc.budget >= 0)
    raw = WcPomdp(
        components=tuple(comps),
        consumption=tuple(np.array([[0.0, 0.0], [1.0, -1.0]]) for _ in range(2)),
        budget=np.array([1.0, -1.0]),
    )
    assert sorted(oracles.feasible_joint_actions(wc)) == sorted(
        oracles.feasible_joint_actions(raw)
    )


@pytest.mark.parametrize("seed", range(4))
def test_joint_action_enumeration_matches_brute_force(seed):
    wc = micro_wc(seed, m=3, budget=1.0 + seed % 2)
    assert enumerate_joint_actions(wc) == oracles.feasible_joint_actions(wc)
    assert find_feasible_action(wc) == oracles.feasible_joint_actions(wc)[0]
    for a in enumerate_joint_actions(wc):
        assert wc.action_feasible(a)


def test_empty_action_space_rejected():
    comps = [micro_pomdp(1)]
    with pytest.raises(EmptyActionSpace):
        WcPomdp.from_parts(comps, [np.array([[5.0], [6.0]])], [1.0])


# -- product construction --------------------------------------------------------


def test_product_dimensions_and_indexing():
    wc = micro_wc(2, m=2)
    prod = product_pomdp(wc)
    s_sizes = [c.n_states for c in wc.components]
    assert prod.n_states == int(np.prod(s_sizes))
    assert prod.n_obs == 4
    assert prod.n_actions == len(enumerate_joint_actions(wc))
    # Index helpers agree with C-order raveling.
    assert joint_state_index(wc, (1, 0)) == np.ravel_multi_index((1, 0), s_sizes)
    assert joint_obs_index(wc, (0, 1)) == 1


def test_product_value_equals_sum_of_components():
    # Per-component policies that always satisfy the budget make the joint
    # process a product of independent chains, so the product-model value is
    # the sum of the component values.
    wc = micro_wc(3, m=2)
    actions = enumerate_joint_actions(wc)
    prod = product_pomdp(wc)
    T = 3
    comp_tables = [
        np.zeros((T, c.n_obs), dtype=int) for c in wc.components
    ]  # all-passive is feasible here
    joint_table = np.zeros((T, prod.n_obs), dtype=int)
    for t in range(T):
        for o_joint in range(prod.n_obs):
            word = np.unravel_index(o_joint, [c.n_obs for c in wc.components])
            joint = tuple(comp_tables[m][t, word[m]] for m in range(2))
            joint_table[t, o_joint] = actions.index(joint)
    v_prod, _ = evaluate_policy_exact(
        prod, MemorylessPolicy.from_actions(joint_table, prod.n_actions), T
    )
    v_sum = sum(
        oracles.path_value(c, oracles.table_to_delta(comp_tables[m], c.n_actions))
        for m, c in enumerate(wc.components)
    )
    assert v_prod == pytest.approx(v_sum, abs=1e-10)


def test_product_mdp_value_against_dp():
    wc = micro_wc(4, m=2)
    prod = product_pomdp(wc)
    assert oracles.mdp_value(prod, 3) > -np.inf  # sanity: finite


# -- simulation -------------------------------------------------------------------


def test_simulate_reproducible_and_consistent():
    pomdp = gen_random_pomdp(3, 2, 12)
    policy = random_policy(pomdp, 4, 8)
    t1 = simulate(pomdp, policy, 4, rng_seed=5)
    t2 = simulate(pomdp, policy, 4, rng_seed=5)
    assert t1.states == t2.states and t1.actions == t2.actions
    t3 = simulate(pomdp, policy, 4, rng_seed=5, run_index=1)
    assert (t1.states, t1.observations) != (t3.states, t3.observations) or (
        t1.actions != t3.actions
    )
    assert len(t1.states) == 5 and len(t1.actions) == 4 and len(t1.rewards) == 4
    for t in range(4):
        s, a, sp = t1.states[t], t1.actions[t], t1.states[t + 1]
        assert t1.rewards[t] == pytest.approx(pomdp.reward[s, a, sp])
    assert t1.total_reward == pytest.approx(sum(t1.rewards))


def test_simulate_mean_matches_exact_value():
    pomdp = gen_random_pomdp(3, 2, 13)
    policy = random_policy(pomdp, 3, 9, stochastic=True)
    v, _ = evaluate_policy_exact(pomdp, policy, 3)
    n = 4000
    totals = np.array(
        [simulate(pomdp, policy, 3, rng_seed=77, run_index=k).total_reward for k in range(n)]
    )
    se = totals.std(ddof=1) / np.sqrt(n)
    assert abs(totals.mean() - v) < 4 * se


def test_simulate_wc_actions_feasible():
    wc = micro_wc(5, m=2)

    def choose(t, history):
        assert isinstance(history, History)
        return (0, 0)

    traj = simulate(wc, choose, 3, rng_seed=3)
    assert all(wc.action_feasible(a) for a in traj.actions)
    assert all(len(o) == 2 for o in traj.observations)


# -- rng helpers --------------------------------------------------------------------


@given(st.integers(0, 2**63 - 1), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_derive_run_seed_in_range(seed, run):
    d = derive_run_seed(seed, run)
    assert 0 <= d < 2**64
    assert derive_run_seed(seed, run) == d


def test_make_rng_deterministic():
    assert make_rng(4, 2).integers(10**9) == make_rng(4, 2).integers(10**9)
    assert make_rng(4, 2).integers(10**9) != make_rng(4, 3).integers(10**9)
