"""Independent reference implementations used to cross-check the library.

Everything in this module is written in the most literal way available:
explicit enumeration of outcomes, plain loops, scipy.optimize.linprog for
the one LP we need.  Nothing here shares code with the solver paths under
test beyond the frozen data model.  Slow on purpose; use tiny instances.
"""

from __future__ import annotations

import itertools

import numpy as np
import scipy.optimize


def first_period(pomdp, initial_obs=None, initial_distribution=None, prev_action=None):
    """Literal Bayes for the first period: (prior over s, emission row used)."""
    prior = np.array(pomdp.initial if initial_distribution is None else initial_distribution, dtype=float)
    e1 = np.array(pomdp.emission[prev_action] if prev_action is not None else pomdp.emission_initial)
    if initial_obs is None:
        return prior, e1, None
    joint = prior * e1[:, initial_obs]
    if joint.sum() <= 0.0:
        raise ZeroDivisionError("conditioning on a zero-probability observation")
    return joint / joint.sum(), e1, initial_obs


def path_value(pomdp, delta, initial_obs=None, initial_distribution=None, prev_action=None):
    """Expected total reward of a memoryless policy by full path enumeration."""
    delta = np.asarray(delta, dtype=float)
    T = delta.shape[0]
    prior, e1, fixed_obs = first_period(pomdp, initial_obs, initial_distribution, prev_action)
    total = 0.0

    def step(t, s, o, prob):
        nonlocal total
        for a in range(pomdp.n_actions):
            pa = prob * delta[t, o, a]
            if pa == 0.0:
                continue
            for sp in range(pomdp.n_states):
                p = pa * pomdp.transition[s, a, sp]
                if p == 0.0:
                    continue
                total += p * pomdp.reward[s, a, sp]
                if t + 1 < T:
                    for op in range(pomdp.n_obs):
                        po = p * pomdp.emission[a, sp, op]
                        if po > 0.0:
                            step(t + 1, sp, op, po)

    for s in range(pomdp.n_states):
        if prior[s] == 0.0:
            continue
        if fixed_obs is not None:
            step(0, s, fixed_obs, prior[s])
        else:
            for o in range(pomdp.n_obs):
                if e1[s, o] > 0.0:
                    step(0, s, o, prior[s] * e1[s, o])
    return total


def path_moments(pomdp, delta, initial_obs=None, initial_distribution=None, prev_action=None):
    """mu_soa and mu_sas tables accumulated path by path."""
    delta = np.asarray(delta, dtype=float)
    T = delta.shape[0]
    S, O, A = pomdp.n_states, pomdp.n_obs, pomdp.n_actions
    prior, e1, fixed_obs = first_period(pomdp, initial_obs, initial_distribution, prev_action)
    mu_soa = np.zeros((T, S, O, A))
    mu_sas = np.zeros((T, S, A, S))

    def step(t, s, o, prob):
        for a in range(A):
            pa = prob * delta[t, o, a]
            if pa == 0.0:
                continue
            mu_soa[t, s, o, a] += pa
            for sp in range(S):
                p = pa * pomdp.transition[s, a, sp]
                if p == 0.0:
                    continue
                mu_sas[t, s, a, sp] += p
                if t + 1 < T:
                    for op in range(O):
                        po = p * pomdp.emission[a, sp, op]
                        if po > 0.0:
                            step(t + 1, sp, op, po)

    for s in range(S):
        if prior[s] == 0.0:
            continue
        if fixed_obs is not None:
            step(0, s, fixed_obs, prior[s])
        else:
            for o in range(O):
                if e1[s, o] > 0.0:
                    step(0, s, o, prior[s] * e1[s, o])
    return mu_soa, mu_sas


def action_marginals(pomdp, delta):
    """P(A_t = a) for each period under a memoryless policy, shape (T, A)."""
    mu_soa, _ = path_moments(pomdp, delta)
    return mu_soa.sum(axis=(1, 2))


def all_deterministic_tables(n_obs, n_actions, T):
    """Every deterministic memoryless policy as an integer table (T, O)."""
    for assignment in itertools.product(range(n_actions), repeat=T * n_obs):
        yield np.array(assignment, dtype=int).reshape(T, n_obs)


def table_to_delta(table, n_actions):
    T, O = table.shape
    delta = np.zeros((T, O, n_actions))
    for t in range(T):
        for o in range(O):
            delta[t, o, table[t, o]] = 1.0
    return delta


def best_memoryless(pomdp, T):
    """Max over deterministic memoryless policies by exhaustive search."""
    best, best_table = -np.inf, None
    for table in all_deterministic_tables(pomdp.n_obs, pomdp.n_actions, T):
        v = path_value(pomdp, table_to_delta(table, pomdp.n_actions))
        if v > best:
            best, best_table = v, table
    return best, best_table


def history_policies(n_obs, n_actions, T):
    """Deterministic history policies as tuples of per-period lookup tables.

    The period-t table maps the rank of the observation word (o_1 .. o_t)
    in lexicographic order to an action, so there are A ** (O + ... + O^T)
    policies in total.
    """
    layers = [list(itertools.product(range(n_actions), repeat=n_obs ** (t + 1))) for t in range(T)]
    yield from itertools.product(*layers)


def history_policy_value(pomdp, policy, T):
    total = 0.0

    def step(t, s, obs_word, prob):
        nonlocal total
        rank = 0
        for o in obs_word:
            rank = rank * pomdp.n_obs + o
        a = policy[t][rank]
        for sp in range(pomdp.n_states):
            p = prob * pomdp.transition[s, a, sp]
            if p == 0.0:
                continue
            total += p * pomdp.reward[s, a, sp]
            if t + 1 < T:
                for op in range(pomdp.n_obs):
                    po = p * pomdp.emission[a, sp, op]
                    if po > 0.0:
                        step(t + 1, sp, obs_word + (op,), po)

    for s in range(pomdp.n_states):
        if pomdp.initial[s] == 0.0:
            continue
        for o in range(pomdp.n_obs):
            w = pomdp.initial[s] * pomdp.emission_initial[s, o]
            if w > 0.0:
                step(0, s, (o,), w)
    return total


def best_history(pomdp, T):
    """Max over deterministic history-dependent policies (exhaustive)."""
    best = -np.inf
    n = 0
    for policy in history_policies(pomdp.n_obs, pomdp.n_actions, T):
        n += 1
        best = max(best, history_policy_value(pomdp, policy, T))
    return best, n


def mdp_value(pomdp, T):
    """Fully observed optimal value by backward induction."""
    S, A = pomdp.n_states, pomdp.n_actions
    v = np.zeros(S)
    for _ in range(T):
        q = np.zeros((S, A))
        for s in range(S):
            for a in range(A):
                q[s, a] = sum(
                    pomdp.transition[s, a, sp] * (pomdp.reward[s, a, sp] + v[sp])
                    for sp in range(S)
                )
        v = q.max(axis=1)
    return float(np.dot(pomdp.initial, v))


def feasible_joint_actions(wc, tol=1e-9):
    """Joint actions within budget, by brute force over the product space."""
    out = []
    for joint in itertools.product(*[range(c.n_actions) for c in wc.components]):
        load = sum(wc.consumption[m][a] for m, a in enumerate(joint))
        if np.all(load <= wc.budget + tol):
            out.append(joint)
    return out


def best_decomposed_almost_sure(wc, T):
    """Max over per-component deterministic policies whose actions satisfy the
    budget for every joint observation word, not only in expectation."""
    comps = wc.components
    tables = [list(all_deterministic_tables(c.n_obs, c.n_actions, T)) for c in comps]
    values = [
        [path_value(c, table_to_delta(tab, c.n_actions)) for tab in tables[m]]
        for m, c in enumerate(comps)
    ]
    obs_words = list(itertools.product(*[range(c.n_obs) for c in comps]))
    best = -np.inf
    best_choice = None
    for choice in itertools.product(*[range(len(t)) for t in tables]):
        ok = True
        for t in range(T):
            for word in obs_words:
                load = sum(
                    wc.consumption[m][tables[m][choice[m]][t, word[m]]]
                    for m in range(len(comps))
                )
                if np.any(load > wc.budget + 1e-9):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            v = sum(values[m][choice[m]] for m in range(len(comps)))
            if v > best:
                best, best_choice = v, choice
    return best, best_choice


def full_master_lp(wc, T):
    """Value of the column-generation master over the exhaustive column set.

    Every deterministic memoryless policy of every component is a column, so
    the optimum equals the converged restricted master on small instances.
    Solved with scipy.optimize.linprog to stay off the library's LP path.
    """
    comps = wc.components
    q = wc.n_resources
    columns = []  # (m, value, tau) with tau shape (T, A_m)
    for m, c in enumerate(comps):
        for tab in all_deterministic_tables(c.n_obs, c.n_actions, T):
            delta = table_to_delta(tab, c.n_actions)
            columns.append((m, path_value(c, delta), action_marginals(c, delta)))
    n = len(columns)
    c_obj = -np.array([col[1] for col in columns])
    a_ub = np.zeros((T * q, n))
    b_ub = np.zeros(T * q)
    for t in range(T):
        for i in range(q):
            row = t * q + i
            b_ub[row] = wc.budget[i]
            for j, (m, _, tau) in enumerate(columns):
                a_ub[row, j] = float(np.dot(tau[t], wc.consumption[m][:, i]))
    a_eq = np.zeros((len(comps), n))
    for j, (m, _, _) in enumerate(columns):
        a_eq[m, j] = 1.0
    res = scipy.optimize.linprog(
        c_obj, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=np.ones(len(comps)),
        bounds=(0, None), method="highs",
    )
    if not res.success:
        raise RuntimeError(f"master LP failed: {res.message}")
    return -res.fun


def lagrangian_dual_at(wc, T, beta):
    """G(beta) with the inner maxima taken over deterministic policies."""
    beta = np.asarray(beta, dtype=float).reshape(T, wc.n_resources)
    total = float(np.sum(beta * wc.budget[None, :]))
    for m, c in enumerate(wc.components):
        price = wc.consumption[m] @ beta.T  # (A_m, T)
        best = -np.inf
        for tab in all_deterministic_tables(c.n_obs, c.n_actions, T):
            delta = table_to_delta(tab, c.n_actions)
            tau = action_marginals(c, delta)
            v = path_value(c, delta) - float(np.sum(tau * price.T))
            best = max(best, v)
        total += best
    return total


def simulate_value(pomdp, delta, T, n, seed):
    """Plain Monte Carlo estimate of a memoryless policy's value."""
    rng = np.random.default_rng(seed)
    S, O, A = pomdp.n_states, pomdp.n_obs, pomdp.n_actions
    totals = np.empty(n)
    for k in range(n):
        s = rng.choice(S, p=pomdp.initial)
        o = rng.choice(O, p=pomdp.emission_initial[s])
        r = 0.0
        for t in range(T):
            a = rng.choice(A, p=delta[t, o])
            sp = rng.choice(S, p=pomdp.transition[s, a])
            r += pomdp.reward[s, a, sp]
            if t + 1 < T:
                o = rng.choice(O, p=pomdp.emission[a, sp])
            s = sp
        totals[k] = r
    se = totals.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
    return totals.mean(), se
