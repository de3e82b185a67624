"""Seeded instance generators and the two embedded counterexample models.

Everything here is a pure function of its arguments; the same seed always
reproduces the same tables byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .core.model import Pomdp, WcPomdp
from .milp_wcpomdp import decomposable_coupling
from .rng import make_rng

BANDIT_KINDS = ("REG_SAR", "RSTLS_SAR", "RSTLS_SBR", "RSTLS_DET_SBR")


def _stochastic(rng: np.random.Generator, shape) -> np.ndarray:
    """Rows uniform on [0,1], renormalized."""
    m = rng.uniform(size=shape)
    return m / m.sum(axis=-1, keepdims=True)


def gen_random_pomdp(k_s: int, k_oa: int, seed: int) -> Pomdp:
    """A dense random model with k_s states and k_oa observations = actions.

    All probability rows are uniform renormalized; rewards are uniform on
    [0, 10].
    """
    if k_s < 1 or k_oa < 1:
        raise ValueError("need k_s >= 1 and k_oa >= 1")
    rng = make_rng(seed)
    initial = _stochastic(rng, (k_s,))
    transition = _stochastic(rng, (k_s, k_oa, k_s))
    emission = _stochastic(rng, (k_s, k_oa))
    reward = rng.uniform(0.0, 10.0, size=(k_s, k_oa, k_s))
    return Pomdp.from_tables(
        initial,
        transition,
        emission,
        reward,
        labels={"family": "random", "seed": seed},
    )


@dataclass(frozen=True)
class BanditFamily:
    """One multi-armed instance description.

    kind picks the transition/reward structure; M arms with n states and n
    observations each; exactly K arms may be activated per period.
    """

    kind: str
    M: int
    n: int
    K: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BANDIT_KINDS:
            raise ValueError(f"unknown bandit kind {self.kind!r}")
        if not 1 <= self.K < self.M:
            raise ValueError("need 1 <= K < M")
        if self.n < 2:
            raise ValueError("need at least two states per arm")


def _bandit_arm(family: BanditFamily, m: int, rng: np.random.Generator) -> Pomdp:
    n = family.n
    kind = family.kind
    transition = np.zeros((n, 2, n))
    if kind == "REG_SAR":
        transition[:, 0, :] = np.eye(n)
        transition[:, 1, :] = _stochastic(rng, (n, n))
    elif kind in ("RSTLS_SAR", "RSTLS_SBR"):
        transition[:, 0, :] = _stochastic(rng, (n, n))
        transition[:, 1, :] = _stochastic(rng, (n, n))
    else:  # RSTLS_DET_SBR: deterministic kernels drawn uniformly over maps
        eye = np.eye(n)
        transition[:, 0, :] = eye[rng.integers(n, size=n)]
        transition[:, 1, :] = eye[rng.integers(n, size=n)]
    emission = _stochastic(rng, (n, n))
    initial = _stochastic(rng, (n,))

    # States are numbered 1..n; index s holds the printed state s+1.
    reward = np.zeros((n, 2, n))
    active = (10.0 / n) * (np.arange(n) + 1)
    reward[:, 1, :] = active[:, None]
    if kind in ("RSTLS_SBR", "RSTLS_DET_SBR"):
        reward[:, 0, :] = active[:, None] / family.M
    return Pomdp.from_tables(
        initial,
        transition,
        emission,
        reward,
        labels={"family": kind, "arm": m},
    )


def gen_bandit(family: BanditFamily) -> WcPomdp:
    """Multi-armed instance with the exactly-K activation coupling.

    Two resource rows encode sum_m a^m <= K and -sum_m a^m <= -K, so every
    feasible joint action activates exactly K arms.
    """
    rng = make_rng(family.seed)
    components = [_bandit_arm(family, m, rng) for m in range(family.M)]
    consumption = [np.array([[0.0, 0.0], [1.0, -1.0]]) for _ in range(family.M)]
    budget = [float(family.K), -float(family.K)]
    return WcPomdp.from_parts(
        components,
        consumption,
        budget,
        labels={
            "family": family.kind,
            "M": family.M,
            "n": family.n,
            "K": family.K,
            "seed": family.seed,
        },
    )


def _perturb_rows(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Add uniform [0, 0.1] noise to nonzero entries, then renormalize."""
    out = np.array(rows, dtype=float)
    mask = out > 0.0
    out[mask] += rng.uniform(0.0, 0.1, size=int(mask.sum()))
    return out / out.sum(axis=-1, keepdims=True)


def load_bridge_base() -> Pomdp:
    """The repair/keep component shipped with the package."""
    from .pomdp_format import parse_pomdp

    ref = resources.files("pomdp_milp").joinpath("fixtures/bridge_repair_base.pomdp")
    pomdp, _ = parse_pomdp(ref.read_text(), source_path=str(ref))
    if pomdp.failure_state is None:
        pomdp = Pomdp.from_tables(
            pomdp.initial,
            pomdp.transition,
            pomdp.state_emission() if pomdp.emission_is_state_conditional else pomdp.emission,
            pomdp.reward,
            emission_initial=pomdp.emission_initial,
            labels=pomdp.labels,
            failure_state=pomdp.n_states - 1,
        )
    return pomdp


def gen_maintenance(
    M: int,
    gamma: float,
    base_component: Pomdp | None = None,
    seed: int = 0,
    cost_failure: float = 1000.0,
    cost_repair: float = 100.0,
) -> WcPomdp:
    """M perturbed copies of a deteriorating component under a repair budget.

    Action 0 keeps the component on its deterioration kernel; action 1
    renews it, sending the state back to the initial distribution.  Rewards
    are negated costs: entering the failure state costs ``cost_failure``
    and every repair costs ``cost_repair``.  At most K = max(floor(gamma*M), 1)
    repairs fit in one period.
    """
    if M < 1:
        raise ValueError("need at least one component")
    base = base_component if base_component is not None else load_bridge_base()
    if base.n_actions != 2:
        raise ValueError("the base component must have the keep/repair action pair")
    failure = base.failure_state
    if failure is None:
        failure = base.n_states - 1
    n = base.n_states
    K = max(math.floor(gamma * M), 1)
    rng = make_rng(seed)

    reward = np.zeros((n, 2, n))
    reward[:, :, failure] -= cost_failure
    reward[:, 1, :] -= cost_repair

    components = []
    base_emission = base.state_emission() if base.emission_is_state_conditional else None
    for m in range(M):
        keep = _perturb_rows(base.transition[:, 0, :], rng)
        if base_emission is not None:
            emission = _perturb_rows(base_emission, rng)
        else:
            emission = np.stack([_perturb_rows(base.emission[a], rng) for a in range(2)])
        transition = np.zeros((n, 2, n))
        transition[:, 0, :] = keep
        transition[:, 1, :] = base.initial[None, :]
        components.append(
            Pomdp.from_tables(
                base.initial,
                transition,
                emission,
                reward,
                labels={"family": "maintenance", "copy": m},
                failure_state=failure,
            )
        )
    consumption = [np.array([[0.0], [1.0]]) for _ in range(M)]
    return WcPomdp.from_parts(
        components,
        consumption,
        [float(K)],
        labels={"family": "maintenance", "M": M, "gamma": gamma, "K": K, "seed": seed},
    )


def gen_decomposable(M: int, k_s: int, k_a: int, seed: int) -> WcPomdp:
    """Random components forced to share one action process."""
    components = [gen_random_pomdp(k_s, k_a, derive(seed, m)) for m in range(M)]
    wc = decomposable_coupling(components)
    return WcPomdp.from_parts(
        wc.components,
        wc.consumption,
        wc.budget,
        labels={"family": "decomposable", "M": M, "seed": seed},
    )


def derive(seed: int, index: int) -> int:
    """Stable per-item sub-seed."""
    return (int(seed) * 1_000_003 + index) & (2**63 - 1)


def _instance_one() -> WcPomdp:
    p1 = [0.0286, 0.4429, 0.5284]
    p2 = [0.5328, 0.2202, 0.2469]
    t1 = [
        [[0.3149, 0.2598, 0.4253], [0.2542, 0.5195, 0.2263], [0.2016, 0.7551, 0.0433]],
        [[0.3849, 0.2891, 0.3260], [0.4462, 0.1346, 0.4192], [0.0418, 0.5297, 0.4285]],
    ]
    t2 = [
        [[0.6833, 0.1797, 0.1371], [0.0398, 0.9207, 0.0394], [0.1422, 0.2202, 0.6376]],
        [[0.4665, 0.0956, 0.4379], [0.4510, 0.5168, 0.0322], [0.5864, 0.2903, 0.1234]],
    ]
    o1 = [[0.6823, 0.3177], [0.0806, 0.9194], [0.5018, 0.4982]]
    o2 = [[0.4389, 0.5611], [0.6657, 0.3343], [0.1207, 0.8793]]
    r1 = [
        [[3.3101, 7.8198, 6.9773], [2.0722, 2.6782, 3.5715], [8.4428, 2.6010, 3.2765]],
        [[1.9315, 9.3614, 2.8927], [4.8769, 5.3131, 7.3626], [3.7944, 4.5557, 8.6462]],
    ]
    r2 = [
        [[2.9600, 8.1503, 4.5911], [2.2638, 6.0290, 2.5511], [8.0789, 7.9927, 5.0259]],
        [[6.2647, 6.6832, 1.1263], [9.9182, 9.0278, 5.9492], [9.8333, 0.4466, 4.3798]],
    ]
    return _couple_pair(p1, t1, o1, r1, p2, t2, o2, r2, name="counterexample-low")


def _instance_two() -> WcPomdp:
    p1 = [0.4311, 0.5255, 0.0434]
    p2 = [0.4835, 0.1745, 0.3421]
    t1 = [
        [[0.1517, 0.3481, 0.5002], [0.1639, 0.0922, 0.7439], [0.3395, 0.2385, 0.4220]],
        [[0.3467, 0.2733, 0.3800], [0.5027, 0.3548, 0.1425], [0.2530, 0.5466, 0.2003]],
    ]
    t2 = [
        [[0.3435, 0.3291, 0.3274], [0.5964, 0.1653, 0.2383], [0.3968, 0.2626, 0.3406]],
        [[0.3160, 0.4210, 0.2630], [0.3583, 0.3882, 0.2535], [0.3611, 0.4308, 0.2081]],
    ]
    o1 = [[0.2052, 0.7948], [0.8296, 0.1704], [0.5330, 0.4670]]
    o2 = [[0.6273, 0.3727], [0.0392, 0.9608], [0.4024, 0.5976]]
    r1 = [
        [[7.0075, 6.2135, 8.4122], [9.7198, 9.5152, 2.6182], [1.8522, 7.4390, 4.9132]],
        [[2.8154, 7.0215, 1.6752], [7.8149, 0.7849, 4.3722], [5.9378, 9.1273, 1.1657]],
    ]
    r2 = [
        [[8.7418, 2.6682, 2.5227], [8.7673, 6.1198, 6.4814], [6.4971, 3.8810, 0.3476]],
        [[7.4528, 8.5013, 9.1925], [4.3003, 2.0946, 4.2973], [4.2865, 0.8470, 9.5848]],
    ]
    return _couple_pair(p1, t1, o1, r1, p2, t2, o2, r2, name="counterexample-high")


def _couple_pair(p1, t1, o1, r1, p2, t2, o2, r2, name: str) -> WcPomdp:
    def build(p, t, o, r, idx):
        # Printed tables are rounded to four decimals; accept the drift.
        transition = np.transpose(np.asarray(t, dtype=float), (1, 0, 2))
        reward = np.transpose(np.asarray(r, dtype=float), (1, 0, 2))
        return Pomdp.from_tables(
            p,
            transition,
            np.asarray(o, dtype=float),
            reward,
            labels={"component": idx},
            normalize_tol=1e-3,
        )

    c1 = build(p1, t1, o1, r1, 0)
    c2 = build(p2, t2, o2, r2, 1)
    # At most one component may take its active action per period.
    consumption = [np.array([[0.0], [1.0]]) for _ in range(2)]
    return WcPomdp.from_parts(
        [c1, c2],
        consumption,
        [1.0],
        labels={"family": "embedded", "name": name, "K": 1},
    )


def counterexample_instances() -> tuple[WcPomdp, WcPomdp]:
    """Two embedded M=2 models whose joint and decomposed optima differ.

    On the first, the decomposed integral value 44.2834 sits below the joint
    memoryless optimum 44.7122 at T=4; on the second, 47.7356 sits above
    47.3693.  They witness that the decomposed program bounds the joint
    optimum from neither side.
    """
    return _instance_one(), _instance_two()
