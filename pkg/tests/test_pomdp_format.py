"""Text and JSON round trips, grammar coverage, and error reporting."""

import importlib.resources

import numpy as np
import pytest

from conftest import micro_wc
from pomdp_milp import (
    FormatError,
    Pomdp,
    dump_wcpomdp,
    gen_random_pomdp,
    load_pomdp_file,
    load_wcpomdp,
    parse_pomdp,
    validate,
    write_pomdp,
)
from pomdp_milp.pomdp_format import PomdpFileMeta

TIGER = """
# a classic two-state problem
discount: 0.95
values: reward
states: tiger-left tiger-right
actions: listen open-left open-right
observations: hear-left hear-right

start: uniform

T: listen
identity

T: open-left
uniform

T: open-right
uniform

O: listen : tiger-left : hear-left 0.85
O: listen : tiger-left : hear-right 0.15
O: listen : tiger-right : hear-left 0.15
O: listen : tiger-right : hear-right 0.85
O: open-left : * uniform
O: open-right : * uniform

R: listen : * : * : * -1.0
R: open-left : tiger-left : * : * -100.0
R: open-left : tiger-right : * : * 10.0
R: open-right : tiger-left : * : * 10.0
R: open-right : tiger-right : * : * -100.0
"""


def test_parse_named_tiger():
    model, meta = parse_pomdp(TIGER)
    assert (model.n_states, model.n_actions, model.n_obs) == (2, 3, 2)
    assert meta.discount == 0.95
    assert np.allclose(model.initial, [0.5, 0.5])
    assert np.allclose(model.transition[:, 0, :], np.eye(2))
    assert np.allclose(model.transition[:, 1, :], 0.5)
    assert model.emission[0, 0, 0] == 0.85
    assert np.allclose(model.emission[1], 0.5)
    assert model.reward[0, 0, 1] == -1.0
    assert model.reward[0, 1, 0] == -100.0
    assert model.labels["actions"] == ["listen", "open-left", "open-right"]
    assert validate(model)


def test_entry_forms_and_wildcards():
    text = """
states: 2
actions: 2
observations: 2
start: 1.0 0.0
T: * : * : * 0.5
T: 1 : 0
0.25 0.75
O: * : * : 0 0.4
O: * : * : 1 0.6
R: 0 : 0 : 1 : * 3.5
R: 1 : *
1.0 2.0
1.0 2.0
"""
    model, meta = parse_pomdp(text)
    assert model.transition[0, 0, 1] == 0.5
    assert np.allclose(model.transition[0, 1], [0.25, 0.75])
    assert np.allclose(model.emission[:, :, 0], 0.4)
    assert model.reward[0, 0, 1] == 3.5
    # The observation-dependent block collapses to its expectation.
    assert model.reward[0, 1, 0] == pytest.approx(0.4 * 1.0 + 0.6 * 2.0)
    assert meta.reward_depends_on_obs
    assert any("expectation" in w for w in meta.warnings)


def test_values_cost_negates_rewards():
    text = """
values: cost
states: 1
actions: 1
observations: 1
T: 0 : 0 : 0 1.0
O: 0 : 0 : 0 1.0
R: 0 : 0 : 0 : 0 5.0
"""
    model, meta = parse_pomdp(text)
    assert meta.values == "cost"
    assert model.reward[0, 0, 0] == -5.0


def test_start_state_by_name():
    text = """
states: good bad
actions: 1
observations: 1
start: bad
T: 0 uniform
O: 0 uniform
"""
    model, _ = parse_pomdp(text)
    assert np.allclose(model.initial, [0.0, 1.0])


def test_error_lines_reported():
    bad = "discount: 2.5\nstates: 2\nactions: 1\nobservations: 1\n"
    with pytest.raises(FormatError) as e:
        parse_pomdp(bad)
    assert e.value.line == 1

    with pytest.raises(FormatError, match="unknown name"):
        parse_pomdp(
            "states: 2\nactions: 1\nobservations: 1\n"
            "T: 0 uniform\nO: 0 uniform\nT: bogus uniform\n"
        )

    with pytest.raises(FormatError, match="missing required"):
        parse_pomdp("states: 2\nactions: 1\nT: 0 uniform\n")

    with pytest.raises(FormatError, match="start must be"):
        parse_pomdp(
            "states: 2\nactions: 1\nobservations: 1\nstart: x y\n"
            "T: 0 uniform\nO: 0 uniform\n"
        )


def test_missing_tables_rejected():
    with pytest.raises(FormatError, match="transition"):
        parse_pomdp("states: 1\nactions: 1\nobservations: 1\nO: 0 : 0 : 0 1.0\n")
    with pytest.raises(FormatError, match="observation"):
        parse_pomdp("states: 1\nactions: 1\nobservations: 1\nT: 0 : 0 : 0 1.0\n")


@pytest.mark.parametrize("seed", range(8))
def test_round_trip_full_precision(seed):
    model = gen_random_pomdp(2 + seed % 3, 2 + seed % 2, seed)
    text = write_pomdp(model)
    back, meta = parse_pomdp(text)
    # The writer prints repr() floats, but row renormalization on reparse and
    # the observation-expectation collapse of rewards each cost about one ulp.
    assert np.allclose(back.initial, model.initial, atol=1e-12, rtol=0)
    assert np.allclose(back.transition, model.transition, atol=1e-12, rtol=0)
    assert np.allclose(back.emission, model.emission, atol=1e-12, rtol=0)
    assert np.allclose(back.emission_initial, model.emission_initial, atol=1e-12, rtol=0)
    assert np.allclose(back.reward, model.reward, atol=1e-12, rtol=0)


def test_round_trip_action_conditional_emissions():
    rng = np.random.default_rng(5)
    emission = rng.dirichlet(np.ones(2), size=(2, 3)).reshape(2, 3, 2)
    e0 = rng.dirichlet(np.ones(2), size=3)
    transition = rng.dirichlet(np.ones(3), size=(3, 2))
    model = Pomdp.from_tables(
        rng.dirichlet(np.ones(3)),
        transition,
        emission,
        rng.normal(size=(3, 2, 3)),
        emission_initial=e0,
    )
    back, _ = parse_pomdp(write_pomdp(model))
    assert not back.emission_is_state_conditional
    assert np.allclose(back.emission, model.emission, atol=1e-12, rtol=0)
    assert np.allclose(back.emission_initial, model.emission_initial, atol=1e-12, rtol=0)
    assert np.allclose(back.reward, model.reward)


def test_write_cost_convention():
    model = gen_random_pomdp(2, 2, 3)
    meta = PomdpFileMeta(values="cost")
    back, meta2 = parse_pomdp(write_pomdp(model, meta))
    assert meta2.values == "cost"
    assert np.allclose(back.reward, model.reward)


def test_bridge_fixture_parses():
    ref = importlib.resources.files("pomdp_milp") / "fixtures" / "bridge_repair_base.pomdp"
    model, meta = load_pomdp_file(str(ref))
    assert validate(model)
    assert model.n_states == 5
    assert np.allclose(model.initial, [1, 0, 0, 0, 0])
    # repair always returns the bridge to the healthy state
    assert np.allclose(model.transition[:, 1, 0], 1.0)


def test_wcjson_round_trip(tmp_path):
    wc = micro_wc(9, m=3, budget=2.0)
    path = tmp_path / "inst.json"
    dump_wcpomdp(wc, str(path))
    back = load_wcpomdp(str(path))
    assert back.n_components == 3
    for a, b in zip(wc.components, back.components):
        assert np.allclose(a.transition, b.transition, atol=1e-15)
        assert np.allclose(a.reward, b.reward, atol=1e-15)
    assert np.allclose(np.asarray(wc.budget), np.asarray(back.budget))
    for da, db in zip(wc.consumption, back.consumption):
        assert np.allclose(da, db, atol=1e-15)


def test_wcjson_negative_budget_round_trip(tmp_path):
    """The stored file keeps the user's original budget, shift and all."""
    comps = [gen_random_pomdp(2, 2, s) for s in (1, 2)]
    cons = [np.array([[0.0, 0.0], [1.0, -1.0]]) for _ in range(2)]
    from pomdp_milp import WcPomdp

    wc = WcPomdp.from_parts(comps, cons, [1.0, -1.0])
    path = tmp_path / "shifted.json"
    dump_wcpomdp(wc, str(path))
    import json

    raw = json.loads(path.read_text())
    assert raw["budget"] == [1.0, -1.0]
    back = load_wcpomdp(str(path))
    assert back.budget_shift == wc.budget_shift
    assert np.allclose(np.asarray(back.budget), np.asarray(wc.budget))


def test_wcjson_component_file_reference(tmp_path):
    model = gen_random_pomdp(3, 2, 4)
    (tmp_path / "comp.pomdp").write_text(write_pomdp(model))
    (tmp_path / "wc.json").write_text(
        '{"components": [{"file": "comp.pomdp"}],'
        ' "consumption": [[[0.0], [1.0]]], "budget": [1.0]}'
    )
    wc = load_wcpomdp(str(tmp_path / "wc.json"))
    assert np.allclose(wc.components[0].transition, model.transition)


def test_wcjson_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(FormatError, match="invalid JSON"):
        load_wcpomdp(str(p))
    p.write_text('{"components": []}')
    with pytest.raises(FormatError, match="missing field"):
        load_wcpomdp(str(p))
