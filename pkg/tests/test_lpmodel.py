"""Model builder, reference LP/branch-and-bound, and backend registry."""

import math

import numpy as np
import pytest
from scipy import optimize

from pomdp_milp.lpmodel import (
    BACKEND_ENV_VAR,
    BINARY,
    CONTINUOUS,
    FEASIBLE_GAP,
    INFEASIBLE,
    OPTIMAL,
    TIME_LIMIT,
    UNBOUNDED,
    ModelBuilder,
    SolveParams,
    available_backends,
    branch_and_bound,
    export_lp,
    get_backend,
    register_backend,
    solve,
    solve_lp,
)


def knapsack_model(weights, values, capacity, sense="max"):
    b = ModelBuilder()
    for i in range(len(weights)):
        b.add_variable(f"x[{i}]", BINARY)
    b.add_constraint("cap", {f"x[{i}]": w for i, w in enumerate(weights)}, "<=", capacity)
    b.set_objective(sense, {f"x[{i}]": v for i, v in enumerate(values)})
    return b.finalize()


def random_milp(seed):
    """Small mixed model with x = 0 feasible, so it never turns infeasible."""
    rng = np.random.default_rng(seed)
    nb = rng.integers(3, 7)
    nc = rng.integers(0, 4)
    b = ModelBuilder()
    names = []
    for i in range(nb):
        names.append(b.add_variable(f"z[{i}]", BINARY))
    for i in range(nc):
        names.append(b.add_variable(f"y[{i}]", CONTINUOUS, 0.0, rng.uniform(0.5, 3.0)))
    for r in range(rng.integers(2, 5)):
        coeffs = {n: rng.uniform(-1.0, 2.0) for n in names if rng.random() < 0.8}
        if not coeffs:
            coeffs = {names[0]: 1.0}
        b.add_constraint(f"c[{r}]", coeffs, "<=", rng.uniform(0.5, float(nb)))
    b.set_objective("max", {n: rng.uniform(-2.0, 5.0) for n in names})
    return b.finalize()


# -- builder and arrays -------------------------------------------------------


def test_builder_rejects_duplicates_and_unknowns():
    b = ModelBuilder()
    b.add_variable("x", CONTINUOUS, 0.0, 1.0)
    with pytest.raises(ValueError, match="duplicate variable"):
        b.add_variable("x")
    with pytest.raises(ValueError, match="unknown variable"):
        b.add_constraint("c", {"nope": 1.0}, "<=", 1.0)
    b.add_constraint("c", {"x": 1.0}, "<=", 1.0)
    with pytest.raises(ValueError, match="duplicate constraint"):
        b.add_constraint("c", {"x": 2.0}, "<=", 2.0)
    with pytest.raises(ValueError, match="sense"):
        b.add_constraint("d", {"x": 1.0}, "<", 1.0)
    with pytest.raises(ValueError, match="kind"):
        b.add_variable("w", "integer")
    with pytest.raises(ValueError, match="lower bound"):
        b.add_variable("v", CONTINUOUS, 2.0, 1.0)


def test_builder_finalize_freezes():
    b = ModelBuilder()
    b.add_variable("x")
    model = b.finalize()
    assert model.n_variables == 1
    with pytest.raises(ValueError, match="finalized"):
        b.add_variable("y")
    with pytest.raises(ValueError, match="finalized"):
        b.finalize()


def test_binary_bounds_are_forced_to_unit_interval():
    b = ModelBuilder()
    b.add_variable("d", BINARY, lb=-5.0, ub=7.0)
    model = b.finalize()
    assert model.variables[0].lb == 0.0
    assert model.variables[0].ub == 1.0
    assert model.binary_indices() == [0]


def test_objective_and_constraint_arrays_merge_terms():
    b = ModelBuilder()
    b.add_variable("x")
    b.add_variable("y")
    b.add_constraint("c", [("x", 1.0), ("x", 2.0), ("y", -1.0)], ">=", 0.5)
    b.set_objective("max", [("y", 1.0), ("y", 0.5)])
    model = b.finalize()
    c = model.objective_vector()
    assert c[model.variable_index("y")] == 1.5
    A, senses, rhs = model.constraint_arrays()
    assert senses == [">="] and rhs[0] == 0.5
    assert A[0, model.variable_index("x")] == 3.0
    assert A[0, model.variable_index("y")] == -1.0


def test_zero_coefficients_are_dropped():
    b = ModelBuilder()
    b.add_variable("x")
    b.add_constraint("c", {"x": 0.0}, "<=", 1.0)
    model = b.finalize()
    assert model.constraints[0].coeffs == ()


# -- reference LP -------------------------------------------------------------


def test_solve_lp_simple_maximum():
    b = ModelBuilder()
    b.add_variable("x", CONTINUOUS, 0.0, 1.0)
    b.add_variable("y", CONTINUOUS, 0.0, 1.0)
    b.add_constraint("budget", {"x": 1.0, "y": 1.0}, "<=", 1.5)
    b.set_objective("max", {"x": 2.0, "y": 1.0}, constant=3.0)
    out = solve_lp(b.finalize())
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(2.0 + 0.5 + 3.0, abs=1e-9)
    assert out.value("x") == pytest.approx(1.0, abs=1e-9)


def test_solve_lp_minimization_sense():
    b = ModelBuilder()
    b.add_variable("x", CONTINUOUS, 0.0, 10.0)
    b.add_constraint("floor", {"x": 1.0}, ">=", 2.5)
    b.set_objective("min", {"x": 4.0})
    out = solve_lp(b.finalize())
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(10.0, abs=1e-9)


def test_solve_lp_infeasible_and_unbounded():
    b = ModelBuilder()
    b.add_variable("x", CONTINUOUS, 0.0, 1.0)
    b.add_constraint("lo", {"x": 1.0}, ">=", 2.0)
    b.set_objective("max", {"x": 1.0})
    assert solve_lp(b.finalize()).status == INFEASIBLE

    b = ModelBuilder()
    b.add_variable("x", CONTINUOUS, 0.0, math.inf)
    b.set_objective("max", {"x": 1.0})
    assert solve_lp(b.finalize()).status == UNBOUNDED


def _dual_by_perturbation(make_model, name, rhs, h=1e-6):
    """Numeric d(objective)/d(rhs) for the named constraint."""
    lo = solve_lp(make_model(rhs - h)).objective
    hi = solve_lp(make_model(rhs + h)).objective
    return (hi - lo) / (2 * h)


@pytest.mark.parametrize("sense,rhs", [("<=", 1.2), (">=", 0.3), ("=", 0.7)])
def test_duals_match_rhs_sensitivity_max(sense, rhs):
    def make(r):
        b = ModelBuilder()
        b.add_variable("x", CONTINUOUS, 0.0, 2.0)
        b.add_variable("y", CONTINUOUS, 0.0, 2.0)
        b.add_constraint("tied", {"x": 1.0}, sense, r)
        b.add_constraint("link", {"x": 1.0, "y": 1.0}, "<=", 2.0)
        b.set_objective("max", {"x": 3.0, "y": 1.0})
        return b.finalize()

    out, duals = solve_lp(make(rhs), want_duals=True)
    assert out.status == OPTIMAL
    assert duals["tied"] == pytest.approx(_dual_by_perturbation(make, "tied", rhs), abs=1e-5)


def test_duals_match_rhs_sensitivity_min():
    def make(r):
        b = ModelBuilder()
        b.add_variable("x", CONTINUOUS, 0.0, 5.0)
        b.add_constraint("floor", {"x": 1.0}, ">=", r)
        b.set_objective("min", {"x": 2.0})
        return b.finalize()

    out, duals = solve_lp(make(1.5), want_duals=True)
    assert out.status == OPTIMAL
    # objective = 2 r, so the sensitivity is exactly 2
    assert duals["floor"] == pytest.approx(2.0, abs=1e-8)


def test_want_duals_on_infeasible_returns_empty():
    b = ModelBuilder()
    b.add_variable("x", CONTINUOUS, 0.0, 1.0)
    b.add_constraint("lo", {"x": 1.0}, ">=", 2.0)
    b.set_objective("max", {"x": 1.0})
    out, duals = solve_lp(b.finalize(), want_duals=True)
    assert out.status == INFEASIBLE
    assert duals == {}


# -- branch and bound ----------------------------------------------------------


def test_bnb_knapsack_exact():
    model = knapsack_model([3, 4, 5], [3, 5, 7], 7)
    out = branch_and_bound(model, SolveParams(relative_mip_gap=0.0))
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(8.0, abs=1e-9)
    assert out.value("x[0]") == pytest.approx(1.0, abs=1e-6)
    assert out.value("x[1]") == pytest.approx(1.0, abs=1e-6)
    assert out.value("x[2]") == pytest.approx(0.0, abs=1e-6)


def test_bnb_minimization_model():
    # cover at least 2 units with costly binary items
    b = ModelBuilder()
    for i, w in enumerate([1, 1, 2]):
        b.add_variable(f"x[{i}]", BINARY)
    b.add_constraint("cover", {"x[0]": 1.0, "x[1]": 1.0, "x[2]": 2.0}, ">=", 2.0)
    b.set_objective("min", {"x[0]": 1.0, "x[1]": 1.0, "x[2]": 1.5})
    out = branch_and_bound(b.finalize(), SolveParams(relative_mip_gap=0.0))
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(1.5, abs=1e-9)


@pytest.mark.parametrize("seed", range(12))
def test_bnb_matches_highs_on_random_milps(seed):
    model = random_milp(seed)
    params = SolveParams(relative_mip_gap=0.0)
    ours = branch_and_bound(model, params)
    highs = get_backend("highs").solve(model, params)
    assert ours.status == OPTIMAL
    assert ours.objective == pytest.approx(highs.objective, abs=1e-6)


def test_bnb_infeasible_integer_model():
    b = ModelBuilder()
    b.add_variable("x", BINARY)
    b.add_constraint("mid", {"x": 1.0}, "=", 0.5)
    b.set_objective("max", {"x": 1.0})
    out = branch_and_bound(b.finalize(), SolveParams(relative_mip_gap=0.0))
    assert out.status == INFEASIBLE


def test_bnb_time_limit_reports_status():
    model = random_milp(3)
    out = branch_and_bound(model, SolveParams(time_limit_seconds=1e-12))
    assert out.status == TIME_LIMIT


def test_bnb_warm_start_is_adopted():
    model = knapsack_model([3, 4, 5], [3, 5, 7], 7)
    warm = {"x[0]": 1.0, "x[1]": 0.0, "x[2]": 1.0}
    out = branch_and_bound(model, SolveParams(relative_mip_gap=0.9), warm)
    # a huge allowed gap means the warm incumbent is enough to stop at the root
    assert out.status in (OPTIMAL, FEASIBLE_GAP)
    assert out.objective >= 8.0 - 1e-9


def test_bnb_invalid_warm_start_is_ignored():
    model = knapsack_model([3, 4, 5], [3, 5, 7], 7)
    warm = {"x[0]": 1.0, "x[1]": 1.0, "x[2]": 1.0}  # violates the capacity
    out = branch_and_bound(model, SolveParams(relative_mip_gap=0.0), warm)
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(8.0, abs=1e-9)


def test_bnb_gap_termination_reports_feasible_gap():
    # root bound 8.5 (LP) vs integral 8: a 10% gap allows stopping early
    model = knapsack_model([3, 4, 5], [3, 5, 7], 7)
    out = branch_and_bound(model, SolveParams(relative_mip_gap=0.10), {"x[1]": 1.0, "x[2]": 0.0, "x[0]": 1.0})
    assert out.status in (OPTIMAL, FEASIBLE_GAP)
    assert out.objective >= 8.0 * 0.9 - 1e-9
    assert out.best_bound >= out.objective - 1e-9


# -- exports and parameters ----------------------------------------------------


def test_export_lp_text_shape():
    b = ModelBuilder()
    b.add_variable("x[0]", BINARY)
    b.add_variable("y", CONTINUOUS, 0.5, math.inf)
    b.add_variable("w", CONTINUOUS, -math.inf, math.inf)
    b.add_constraint("c[0,1]", {"x[0]": 1.0, "y": -2.5}, "<=", 3.0)
    b.set_objective("max", {"x[0]": 1.0, "y": 1.0}, constant=-2.0)
    text = export_lp(b.finalize())
    assert text.startswith("Maximize")
    for needle in ("Subject To", "Bounds", "Binary", "End", "w free", "0.5 <= y"):
        assert needle in text
    assert "[" not in text and "]" not in text


def test_solve_params_validation():
    with pytest.raises(ValueError):
        SolveParams(time_limit_seconds=0.0)
    with pytest.raises(ValueError):
        SolveParams(relative_mip_gap=-0.1)
    with pytest.raises(ValueError):
        SolveParams(absolute_tolerance=0.0)
    with pytest.raises(ValueError):
        SolveParams(threads=0)


# -- backend registry ----------------------------------------------------------


def test_backend_listing_and_default():
    names = available_backends()
    assert "reference" in names and "highs" in names
    assert get_backend().name == "reference"
    assert get_backend("highs").name == "highs"


def test_backend_env_variable(monkeypatch):
    monkeypatch.setenv(BACKEND_ENV_VAR, "highs")
    assert get_backend().name == "highs"
    monkeypatch.setenv(BACKEND_ENV_VAR, "bogus")
    with pytest.raises(Exception, match="unknown backend"):
        get_backend()


def test_register_backend_requires_solve():
    with pytest.raises(TypeError):
        register_backend("broken", object())


def test_solve_helper_accepts_names_and_objects():
    model = knapsack_model([2, 3], [2, 3], 4)
    by_name = solve(model, SolveParams(relative_mip_gap=0.0), "highs")
    by_obj = solve(model, SolveParams(relative_mip_gap=0.0), get_backend("reference"))
    assert by_name.objective == pytest.approx(by_obj.objective, abs=1e-8)
    assert by_name.objective == pytest.approx(3.0, abs=1e-8)


def test_highs_backend_statuses():
    b = ModelBuilder()
    b.add_variable("x", BINARY)
    b.add_constraint("mid", {"x": 1.0}, "=", 0.5)
    b.set_objective("max", {"x": 1.0})
    assert get_backend("highs").solve(b.finalize()).status == INFEASIBLE


def test_highs_reports_gap_status_when_loose():
    model = random_milp(5)
    out = get_backend("highs").solve(model, SolveParams(relative_mip_gap=0.0))
    assert out.status == OPTIMAL
    tight = branch_and_bound(model, SolveParams(relative_mip_gap=0.0))
    assert out.objective == pytest.approx(tight.objective, abs=1e-6)
