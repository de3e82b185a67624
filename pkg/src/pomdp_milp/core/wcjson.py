"""JSON serialization of weakly coupled instances.

Schema (top level): ``components`` is a list of inline POMDP objects or
``{"file": "relative/path.pomdp"}`` references, ``consumption`` holds one
(A_m x q) table per component, ``budget`` a length-q array, ``labels`` is
free-form.  Inline POMDP objects carry explicit dimension metadata
(``n_states``/``n_obs``/``n_actions``) and row-major nested lists:
``transition[s][a][s']``, ``emission[s][o]`` or ``emission[a][s][o]``,
``reward[s][a][s']``.
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..errors import FormatError
from .model import Pomdp, WcPomdp


def pomdp_from_dict(d: dict) -> Pomdp:
    try:
        n_states = int(d["n_states"])
        n_obs = int(d["n_obs"])
        n_actions = int(d["n_actions"])
        initial = np.asarray(d["initial"], dtype=float)
        transition = np.asarray(d["transition"], dtype=float)
        emission = np.asarray(d["emission"], dtype=float)
        reward = np.asarray(d["reward"], dtype=float)
    except KeyError as e:
        raise FormatError(f"POMDP object is missing field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise FormatError(f"POMDP object has a malformed table: {e}") from None

    expected = {
        "initial": (initial.shape, (n_states,)),
        "transition": (transition.shape, (n_states, n_actions, n_states)),
        "reward": (reward.shape, (n_states, n_actions, n_states)),
    }
    if emission.ndim == 2:
        expected["emission"] = (emission.shape, (n_states, n_obs))
    else:
        expected["emission"] = (emission.shape, (n_actions, n_states, n_obs))
    for name, (got, want) in expected.items():
        if got != want:
            raise FormatError(f"{name} has shape {got}, expected {want}")

    emission_initial = d.get("emission_initial")
    if emission_initial is not None:
        emission_initial = np.asarray(emission_initial, dtype=float)
        if emission_initial.shape != (n_states, n_obs):
            raise FormatError(
                f"emission_initial has shape {emission_initial.shape}, expected {(n_states, n_obs)}"
            )
    try:
        return Pomdp.from_tables(
            initial,
            transition,
            emission,
            reward,
            emission_initial=emission_initial,
            labels=d.get("labels"),
            failure_state=d.get("failure_state"),
        )
    except ValueError as e:
        raise FormatError(str(e)) from None


def pomdp_to_dict(p: Pomdp) -> dict:
    d = {
        "n_states": p.n_states,
        "n_obs": p.n_obs,
        "n_actions": p.n_actions,
        "initial": p.initial.tolist(),
        "transition": p.transition.tolist(),
        "reward": p.reward.tolist(),
    }
    if p.emission_is_state_conditional:
        d["emission"] = p.emission[0].tolist()
        if not np.array_equal(p.emission_initial, p.emission[0]):
            d["emission_initial"] = p.emission_initial.tolist()
    else:
        d["emission"] = p.emission.tolist()
        d["emission_initial"] = p.emission_initial.tolist()
    if p.labels is not None:
        d["labels"] = p.labels
    if p.failure_state is not None:
        d["failure_state"] = p.failure_state
    return d


def wc_from_dict(d: dict, base_dir: str | None = None) -> WcPomdp:
    try:
        raw_components = d["components"]
        consumption = d["consumption"]
        budget = d["budget"]
    except KeyError as e:
        raise FormatError(f"weakly coupled instance is missing field {e.args[0]!r}") from None
    components = []
    for i, c in enumerate(raw_components):
        if not isinstance(c, dict):
            raise FormatError(f"component {i} must be an object")
        if "file" in c:
            from ..pomdp_format import parse_pomdp

            path = c["file"]
            if base_dir is not None and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            try:
                with open(path, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as e:
                raise FormatError(f"component {i}: cannot read {path}: {e}") from None
            model, _ = parse_pomdp(text, source_path=path)
            components.append(model)
        else:
            components.append(pomdp_from_dict(c))
    try:
        return WcPomdp.from_parts(components, consumption, budget, labels=d.get("labels"))
    except ValueError as e:
        raise FormatError(str(e)) from None


def wc_to_dict(wc: WcPomdp) -> dict:
    # Undo the internal budget shift so the stored data matches the input.
    k = wc.budget_shift
    M = wc.n_components
    consumption = [
        (np.asarray(dm) + k / M).tolist() for dm in wc.consumption
    ]
    budget = (np.asarray(wc.budget) + k).tolist()
    d = {
        "components": [pomdp_to_dict(c) for c in wc.components],
        "consumption": consumption,
        "budget": budget,
    }
    if wc.labels is not None:
        d["labels"] = wc.labels
    return d


def load_wcpomdp(path: str) -> WcPomdp:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e}", line=e.lineno, column=e.colno) from None
    return wc_from_dict(d, base_dir=os.path.dirname(os.path.abspath(path)))


def dump_wcpomdp(wc: WcPomdp, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(wc_to_dict(wc), fh, indent=1)
        fh.write("\n")
