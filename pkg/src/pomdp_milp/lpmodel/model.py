"""Solver-agnostic mixed-integer linear models.

A LinearModel is a finalized, immutable description: variables with bounds
and kind, sparse constraints, one objective.  Backends consume it through
``to_arrays`` (dense vectors plus a sparse constraint matrix) or walk the
fields directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

CONTINUOUS = "continuous"
BINARY = "binary"

_SENSES = ("<=", "=", ">=")


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lb: float
    ub: float


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple[tuple[int, float], ...]  # (variable index, coefficient)
    sense: str
    rhs: float


@dataclass(frozen=True)
class LinearModel:
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective_sense: str  # "max" | "min"
    objective_coeffs: tuple[tuple[int, float], ...]
    objective_constant: float
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {v.name: i for i, v in enumerate(self.variables)}
        )

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def variable_index(self, name: str) -> int:
        return self._index[name]

    def binary_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.kind == BINARY]

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_variables)
        for i, coef in self.objective_coeffs:
            c[i] += coef
        return c

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        return lb, ub

    def constraint_arrays(self):
        """(A, senses, rhs) with A sparse CSR over all constraints in order."""
        rows, cols, vals = [], [], []
        senses, rhs = [], []
        for r, con in enumerate(self.constraints):
            for i, coef in con.coeffs:
                rows.append(r)
                cols.append(i)
                vals.append(coef)
            senses.append(con.sense)
            rhs.append(con.rhs)
        A = sparse.csr_matrix(
            (vals, (rows, cols)), shape=(len(self.constraints), self.n_variables)
        )
        return A, senses, np.asarray(rhs, dtype=float)


class ModelBuilder:
    """Mutable accumulator; ``finalize`` freezes it into a LinearModel."""

    def __init__(self):
        self._variables: list[Variable] = []
        self._names: dict[str, int] = {}
        self._constraints: list[Constraint] = []
        self._con_names: set[str] = set()
        self._objective: tuple[str, tuple, float] | None = None
        self._finalized = False

    def _check_open(self):
        if self._finalized:
            raise ValueError("builder already finalized")

    def add_variable(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = math.inf) -> str:
        self._check_open()
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if name in self._names:
            raise ValueError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        if lb > ub:
            raise ValueError(f"variable {name!r}: lower bound {lb} exceeds upper bound {ub}")
        self._names[name] = len(self._variables)
        self._variables.append(Variable(name, kind, float(lb), float(ub)))
        return name

    def _resolve(self, coeffs) -> tuple[tuple[int, float], ...]:
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        merged: dict[int, float] = {}
        for name, coef in items:
            if name not in self._names:
                raise ValueError(f"unknown variable {name!r}")
            if coef != 0.0:
                idx = self._names[name]
                merged[idx] = merged.get(idx, 0.0) + float(coef)
        return tuple(sorted(merged.items()))

    def add_constraint(self, name: str, coeffs, sense: str, rhs: float) -> str:
        self._check_open()
        if sense not in _SENSES:
            raise ValueError(f"sense must be one of {_SENSES}, got {sense!r}")
        if name in self._con_names:
            raise ValueError(f"duplicate constraint name {name!r}")
        resolved = self._resolve(coeffs)
        self._con_names.add(name)
        self._constraints.append(Constraint(name, resolved, sense, float(rhs)))
        return name

    def set_objective(self, sense: str, coeffs, constant: float = 0.0):
        self._check_open()
        if sense not in ("max", "min"):
            raise ValueError("objective sense must be 'max' or 'min'")
        self._objective = (sense, self._resolve(coeffs), float(constant))

    def finalize(self) -> LinearModel:
        self._check_open()
        self._finalized = True
        sense, coeffs, constant = self._objective or ("max", (), 0.0)
        return LinearModel(
            variables=tuple(self._variables),
            constraints=tuple(self._constraints),
            objective_sense=sense,
            objective_coeffs=coeffs,
            objective_constant=constant,
        )


@dataclass(frozen=True)
class SolveParams:
    time_limit_seconds: float = 3600.0
    relative_mip_gap: float = 0.01
    absolute_tolerance: float = 1e-6
    threads: int = 1

    def __post_init__(self):
        if self.time_limit_seconds <= 0:
            raise ValueError("time limit must be positive")
        if self.relative_mip_gap < 0 or self.absolute_tolerance <= 0:
            raise ValueError("gap must be nonnegative and tolerance positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


OPTIMAL = "optimal"
FEASIBLE_GAP = "feasible_gap"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIME_LIMIT = "time_limit"
ERROR = "error"


@dataclass(frozen=True)
class SolveOutcome:
    status: str
    objective: float
    best_bound: float
    values: dict[str, float]
    wall_time: float
    message: str = ""

    def value(self, name: str) -> float:
        return self.values[name]


def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _lp_names(model: LinearModel) -> list[str]:
    """LP-file-safe variable names: brackets and commas are not portable."""
    seen: set[str] = set()
    out = []
    for v in model.variables:
        name = v.name.replace("[", "(").replace("]", ")").replace(",", "_").replace(" ", "")
        if name in seen:
            k = 2
            while f"{name}#{k}" in seen:
                k += 1
            name = f"{name}#{k}"
        seen.add(name)
        out.append(name)
    return out


def _fmt_terms(coeffs, names) -> str:
    if not coeffs:
        return "0"
    parts = []
    for k, (i, coef) in enumerate(coeffs):
        mag = _fmt_num(abs(coef))
        sign = "-" if coef < 0 else ("+" if k > 0 else "")
        term = f"{mag} {names[i]}"
        parts.append(f"{sign} {term}".strip() if sign else term)
    return " ".join(parts)


def export_lp(model: LinearModel) -> str:
    """Standard LP-file text (Maximize/Subject To/Bounds/Binary/End)."""
    names = _lp_names(model)
    lines = []
    lines.append("Maximize" if model.objective_sense == "max" else "Minimize")
    obj = _fmt_terms(model.objective_coeffs, names)
    if model.objective_constant:
        obj += f" + {_fmt_num(model.objective_constant)}" if model.objective_constant > 0 else f" - {_fmt_num(-model.objective_constant)}"
    lines.append(f" obj: {obj}")
    lines.append("Subject To")
    for con in model.constraints:
        sense = "=" if con.sense == "=" else con.sense
        cname = con.name.replace("[", "(").replace("]", ")").replace(",", "_").replace(" ", "")
        lines.append(f" {cname}: {_fmt_terms(con.coeffs, names)} {sense} {_fmt_num(con.rhs)}")
    lines.append("Bounds")
    for i, v in enumerate(model.variables):
        if v.kind == BINARY:
            continue
        if v.lb == -math.inf and v.ub == math.inf:
            lines.append(f" {names[i]} free")
        elif v.ub == math.inf:
            lines.append(f" {_fmt_num(v.lb)} <= {names[i]}")
        elif v.lb == -math.inf:
            lines.append(f" {names[i]} <= {_fmt_num(v.ub)}")
        else:
            lines.append(f" {_fmt_num(v.lb)} <= {names[i]} <= {_fmt_num(v.ub)}")
    binaries = [names[i] for i, v in enumerate(model.variables) if v.kind == BINARY]
    if binaries:
        lines.append("Binary")
        for name in binaries:
            lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"
