"""Reader and writer for the Cassandra-style ``.pomdp`` text format.

Supported grammar: preamble lines ``discount:``, ``values:``, ``states:``,
``actions:``, ``observations:``, optional ``start:``; body entries

    T: a : s : s' p          (prob may sit on the next line)
    T: a : s                 followed by / ending with a row over s'
    T: a                     followed by an S x S matrix, or ``uniform``/``identity``
    O: a : s' : o p          and the analogous row/matrix forms
    R: a : s : s' : o v      and row (over o) / matrix (s' x o) forms

``*`` wildcards expand to every index, ``#`` starts a comment, names and
0-based indices are interchangeable.  Later entries override earlier ones.

Observation entries condition on the previous action, so parsed models use
the action-conditional emission form.  The format has no native slot for the
distribution of the very first observation; this writer adds an optional
``start-emission:`` preamble block (one row per state) when that table cannot
be reconstructed, and the parser understands it.  Rewards that vary with the
observation are collapsed to their expectation r(s,a,s'); the loss is noted
in the returned metadata.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .core.model import Pomdp
from .errors import FormatError

#: Dense reward tables larger than this are refused.
TABLE_GUARD = 10**7


@dataclass
class PomdpFileMeta:
    discount: float = 1.0
    values: str = "reward"
    start: object = None  # None (uniform), vector, or state index
    source_path: str = ""
    warnings: list[str] = field(default_factory=list)
    reward_depends_on_obs: bool = False


class _Cursor:
    """Logical lines with comments stripped, tracked by line number."""

    def __init__(self, text: str):
        self.lines: list[tuple[int, str]] = []
        for i, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                self.lines.append((i, line))
        self.pos = 0

    def peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def next(self):
        item = self.peek()
        if item is None:
            raise FormatError("unexpected end of file")
        self.pos += 1
        return item


_PREAMBLE_KEYS = {"discount", "values", "states", "actions", "observations", "start", "start-emission"}
_BODY_KEYS = {"T", "O", "R"}

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _is_number(tok: str) -> bool:
    return bool(_NUMBER_RE.match(tok))


def _tokens(line: str) -> list[str]:
    return line.replace(":", " : ").split()


class _Space:
    """Named or counted index space (states, actions, observations)."""

    def __init__(self, n: int, names: list[str] | None):
        self.n = n
        self.names = names
        self.index = {name: i for i, name in enumerate(names)} if names else {}

    @staticmethod
    def parse(tokens: list[str], what: str, lineno: int) -> "_Space":
        if len(tokens) == 1 and tokens[0].isdigit():
            return _Space(int(tokens[0]), None)
        if not tokens:
            raise FormatError(f"{what}: empty declaration", line=lineno)
        return _Space(len(tokens), list(tokens))

    def resolve(self, tok: str, lineno: int) -> list[int]:
        if tok == "*":
            return list(range(self.n))
        if tok in self.index:
            return [self.index[tok]]
        if tok.lstrip("+-").isdigit():
            i = int(tok)
            if 0 <= i < self.n:
                return [i]
            raise FormatError(f"index {i} out of range (size {self.n})", line=lineno)
        raise FormatError(f"unknown name {tok!r}", line=lineno)


def _parse_floats(tokens: list[str], lineno: int, expect: int | None = None) -> list[float]:
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        bad = next(t for t in tokens if not _is_number(t))
        raise FormatError(f"expected a number, got {bad!r}", line=lineno) from None
    if expect is not None and len(vals) != expect:
        raise FormatError(f"expected {expect} numbers, got {len(vals)}", line=lineno)
    return vals


def _collect_row(
    cur: _Cursor, inline: list[str], n: int, lineno: int, keyword_ok: bool = False
) -> list[float]:
    """A row of n floats: whatever is inline, then more lines as needed.

    Probability rows also accept the ``uniform`` keyword in place of numbers.
    """
    if keyword_ok and not inline:
        item = cur.peek()
        if item is not None and item[1].split() == ["uniform"]:
            cur.next()
            return [1.0 / n] * n
    if keyword_ok and inline == ["uniform"]:
        return [1.0 / n] * n
    vals: list[float] = _parse_floats(inline, lineno) if inline else []
    while len(vals) < n:
        ln, line = cur.next()
        toks = line.split()
        if not all(_is_number(t) for t in toks):
            raise FormatError(f"expected a probability row of length {n}", line=ln)
        vals.extend(_parse_floats(toks, ln))
    if len(vals) != n:
        raise FormatError(f"expected {n} numbers in row, got {len(vals)}", line=lineno)
    return vals


def _collect_matrix(cur: _Cursor, rows: int, cols: int, keyword_ok: bool, lineno: int) -> np.ndarray:
    """rows x cols of floats, or the keywords ``uniform`` / ``identity``."""
    item = cur.peek()
    if item is None:
        raise FormatError("expected a matrix", line=lineno)
    ln, line = item
    first = line.split()[0]
    if keyword_ok and first in ("uniform", "identity"):
        cur.next()
        if first == "uniform":
            return np.full((rows, cols), 1.0 / cols)
        if rows != cols:
            raise FormatError(f"identity needs a square table, have {rows}x{cols}", line=ln)
        return np.eye(rows)
    out = np.empty((rows, cols))
    for r in range(rows):
        ln, line = cur.next()
        out[r] = _parse_floats(line.split(), ln, expect=cols)
    return out


def parse_pomdp(text: str, source_path: str = "") -> tuple[Pomdp, PomdpFileMeta]:
    """Parse ``.pomdp`` text into a model plus file-level metadata."""
    cur = _Cursor(text)
    meta = PomdpFileMeta(source_path=source_path)
    spaces: dict[str, _Space] = {}
    start_tokens: list[str] | None = None
    start_lineno = 0
    start_emission: np.ndarray | None = None

    # Preamble: everything up to the first T/O/R entry.
    while True:
        item = cur.peek()
        if item is None:
            raise FormatError("file has no T/O/R entries")
        lineno, line = item
        toks = _tokens(line)
        key = toks[0]
        if key in _BODY_KEYS and len(toks) > 1 and toks[1] == ":":
            break
        cur.next()
        if len(toks) < 2 or toks[1] != ":":
            raise FormatError(f"expected 'key:' preamble line, got {line!r}", line=lineno)
        args = [t for t in toks[2:] if t != ":"]
        if key == "discount":
            meta.discount = _parse_floats(args, lineno, expect=1)[0]
            if not 0.0 < meta.discount <= 1.0:
                raise FormatError(f"discount {meta.discount} outside (0, 1]", line=lineno)
        elif key == "values":
            if len(args) != 1 or args[0] not in ("reward", "cost"):
                raise FormatError("values must be 'reward' or 'cost'", line=lineno)
            meta.values = args[0]
        elif key in ("states", "actions", "observations"):
            spaces[key] = _Space.parse(args, key, lineno)
        elif key == "start":
            start_tokens = args
            start_lineno = lineno
        elif key == "start-emission":
            if "states" not in spaces or "observations" not in spaces:
                raise FormatError(
                    "start-emission must come after states: and observations:", line=lineno
                )
            start_emission = _collect_matrix(
                cur, spaces["states"].n, spaces["observations"].n, False, lineno
            )
        else:
            meta.warnings.append(f"line {lineno}: unknown preamble key {key!r} ignored")

    for required in ("states", "actions", "observations"):
        if required not in spaces:
            raise FormatError(f"missing required preamble line {required}:")
    S_sp, A_sp, O_sp = spaces["states"], spaces["actions"], spaces["observations"]
    S, A, O = S_sp.n, A_sp.n, O_sp.n
    if float(A) * S * S * O > TABLE_GUARD:
        raise FormatError(
            f"tables would need more than {TABLE_GUARD} entries ({S} states, {A} actions, {O} observations)"
        )

    if start_tokens is None or start_tokens == ["uniform"]:
        initial = np.full(S, 1.0 / S)
    elif start_tokens and start_tokens[0] in ("include", "exclude"):
        raise FormatError("start include/exclude lists are not supported", line=start_lineno)
    elif S == 1:
        initial = np.ones(1)
    elif all(_is_number(t) for t in start_tokens) and len(start_tokens) == S:
        initial = np.asarray(_parse_floats(start_tokens, start_lineno, expect=S))
    elif len(start_tokens) == 1:
        idx = S_sp.resolve(start_tokens[0], start_lineno)
        if len(idx) != 1:
            raise FormatError("start cannot be a wildcard", line=start_lineno)
        initial = np.zeros(S)
        initial[idx[0]] = 1.0
    else:
        raise FormatError(
            "start must be a distribution, a state, or 'uniform'", line=start_lineno
        )
    if start_tokens is not None:
        meta.start = initial.copy()

    transition = np.zeros((S, A, S))
    emission = np.zeros((A, S, O))
    reward = np.zeros((A, S, S, O))
    reward_set = np.zeros((A, S, S, O), dtype=bool)

    while (item := cur.peek()) is not None:
        lineno, line = item
        cur.next()
        toks = _tokens(line)
        key = toks[0]
        if key not in _BODY_KEYS or len(toks) < 2 or toks[1] != ":":
            raise FormatError(f"expected a T:/O:/R: entry, got {line!r}", line=lineno)
        # ':'-separated groups; the first token of each group is an index
        # field, anything after the first token of the LAST group is the
        # inline value part ("T: 0 : 1 : 2 0.5" -> fields 0,1,2 and tail 0.5).
        groups: list[list[str]] = [[]]
        for t in toks[2:]:
            if t == ":":
                groups.append([])
            else:
                groups[-1].append(t)
        names: list[str] = []
        for g in groups[:-1]:
            if len(g) != 1:
                raise FormatError(f"malformed entry {line!r}", line=lineno)
            names.append(g[0])
        last = groups[-1]
        if not last:
            raise FormatError(f"dangling ':' in {line!r}", line=lineno)
        names.append(last[0])
        tail = last[1:]

        if key == "T":
            _entry_T(cur, transition, S_sp, A_sp, names, tail, lineno)
        elif key == "O":
            _entry_O(cur, emission, S_sp, A_sp, O_sp, names, tail, lineno)
        else:
            _entry_R(cur, reward, reward_set, S_sp, A_sp, O_sp, names, tail, lineno)

    if not np.any(transition):
        raise FormatError("missing transition table")
    if not np.any(emission):
        raise FormatError("missing observation table")

    # Expectation-collapse rewards that vary with the observation.
    r_sas = np.einsum("aspo,apo->sap", reward, emission)
    varies = False
    if np.any(reward_set):
        spread = reward.max(axis=3) - reward.min(axis=3)
        varies = bool(np.any(spread > 1e-12))
    meta.reward_depends_on_obs = varies
    if varies:
        meta.warnings.append(
            "rewards vary with the observation; collapsed to expectation r(s,a,s')"
        )
    if meta.values == "cost":
        r_sas = -r_sas

    state_conditional = bool(np.all(np.abs(emission - emission[0:1]) < 1e-15))
    if start_emission is not None:
        emission_initial = start_emission
    elif state_conditional:
        emission_initial = emission[0].copy()
    else:
        emission_initial = emission.mean(axis=0)
        meta.warnings.append(
            "action-conditional observations without start-emission; "
            "using the action-average for the first observation"
        )

    labels = {}
    if S_sp.names:
        labels["states"] = S_sp.names
    if A_sp.names:
        labels["actions"] = A_sp.names
    if O_sp.names:
        labels["observations"] = O_sp.names

    try:
        if state_conditional and start_emission is None:
            model = Pomdp.from_tables(
                initial, transition, emission[0], r_sas, labels=labels or None
            )
        else:
            model = Pomdp.from_tables(
                initial,
                transition,
                emission,
                r_sas,
                emission_initial=emission_initial,
                labels=labels or None,
            )
    except ValueError as e:
        raise FormatError(str(e)) from None
    return model, meta


def _scalar(cur, tail, lineno) -> float:
    """The single value of a fully indexed entry, inline or on the next line."""
    if tail:
        return _parse_floats(tail, lineno, expect=1)[0]
    ln, line = cur.next()
    return _parse_floats(line.split(), ln, expect=1)[0]


def _keyword_matrix(word: str, rows: int, cols: int, lineno: int) -> np.ndarray:
    if word == "uniform":
        return np.full((rows, cols), 1.0 / cols)
    if rows != cols:
        raise FormatError(f"identity needs a square table, have {rows}x{cols}", line=lineno)
    return np.eye(rows)


def _matrix(cur, tail, rows, cols, keyword_ok, lineno) -> np.ndarray:
    if tail:
        if keyword_ok and tail in (["uniform"], ["identity"]):
            return _keyword_matrix(tail[0], rows, cols, lineno)
        raise FormatError("matrix form takes no inline numbers", line=lineno)
    return _collect_matrix(cur, rows, cols, keyword_ok, lineno)


def _entry_T(cur, transition, S_sp, A_sp, names, tail, lineno):
    if not 1 <= len(names) <= 3:
        raise FormatError("T: entries take 1 to 3 index fields", line=lineno)
    a_list = A_sp.resolve(names[0], lineno)
    if len(names) == 3:
        s_list = S_sp.resolve(names[1], lineno)
        sp_list = S_sp.resolve(names[2], lineno)
        p = _scalar(cur, tail, lineno)
        for a in a_list:
            for s in s_list:
                for sp in sp_list:
                    transition[s, a, sp] = p
    elif len(names) == 2:
        s_list = S_sp.resolve(names[1], lineno)
        row = _collect_row(cur, tail, S_sp.n, lineno, keyword_ok=True)
        for a in a_list:
            for s in s_list:
                transition[s, a, :] = row
    else:
        mat = _matrix(cur, tail, S_sp.n, S_sp.n, True, lineno)
        for a in a_list:
            transition[:, a, :] = mat


def _entry_O(cur, emission, S_sp, A_sp, O_sp, names, tail, lineno):
    if not 1 <= len(names) <= 3:
        raise FormatError("O: entries take 1 to 3 index fields", line=lineno)
    a_list = A_sp.resolve(names[0], lineno)
    if len(names) == 3:
        sp_list = S_sp.resolve(names[1], lineno)
        o_list = O_sp.resolve(names[2], lineno)
        p = _scalar(cur, tail, lineno)
        for a in a_list:
            for sp in sp_list:
                for o in o_list:
                    emission[a, sp, o] = p
    elif len(names) == 2:
        sp_list = S_sp.resolve(names[1], lineno)
        row = _collect_row(cur, tail, O_sp.n, lineno, keyword_ok=True)
        for a in a_list:
            for sp in sp_list:
                emission[a, sp, :] = row
    else:
        mat = _matrix(cur, tail, S_sp.n, O_sp.n, True, lineno)
        for a in a_list:
            emission[a] = mat


def _entry_R(cur, reward, reward_set, S_sp, A_sp, O_sp, names, tail, lineno):
    if not 2 <= len(names) <= 4:
        raise FormatError("R: entries take 2 to 4 index fields", line=lineno)
    a_list = A_sp.resolve(names[0], lineno)
    s_list = S_sp.resolve(names[1], lineno)
    if len(names) == 4:
        sp_list = S_sp.resolve(names[2], lineno)
        o_list = O_sp.resolve(names[3], lineno)
        v = _scalar(cur, tail, lineno)
        for a in a_list:
            for s in s_list:
                for sp in sp_list:
                    for o in o_list:
                        reward[a, s, sp, o] = v
                        reward_set[a, s, sp, o] = True
    elif len(names) == 3:
        sp_list = S_sp.resolve(names[2], lineno)
        row = _collect_row(cur, tail, O_sp.n, lineno)
        for a in a_list:
            for s in s_list:
                for sp in sp_list:
                    reward[a, s, sp, :] = row
                    reward_set[a, s, sp, :] = True
    else:
        mat = _matrix(cur, tail, S_sp.n, O_sp.n, False, lineno)
        for a in a_list:
            for s in s_list:
                reward[a, s, :, :] = mat
                reward_set[a, s, :, :] = True


def _fmt(x: float) -> str:
    return repr(float(x))


def write_pomdp(pomdp: Pomdp, meta: PomdpFileMeta | None = None) -> str:
    """Serialize a model; ``parse_pomdp(write_pomdp(m))`` reproduces its tables."""
    if meta is None:
        meta = PomdpFileMeta(discount=1.0, values="reward")
    out: list[str] = []
    out.append(f"discount: {_fmt(meta.discount)}")
    out.append(f"values: {meta.values}")
    labels = pomdp.labels or {}
    if "states" in labels:
        out.append("states: " + " ".join(labels["states"]))
    else:
        out.append(f"states: {pomdp.n_states}")
    if "actions" in labels:
        out.append("actions: " + " ".join(labels["actions"]))
    else:
        out.append(f"actions: {pomdp.n_actions}")
    if "observations" in labels:
        out.append("observations: " + " ".join(labels["observations"]))
    else:
        out.append(f"observations: {pomdp.n_obs}")
    out.append("start: " + " ".join(_fmt(p) for p in pomdp.initial))

    needs_start_emission = not pomdp.emission_is_state_conditional or not np.array_equal(
        pomdp.emission_initial, pomdp.emission[0]
    )
    if needs_start_emission:
        out.append("start-emission:")
        for s in range(pomdp.n_states):
            out.append(" ".join(_fmt(p) for p in pomdp.emission_initial[s]))

    sign = -1.0 if meta.values == "cost" else 1.0
    for a in range(pomdp.n_actions):
        out.append(f"T: {a}")
        for s in range(pomdp.n_states):
            out.append(" ".join(_fmt(p) for p in pomdp.transition[s, a]))
    if pomdp.emission_is_state_conditional:
        out.append("O: *")
        for s in range(pomdp.n_states):
            out.append(" ".join(_fmt(p) for p in pomdp.emission[0, s]))
    else:
        for a in range(pomdp.n_actions):
            out.append(f"O: {a}")
            for s in range(pomdp.n_states):
                out.append(" ".join(_fmt(p) for p in pomdp.emission[a, s]))
    for a in range(pomdp.n_actions):
        for s in range(pomdp.n_states):
            for sp in range(pomdp.n_states):
                v = pomdp.reward[s, a, sp]
                if v != 0.0:
                    out.append(f"R: {a} : {s} : {sp} : * {_fmt(sign * v)}")
    return "\n".join(out) + "\n"


def load_pomdp_file(path: str) -> tuple[Pomdp, PomdpFileMeta]:
    with open(path, encoding="utf-8") as fh:
        return parse_pomdp(fh.read(), source_path=path)
