"""Past-time LTL over finite traces: syntax, reference semantics, step monitor.

A formula is evaluated over a finite trace of states, where each state is a
total assignment to a fixed alphabet of propositions.  Two evaluation paths
are provided:

* :func:`eval_at` — the recursive reference semantics, written as a direct
  transcription of the satisfiability relation (existential/universal
  quantification over past positions).  Slow but obviously correct.
* :class:`PltlMonitor` — a constant-space dynamic-programming monitor that
  consumes one state at a time and keeps one previous/current bit per
  subformula.

The two are required to agree at every position of every trace; the test
suite checks this exhaustively for small formulas and randomly at scale.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

__all__ = [
    "Alphabet",
    "State",
    "Trace",
    "Formula",
    "ParseError",
    "true",
    "false",
    "prop",
    "not_",
    "and_",
    "or_",
    "implies",
    "yesterday",
    "once",
    "historically",
    "since",
    "parse_formula",
    "format_formula",
    "size",
    "eval_at",
    "holds_globally",
    "earliest_violation",
    "PltlMonitor",
    "monitor_init",
    "monitor_step",
]

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

LEAF_KINDS = ("true", "false", "prop")
UNARY_KINDS = ("not", "Y", "O", "H")
BINARY_KINDS = ("and", "or", "S")


class ParseError(ValueError):
    """Formula text rejected; `position` is a character offset into the input."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class Alphabet:
    """Ordered set of proposition identifiers; order defines bit indices."""

    __slots__ = ("_props", "_index")

    def __init__(self, propositions: Iterable[str]):
        props = tuple(propositions)
        index: dict[str, int] = {}
        for i, name in enumerate(props):
            if not _IDENT_RE.match(name):
                raise ValueError(f"invalid proposition identifier: {name!r}")
            if name in index:
                raise ValueError(f"duplicate proposition: {name!r}")
            index[name] = i
        self._props = props
        self._index = index

    @property
    def propositions(self) -> tuple[str, ...]:
        return self._props

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"proposition {name!r} not in alphabet") from None

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self._props)

    def __iter__(self) -> Iterator[str]:
        return iter(self._props)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Alphabet) and self._props == other._props

    def __hash__(self) -> int:
        return hash(self._props)

    def __repr__(self) -> str:
        return f"Alphabet({list(self._props)!r})"


class State:
    """Total assignment of one Boolean per proposition of an alphabet."""

    __slots__ = ("alphabet", "bits")

    def __init__(self, alphabet: Alphabet, bits: Sequence[int]):
        if len(bits) != len(alphabet):
            raise ValueError(
                f"state has {len(bits)} bits for an alphabet of {len(alphabet)}"
            )
        self.alphabet = alphabet
        self.bits = tuple(1 if b else 0 for b in bits)

    @classmethod
    def from_true_props(cls, alphabet: Alphabet, true_props: Iterable[str]) -> "State":
        bits = [0] * len(alphabet)
        for name in true_props:
            bits[alphabet.index(name)] = 1
        return cls(alphabet, bits)

    def value(self, name: str) -> bool:
        return bool(self.bits[self.alphabet.index(name)])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, State)
            and self.alphabet == other.alphabet
            and self.bits == other.bits
        )

    def __hash__(self) -> int:
        return hash(self.bits)

    def __repr__(self) -> str:
        on = [p for p in self.alphabet if self.value(p)]
        return f"State({on!r})"


class Trace:
    """Finite sequence of states over one shared alphabet.

    `label` is carried opaquely ("benign", an attack name, or None); the
    traces module owns label semantics.
    """

    __slots__ = ("states", "label")

    def __init__(self, states: Sequence[State], label: Optional[str] = None):
        states = tuple(states)
        if states:
            alphabet = states[0].alphabet
            for s in states:
                if s.alphabet != alphabet:
                    raise ValueError("trace states use different alphabets")
        self.states = states
        self.label = label

    @property
    def alphabet(self) -> Optional[Alphabet]:
        return self.states[0].alphabet if self.states else None

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[State]:
        return iter(self.states)

    def __getitem__(self, i: int) -> State:
        return self.states[i]


class Formula:
    """Immutable PLTL abstract syntax tree node.

    Kinds: ``true``, ``false``, ``prop`` (leaves); ``not``, ``Y`` (yesterday),
    ``O`` (once), ``H`` (historically) (unary); ``and``, ``or``, ``S`` (since)
    (binary).  Implication is parser sugar and never appears as a node.
    """

    __slots__ = ("kind", "name", "left", "right", "_hash")

    def __init__(
        self,
        kind: str,
        name: Optional[str] = None,
        left: Optional["Formula"] = None,
        right: Optional["Formula"] = None,
    ):
        if kind in LEAF_KINDS:
            if left is not None or right is not None:
                raise ValueError(f"{kind} takes no operands")
            if (kind == "prop") != (name is not None):
                raise ValueError("prop requires a name; constants take none")
            if name is not None and not _IDENT_RE.match(name):
                raise ValueError(f"invalid proposition identifier: {name!r}")
        elif kind in UNARY_KINDS:
            if left is None or right is not None or name is not None:
                raise ValueError(f"{kind} takes exactly one operand")
        elif kind in BINARY_KINDS:
            if left is None or right is None or name is not None:
                raise ValueError(f"{kind} takes exactly two operands")
        else:
            raise ValueError(f"unknown formula kind: {kind!r}")
        self.kind = kind
        self.name = name
        self.left = left
        self.right = right
        self._hash = hash(
            (kind, name, None if left is None else hash(left),
             None if right is None else hash(right))
        )

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Formula)
            and self.kind == other.kind
            and self.name == other.name
            and self.left == other.left
            and self.right == other.right
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Formula({format_formula(self)!r})"

    def subformulas(self) -> list["Formula"]:
        """Distinct subformulas in child-before-parent order (root last)."""
        order: list[Formula] = []
        seen: set[Formula] = set()

        def visit(node: Formula) -> None:
            if node in seen:
                return
            if node.left is not None:
                visit(node.left)
            if node.right is not None:
                visit(node.right)
            seen.add(node)
            order.append(node)

        visit(self)
        return order

    def propositions(self) -> set[str]:
        out = set()
        for sub in self.subformulas():
            if sub.kind == "prop":
                out.add(sub.name)
        return out


def true() -> Formula:
    return Formula("true")


def false() -> Formula:
    return Formula("false")


def prop(name: str) -> Formula:
    return Formula("prop", name=name)


def not_(f: Formula) -> Formula:
    return Formula("not", left=f)


def and_(f: Formula, g: Formula) -> Formula:
    return Formula("and", left=f, right=g)


def or_(f: Formula, g: Formula) -> Formula:
    return Formula("or", left=f, right=g)


def implies(f: Formula, g: Formula) -> Formula:
    """Desugars immediately: implication is not an AST node."""
    return or_(not_(f), g)


def yesterday(f: Formula) -> Formula:
    return Formula("Y", left=f)


def once(f: Formula) -> Formula:
    return Formula("O", left=f)


def historically(f: Formula) -> Formula:
    return Formula("H", left=f)


def since(f: Formula, g: Formula) -> Formula:
    return Formula("S", left=f, right=g)


def size(f: Formula) -> int:
    """Number of AST nodes, counting repeated occurrences separately."""
    n = 1
    if f.left is not None:
        n += size(f.left)
    if f.right is not None:
        n += size(f.right)
    return n


# ---------------------------------------------------------------------------
# Parsing / formatting.  Prefix grammar, whitespace-separated tokens:
#   formula := "true" | "false" | "(prop" IDENT ")" | "(not" f ")"
#            | "(and" f f ")" | "(or" f f ")" | "(imp" f f ")"
#            | "(Y" f ")" | "(O" f ")" | "(H" f ")" | "(S" f f ")"
# ---------------------------------------------------------------------------

_UNARY_OPS = {"not": not_, "Y": yesterday, "O": once, "H": historically}
_BINARY_OPS = {"and": and_, "or": or_, "imp": implies, "S": since}


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            tokens.append((c, i))
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append((text[i:j], i))
            i = j
    return tokens


def parse_formula(text: str, alphabet: Optional[Alphabet] = None) -> Formula:
    """Parse prefix-grammar formula text.

    With an alphabet, every proposition must belong to it; without one, only
    the grammar and arities are checked.
    """
    tokens = _tokenize(text)
    pos = 0

    def peek() -> tuple[str, int]:
        if pos >= len(tokens):
            raise ParseError("unexpected end of input", len(text))
        return tokens[pos]

    def take() -> tuple[str, int]:
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def expect(value: str) -> None:
        tok, off = take()
        if tok != value:
            raise ParseError(f"expected {value!r}, found {tok!r}", off)

    def parse() -> Formula:
        tok, off = take()
        if tok == "true":
            return true()
        if tok == "false":
            return false()
        if tok != "(":
            raise ParseError(f"expected formula, found {tok!r}", off)
        op, op_off = take()
        if op == "prop":
            name, name_off = take()
            if not _IDENT_RE.match(name):
                raise ParseError(f"invalid proposition {name!r}", name_off)
            if alphabet is not None and name not in alphabet:
                raise ParseError(f"unknown proposition {name!r}", name_off)
            expect(")")
            return prop(name)
        if op in _UNARY_OPS:
            operand = parse()
            tok, off2 = peek()
            if tok != ")":
                raise ParseError(
                    f"operator {op!r} takes one operand, found {tok!r}", off2
                )
            take()
            return _UNARY_OPS[op](operand)
        if op in _BINARY_OPS:
            left = parse()
            tok, off2 = peek()
            if tok == ")":
                raise ParseError(f"operator {op!r} takes two operands", off2)
            right = parse()
            expect(")")
            return _BINARY_OPS[op](left, right)
        raise ParseError(f"unknown operator {op!r}", op_off)

    result = parse()
    if pos != len(tokens):
        raise ParseError(f"trailing input {tokens[pos][0]!r}", tokens[pos][1])
    return result


def format_formula(f: Formula) -> str:
    """Inverse of :func:`parse_formula` (up to whitespace)."""
    if f.kind == "true":
        return "true"
    if f.kind == "false":
        return "false"
    if f.kind == "prop":
        return f"(prop {f.name})"
    if f.kind in ("not", "Y", "O", "H"):
        return f"({f.kind} {format_formula(f.left)})"
    op = {"and": "and", "or": "or", "S": "S"}[f.kind]
    return f"({op} {format_formula(f.left)} {format_formula(f.right)})"


# ---------------------------------------------------------------------------
# Reference semantics.
# ---------------------------------------------------------------------------

def eval_at(f: Formula, trace: Trace, i: int) -> bool:
    """Truth of `f` at position `i`, by the recursive finite-trace semantics.

    Once and Historically are evaluated directly by quantifying over [0, i];
    Since quantifies existentially over the witness position and universally
    over the gap.  A memo table keyed on (subformula, position) keeps this
    polynomial, but no recurrence shortcuts are taken: this function is the
    oracle the monitor is checked against.
    """
    if not 0 <= i < len(trace):
        raise IndexError(f"position {i} out of range for trace of length {len(trace)}")
    memo: dict[tuple[int, int], bool] = {}

    def ev(node: Formula, pos: int) -> bool:
        key = (id(node), pos)
        if key in memo:
            return memo[key]
        kind = node.kind
        if kind == "true":
            v = True
        elif kind == "false":
            v = False
        elif kind == "prop":
            v = trace[pos].value(node.name)
        elif kind == "not":
            v = not ev(node.left, pos)
        elif kind == "and":
            v = ev(node.left, pos) and ev(node.right, pos)
        elif kind == "or":
            v = ev(node.left, pos) or ev(node.right, pos)
        elif kind == "Y":
            v = pos > 0 and ev(node.left, pos - 1)
        elif kind == "O":
            v = any(ev(node.left, j) for j in range(pos + 1))
        elif kind == "H":
            v = all(ev(node.left, j) for j in range(pos + 1))
        elif kind == "S":
            v = any(
                ev(node.right, j)
                and all(ev(node.left, k) for k in range(j + 1, pos + 1))
                for j in range(pos + 1)
            )
        else:  # pragma: no cover
            raise AssertionError(kind)
        memo[key] = v
        return v

    return ev(f, i)


def holds_globally(f: Formula, trace: Trace) -> bool:
    """True iff `f` holds at every position; vacuously true on empty traces."""
    return all(eval_at(f, trace, i) for i in range(len(trace)))


def earliest_violation(f: Formula, trace: Trace) -> Optional[int]:
    """Smallest position where `f` is false, or None if it holds globally."""
    for i in range(len(trace)):
        if not eval_at(f, trace, i):
            return i
    return None


# ---------------------------------------------------------------------------
# Dynamic-programming monitor.
# ---------------------------------------------------------------------------

_OP_TRUE, _OP_FALSE, _OP_PROP, _OP_NOT, _OP_AND, _OP_OR, _OP_Y, _OP_O, _OP_H, _OP_S = range(10)

_OPCODE = {
    "true": _OP_TRUE,
    "false": _OP_FALSE,
    "prop": _OP_PROP,
    "not": _OP_NOT,
    "and": _OP_AND,
    "or": _OP_OR,
    "Y": _OP_Y,
    "O": _OP_O,
    "H": _OP_H,
    "S": _OP_S,
}


class PltlMonitor:
    """Step evaluator holding one previous and one current bit per subformula.

    The subformula list is deduplicated and ordered children-first, so each
    step is a single forward pass.  Memory use is fixed at construction; a
    step allocates nothing beyond rebinding the two bit vectors.

    State persists across session boundaries within a stream: the monitor is
    never reset mid-trace, so signatures that span sessions (e.g. via
    connection-initiation propositions) evaluate correctly.
    """

    __slots__ = ("formula", "subformulas", "prev_bits", "curr_bits",
                 "step_count", "_program", "_prop_names", "_alphabet")

    def __init__(self, formula: Formula, alphabet: Optional[Alphabet] = None):
        self.formula = formula
        self.subformulas = formula.subformulas()
        # Structurally equal subtrees share one slot (and one pair of bits).
        index = {sub: k for k, sub in enumerate(self.subformulas)}
        program = []
        prop_names = []
        for sub in self.subformulas:
            op = _OPCODE[sub.kind]
            if op == _OP_PROP:
                # second field patched to the bit index when the alphabet binds
                program.append([op, -1, 0])
                prop_names.append(sub.name)
            elif sub.kind in UNARY_KINDS:
                program.append([op, index[sub.left], 0])
            elif sub.kind in BINARY_KINDS:
                program.append([op, index[sub.left], index[sub.right]])
            else:
                program.append([op, 0, 0])
        self._program = program
        self._prop_names = prop_names
        self._alphabet = None
        if alphabet is not None:
            self._bind(alphabet)
        n = len(self.subformulas)
        self.prev_bits = [0] * n
        self.curr_bits = [0] * n
        self.step_count = 0

    def _bind(self, alphabet: Alphabet) -> None:
        names = iter(self._prop_names)
        for instr in self._program:
            if instr[0] == _OP_PROP:
                instr[1] = alphabet.index(next(names))
        self._alphabet = alphabet

    def step(self, state: State) -> bool:
        """Consume one state; returns True when no violation at this step."""
        if state.alphabet is not self._alphabet:
            if self._alphabet is None:
                self._bind(state.alphabet)
            elif state.alphabet != self._alphabet:
                raise ValueError("state alphabet differs from the monitored stream's")
        sbits = state.bits
        prev = self.prev_bits
        cur = self.curr_bits
        first = self.step_count == 0
        k = 0
        for op, a, b in self._program:
            if op == _OP_PROP:
                v = sbits[a]
            elif op == _OP_NOT:
                v = 1 - cur[a]
            elif op == _OP_AND:
                v = cur[a] & cur[b]
            elif op == _OP_OR:
                v = cur[a] | cur[b]
            elif op == _OP_S:
                v = cur[b] | (prev[k] & cur[a])
            elif op == _OP_Y:
                v = prev[a]
            elif op == _OP_O:
                v = cur[a] | prev[k]
            elif op == _OP_H:
                v = cur[a] & (1 if first else prev[k])
            elif op == _OP_TRUE:
                v = 1
            else:
                v = 0
            cur[k] = v
            k += 1
        self.prev_bits, self.curr_bits = cur, prev
        self.step_count += 1
        return bool(cur[-1])

    def copy(self) -> "PltlMonitor":
        """Snapshot of the monitor state (shares the compiled program)."""
        dup = object.__new__(PltlMonitor)
        dup.formula = self.formula
        dup.subformulas = self.subformulas
        dup._program = self._program
        dup._prop_names = self._prop_names
        dup._alphabet = self._alphabet
        dup.prev_bits = list(self.prev_bits)
        dup.curr_bits = list(self.curr_bits)
        dup.step_count = self.step_count
        return dup


def monitor_init(f: Formula, alphabet: Optional[Alphabet] = None) -> PltlMonitor:
    """Fresh monitor: bits cleared, step count zero, subformulas children-first."""
    return PltlMonitor(f, alphabet)


def monitor_step(m: PltlMonitor, s: State) -> bool:
    """Advance `m` by one state; True means no violation at this step."""
    return m.step(s)
