"""DFA and Mealy-machine signature representations and their step monitors.

Both machines are deterministic and may be partial.  A missing DFA transition
is treated as entering an implicit non-accepting sink: passive learning
produces partial machines, but monitoring has to be total, and the safe
reading of unobserved behavior for an accept-all-benign signature is
rejection.  A missing Mealy transition emits ``benign`` and stays in place,
counting the event in `missing_transitions` so the gap remains observable.

Text formats (one directive per line)::

    states: N            states: N
    start: i             start: i
    accepting: i j k     outputs: o1 o2 ...
    alphabet: s1 s2 ...  alphabet: s1 s2 ...
    trans: from sym to   trans: from input to output
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

__all__ = [
    "Dfa",
    "MealyMachine",
    "RunVerdict",
    "BENIGN_OUTPUT",
    "dfa_run",
    "mm_run",
    "dfa_to_text",
    "dfa_from_text",
    "mm_to_text",
    "mm_from_text",
]

BENIGN_OUTPUT = "benign"


@dataclass
class RunVerdict:
    """Outcome of one monitored run.

    `outcomes` has one entry per consumed input: None for accept-continue,
    otherwise the violation name (Mealy output label, or "reject" for a DFA).
    In stop-first mode the run ends at the first violation, so `outcomes` may
    be shorter than the word.
    """

    outcomes: list[Optional[str]] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)  # Mealy only
    missing_transitions: int = 0

    @property
    def first_violation_index(self) -> Optional[int]:
        for i, o in enumerate(self.outcomes):
            if o is not None:
                return i
        return None

    @property
    def violations(self) -> list[tuple[int, str]]:
        return [(i, o) for i, o in enumerate(self.outcomes) if o is not None]

    @property
    def ok(self) -> bool:
        return self.first_violation_index is None


@dataclass(frozen=True)
class Dfa:
    num_states: int
    start: int
    accepting: frozenset[int]
    alphabet: tuple[str, ...]
    transitions: dict[tuple[int, str], int]

    def __post_init__(self):
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if not 0 <= self.start < self.num_states:
            raise ValueError("start state out of range")
        for s in self.accepting:
            if not 0 <= s < self.num_states:
                raise ValueError(f"accepting state {s} out of range")
        symbols = set(self.alphabet)
        if len(symbols) != len(self.alphabet):
            raise ValueError("duplicate alphabet symbols")
        for (src, sym), dst in self.transitions.items():
            if not 0 <= src < self.num_states or not 0 <= dst < self.num_states:
                raise ValueError(f"transition {src}-{sym}->{dst} out of range")
            if sym not in symbols:
                raise ValueError(f"transition symbol {sym!r} not in alphabet")

    @property
    def num_transitions(self) -> int:
        return len(self.transitions)

    def accepts(self, word: Sequence[str]) -> bool:
        """Word acceptance under the reject-sink convention."""
        state = self.start
        for sym in word:
            nxt = self.transitions.get((state, sym))
            if nxt is None:
                return False
            state = nxt
        return state in self.accepting


@dataclass(frozen=True)
class MealyMachine:
    num_states: int
    start: int
    input_alphabet: tuple[str, ...]
    output_alphabet: tuple[str, ...]
    transitions: dict[tuple[int, str], tuple[int, str]]

    def __post_init__(self):
        object.__setattr__(self, "input_alphabet", tuple(self.input_alphabet))
        object.__setattr__(self, "output_alphabet", tuple(self.output_alphabet))
        if BENIGN_OUTPUT not in self.output_alphabet:
            raise ValueError(f"output alphabet must contain {BENIGN_OUTPUT!r}")
        if not 0 <= self.start < self.num_states:
            raise ValueError("start state out of range")
        inputs = set(self.input_alphabet)
        outputs = set(self.output_alphabet)
        if len(inputs) != len(self.input_alphabet):
            raise ValueError("duplicate input symbols")
        if len(outputs) != len(self.output_alphabet):
            raise ValueError("duplicate output symbols")
        for (src, sym), (dst, out) in self.transitions.items():
            if not 0 <= src < self.num_states or not 0 <= dst < self.num_states:
                raise ValueError(f"transition {src}-{sym}->{dst} out of range")
            if sym not in inputs:
                raise ValueError(f"input symbol {sym!r} not in alphabet")
            if out not in outputs:
                raise ValueError(f"output symbol {out!r} not in alphabet")

    @property
    def num_transitions(self) -> int:
        return len(self.transitions)

    def output_word(self, word: Sequence[str]) -> list[str]:
        """Outputs for `word` under the benign-self-loop convention."""
        return mm_run(self, word, mode="report-all").outputs


def dfa_run(dfa: Dfa, word: Sequence[str], mode: str = "stop-first") -> RunVerdict:
    """Step the DFA over `word`; entering a non-accepting state (or falling
    off a missing transition) is a violation at that step."""
    if mode not in ("stop-first", "report-all"):
        raise ValueError(f"unknown run mode {mode!r}")
    symbols = set(dfa.alphabet)
    verdict = RunVerdict()
    state: Optional[int] = dfa.start
    for sym in word:
        if sym not in symbols:
            raise KeyError(f"symbol {sym!r} not in DFA alphabet")
        if state is not None:
            nxt = dfa.transitions.get((state, sym))
        else:
            nxt = None  # in the implicit sink
        if nxt is None:
            if state is not None and (state, sym) not in dfa.transitions:
                verdict.missing_transitions += 1
            verdict.outcomes.append("reject")
            state = None
        elif nxt not in dfa.accepting:
            verdict.outcomes.append("reject")
            state = nxt
        else:
            verdict.outcomes.append(None)
            state = nxt
        if mode == "stop-first" and verdict.outcomes[-1] is not None:
            break
    return verdict


def mm_run(mm: MealyMachine, word: Sequence[str], mode: str = "stop-first") -> RunVerdict:
    """Step the Mealy machine over `word`; any output other than ``benign``
    is a named violation at that step."""
    if mode not in ("stop-first", "report-all"):
        raise ValueError(f"unknown run mode {mode!r}")
    inputs = set(mm.input_alphabet)
    verdict = RunVerdict()
    state = mm.start
    for sym in word:
        if sym not in inputs:
            raise KeyError(f"input {sym!r} not in Mealy input alphabet")
        hop = mm.transitions.get((state, sym))
        if hop is None:
            verdict.missing_transitions += 1
            out = BENIGN_OUTPUT  # stay in place
        else:
            state, out = hop
        verdict.outputs.append(out)
        verdict.outcomes.append(None if out == BENIGN_OUTPUT else out)
        if mode == "stop-first" and verdict.outcomes[-1] is not None:
            break
    return verdict


# ---------------------------------------------------------------------------
# Serialization.
# ---------------------------------------------------------------------------

def dfa_to_text(dfa: Dfa) -> str:
    lines = [
        f"states: {dfa.num_states}",
        f"start: {dfa.start}",
        "accepting: " + " ".join(str(s) for s in sorted(dfa.accepting)),
        "alphabet: " + " ".join(dfa.alphabet),
    ]
    for (src, sym), dst in sorted(dfa.transitions.items()):
        lines.append(f"trans: {src} {sym} {dst}")
    return "\n".join(lines) + "\n"


def mm_to_text(mm: MealyMachine) -> str:
    lines = [
        f"states: {mm.num_states}",
        f"start: {mm.start}",
        "outputs: " + " ".join(mm.output_alphabet),
        "alphabet: " + " ".join(mm.input_alphabet),
    ]
    for (src, sym), (dst, out) in sorted(mm.transitions.items()):
        lines.append(f"trans: {src} {sym} {dst} {out}")
    return "\n".join(lines) + "\n"


def _parse_machine_lines(text: str, kind: str):
    fields: dict[str, list[str]] = {}
    trans: list[tuple[list[str], int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(":")
        key = key.strip()
        values = rest.split()
        if key == "trans":
            trans.append((values, lineno))
        elif key in ("states", "start", "accepting", "alphabet", "outputs"):
            if key in fields:
                raise ValueError(f"line {lineno}: duplicate {key!r} directive")
            fields[key] = values
        else:
            raise ValueError(f"line {lineno}: unknown directive {key!r}")
    for required in ("states", "start", "alphabet"):
        if required not in fields:
            raise ValueError(f"{kind} text missing {required!r} directive")
    return fields, trans


def dfa_from_text(text: str) -> Dfa:
    fields, trans = _parse_machine_lines(text, "DFA")
    if "accepting" not in fields:
        raise ValueError("DFA text missing 'accepting' directive")
    transitions = {}
    for values, lineno in trans:
        if len(values) != 3:
            raise ValueError(f"line {lineno}: trans expects 'from symbol to'")
        src, sym, dst = values
        key = (int(src), sym)
        if key in transitions:
            raise ValueError(f"line {lineno}: nondeterministic transition on {key}")
        transitions[key] = int(dst)
    return Dfa(
        num_states=int(fields["states"][0]),
        start=int(fields["start"][0]),
        accepting=frozenset(int(s) for s in fields["accepting"]),
        alphabet=tuple(fields["alphabet"]),
        transitions=transitions,
    )


def mm_from_text(text: str) -> MealyMachine:
    fields, trans = _parse_machine_lines(text, "Mealy")
    if "outputs" not in fields:
        raise ValueError("Mealy text missing 'outputs' directive")
    transitions = {}
    for values, lineno in trans:
        if len(values) != 4:
            raise ValueError(f"line {lineno}: trans expects 'from input to output'")
        src, sym, dst, out = values
        key = (int(src), sym)
        if key in transitions:
            raise ValueError(f"line {lineno}: nondeterministic transition on {key}")
        transitions[key] = (int(dst), out)
    return MealyMachine(
        num_states=int(fields["states"][0]),
        start=int(fields["start"][0]),
        input_alphabet=tuple(fields["alphabet"]),
        output_alphabet=tuple(fields["outputs"]),
        transitions=transitions,
    )


def save_machine(path: Union[str, Path], machine: Union[Dfa, MealyMachine]) -> None:
    text = dfa_to_text(machine) if isinstance(machine, Dfa) else mm_to_text(machine)
    Path(path).write_text(text, encoding="utf-8")


def load_dfa(path: Union[str, Path]) -> Dfa:
    return dfa_from_text(Path(path).read_text(encoding="utf-8"))


def load_mm(path: Union[str, Path]) -> MealyMachine:
    return mm_from_text(Path(path).read_text(encoding="utf-8"))
