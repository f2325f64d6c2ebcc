"""Passive learning of DFA and Mealy-machine signatures from informed samples.

The learner is the classic state-merging RPNI scheme: build a prefix-tree
acceptor from the sample, walk candidate states in canonical breadth-first
order, and merge each into the oldest compatible established state, folding
the tree onto the automaton to restore determinism.  A merge is rejected when
it would collapse an accepting state with a rejecting one (DFA) or force two
different outputs onto one transition (Mealy).  The result is observationally
consistent with the sample by construction; it is not necessarily minimal.

Sample preparation follows the signature-learning conventions: for a DFA the
positive set is prefix-closed and contains the empty word (the start state of
a benign-language signature must accept); for a Mealy machine all attacks are
pooled into one sample, positive words map to all-benign outputs and each
negative word is labelled with its attack's verdict at the final step (or at
every step, if configured).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from .automata import BENIGN_OUTPUT, Dfa, MealyMachine
from .traces import TraceSkeleton, trace_word

__all__ = [
    "InformedSample",
    "IOSample",
    "SampleConflictError",
    "prep_dfa_sample",
    "prep_mm_sample",
    "rpni",
    "rpni_mealy",
    "vulnerability_output",
]

Word = tuple[str, ...]

_UNK, _ACC, _REJ = 0, 1, 2


class SampleConflictError(ValueError):
    """The sample assigns contradictory classifications to one word."""


def _as_word(trace: Union[TraceSkeleton, Sequence[str]]) -> Word:
    if isinstance(trace, TraceSkeleton):
        return trace_word(trace)
    return tuple(trace)


@dataclass(frozen=True)
class InformedSample:
    """Disjoint positive/negative word sets over event symbols."""

    positives: frozenset[Word]
    negatives: frozenset[Word]

    def __post_init__(self):
        object.__setattr__(self, "positives", frozenset(self.positives))
        object.__setattr__(self, "negatives", frozenset(self.negatives))
        clash = self.positives & self.negatives
        if clash:
            word = sorted(clash)[0]
            raise SampleConflictError(
                f"word {' '.join(word) or 'ε'!s} is both positive and negative"
            )

    def symbols(self) -> list[str]:
        out = set()
        for w in self.positives | self.negatives:
            out.update(w)
        return sorted(out)


@dataclass(frozen=True)
class IOSample:
    """Input word -> output word pairs (equal lengths, no input repeated)."""

    pairs: dict[Word, Word]

    def __post_init__(self):
        for w, o in self.pairs.items():
            if len(w) != len(o):
                raise ValueError(f"output length {len(o)} != input length {len(w)}")

    def symbols(self) -> list[str]:
        out = set()
        for w in self.pairs:
            out.update(w)
        return sorted(out)

    def outputs(self) -> list[str]:
        out = {BENIGN_OUTPUT}
        for o in self.pairs.values():
            out.update(o)
        return sorted(out)


def vulnerability_output(attack: str) -> str:
    return f"vulnerability_{attack}"


def prep_dfa_sample(
    pos: Iterable[Union[TraceSkeleton, Sequence[str]]],
    neg: Iterable[Union[TraceSkeleton, Sequence[str]]],
) -> InformedSample:
    """Positive set = ε plus every prefix of every positive word; negatives
    are taken verbatim.  A word landing in both sets is a conflict."""
    positives: set[Word] = {()}
    for trace in pos:
        word = _as_word(trace)
        for i in range(1, len(word) + 1):
            positives.add(word[:i])
    negatives = {_as_word(trace) for trace in neg}
    clash = positives & negatives
    if clash:
        word = sorted(clash)[0]
        raise SampleConflictError(
            f"negative word is a prefix of a positive trace: {' '.join(word) or 'ε'}"
        )
    return InformedSample(frozenset(positives), frozenset(negatives))


def prep_mm_sample(
    per_attack: Mapping[str, tuple[Iterable, Iterable]],
    label_position: str = "final",
) -> IOSample:
    """Pool every attack's positive and negative traces into one IO sample.

    `label_position` places the vulnerability output on the final step of a
    negative word ("final", default, keeps shared prefixes mergeable with
    benign behavior) or on every step ("all").
    """
    if label_position not in ("final", "all"):
        raise ValueError(f"unknown label position {label_position!r}")
    pairs: dict[Word, Word] = {}
    source: dict[Word, str] = {}

    def add(word: Word, outputs: Word, origin: str) -> None:
        if word in pairs:
            if pairs[word] != outputs:
                raise SampleConflictError(
                    f"conflicting outputs for one input word between "
                    f"{source[word]} and {origin}"
                )
            return
        pairs[word] = outputs
        source[word] = origin

    for attack in sorted(per_attack):
        pos, neg = per_attack[attack]
        verdict = vulnerability_output(attack)
        for trace in pos:
            word = _as_word(trace)
            add(word, (BENIGN_OUTPUT,) * len(word), f"{attack} (positive)")
        for trace in neg:
            word = _as_word(trace)
            if not word:
                raise ValueError("negative Mealy trace must be non-empty")
            if label_position == "final":
                outputs = (BENIGN_OUTPUT,) * (len(word) - 1) + (verdict,)
            else:
                outputs = (verdict,) * len(word)
            add(word, outputs, f"{attack} (negative)")
    return IOSample(pairs)


# ---------------------------------------------------------------------------
# Prefix-tree acceptors.  Node 0 is the root; numbering is canonicalized to
# breadth-first order with symbol-sorted edges so learning is deterministic.
# ---------------------------------------------------------------------------

class _Pta:
    def __init__(self):
        self.children: list[dict[str, int]] = [{}]
        self.flags: list[int] = [_UNK]
        self.edge_out: list[dict[str, str]] = [{}]  # Mealy only

    def _node(self) -> int:
        self.children.append({})
        self.flags.append(_UNK)
        self.edge_out.append({})
        return len(self.children) - 1

    def add_word(self, word: Word, flag: int) -> None:
        state = 0
        for sym in word:
            nxt = self.children[state].get(sym)
            if nxt is None:
                nxt = self._node()
                self.children[state][sym] = nxt
            state = nxt
        if flag != _UNK:
            if self.flags[state] not in (_UNK, flag):
                raise SampleConflictError(
                    f"word classified both ways: {' '.join(word) or 'ε'}"
                )
            self.flags[state] = flag

    def add_io(self, word: Word, outputs: Word) -> None:
        state = 0
        for sym, out in zip(word, outputs):
            nxt = self.children[state].get(sym)
            if nxt is None:
                nxt = self._node()
                self.children[state][sym] = nxt
                self.edge_out[state][sym] = out
            elif self.edge_out[state][sym] != out:
                raise SampleConflictError(
                    f"conflicting outputs on shared prefix: {' '.join(word)}"
                )
            state = nxt

    def canonicalize(self) -> None:
        """Renumber breadth-first with symbol-sorted edges."""
        order = [0]
        new_id = {0: 0}
        for state in order:
            for sym in sorted(self.children[state]):
                child = self.children[state][sym]
                new_id[child] = len(order)
                order.append(child)
        children = [
            {sym: new_id[dst] for sym, dst in self.children[old].items()}
            for old in order
        ]
        self.flags = [self.flags[old] for old in order]
        self.edge_out = [self.edge_out[old] for old in order]
        self.children = children

    def __len__(self):
        return len(self.children)


class _Merger:
    """State-merging engine shared by the DFA and Mealy learners.

    Merge attempts mutate the structures in place and record an undo log, so
    a failed fold costs only the work done before the conflict rather than a
    copy of the whole machine.
    """

    def __init__(self, pta: _Pta, mealy: bool):
        self.mealy = mealy
        n = len(pta)
        self.parent = list(range(n))
        self.flags = list(pta.flags)
        self.children = pta.children  # takes ownership; mutated during merges
        self.edge_out = pta.edge_out

    def find(self, x: int) -> int:
        """Compressing find; only safe outside a trial merge."""
        p = self.parent
        root = x
        while p[root] != root:
            root = p[root]
        while p[x] != root:
            p[x], x = root, p[x]
        return root

    def _find_plain(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            x = p[x]
        return x

    def _try_merge(self, red: int, blue: int) -> bool:
        """Fold `blue`'s tree onto the automaton at `red`; undo on conflict."""
        parent = self.parent
        flags = self.flags
        children = self.children
        edge_out = self.edge_out
        mealy = self.mealy
        log: list[tuple] = []
        stack = [(red, blue)]
        ok = True
        while stack and ok:
            a, b = stack.pop()
            a = self._find_plain(a)
            b = self._find_plain(b)
            if a == b:
                continue
            fa, fb = flags[a], flags[b]
            if (fa == _ACC and fb == _REJ) or (fa == _REJ and fb == _ACC):
                ok = False
                break
            log.append(("p", b, parent[b]))
            parent[b] = a
            if fa == _UNK and fb != _UNK:
                log.append(("f", a, fa))
                flags[a] = fb
            ca = children[a]
            cb = children[b]
            if mealy:
                oa = edge_out[a]
                ob = edge_out[b]
            for sym, tgt in cb.items():
                cur = ca.get(sym)
                if cur is None:
                    ca[sym] = tgt
                    log.append(("c", a, sym))
                    if mealy:
                        oa[sym] = ob[sym]
                else:
                    if mealy and oa[sym] != ob[sym]:
                        ok = False
                        break
                    stack.append((cur, tgt))
        if ok:
            return True
        for kind, x, y in reversed(log):
            if kind == "p":
                parent[x] = y
            elif kind == "f":
                flags[x] = y
            else:
                del children[x][y]
                if mealy:
                    del edge_out[x][y]
        return False

    def run(self) -> None:
        """Canonical-order RPNI loop: merge each frontier state into the
        oldest compatible established state, else promote it."""
        red: list[int] = [0]

        def frontier() -> list[int]:
            red_set = set(red)
            out = set()
            for r in red:
                for tgt in self.children[r].values():
                    rep = self.find(tgt)
                    if rep not in red_set:
                        out.add(rep)
            return sorted(out)

        blue = frontier()
        while blue:
            q = blue[0]
            for r in red:
                if self._try_merge(r, q):
                    break
            else:
                red.append(q)
                red.sort()
            blue = frontier()


def _materialize_dfa(merger: _Merger, alphabet: Sequence[str]) -> Dfa:
    """Quotient automaton without its rejecting classes.

    A transition into a rejecting class becomes a missing transition, which
    monitoring already treats as the implicit reject sink, so the language is
    unchanged and negative endpoints never materialize as states.  States of
    unknown acceptance (interior prefixes of negatives; only positives are
    prefix-closed) default to accepting, since flagging them would alarm on
    behavior the sample never rejected.
    """
    root = merger.find(0)
    order = [root]
    new_id = {root: 0}
    transitions: dict[tuple[int, str], int] = {}
    for state in order:
        for sym in sorted(merger.children[state]):
            dst = merger.find(merger.children[state][sym])
            if merger.flags[dst] == _REJ:
                continue
            if dst not in new_id:
                new_id[dst] = len(order)
                order.append(dst)
            transitions[(new_id[state], sym)] = new_id[dst]
    # Root stays even when rejecting (empty word in the negatives).
    accepting = frozenset(new_id[s] for s in order if merger.flags[s] != _REJ)
    return Dfa(
        num_states=len(order),
        start=0,
        accepting=accepting,
        alphabet=tuple(alphabet),
        transitions=transitions,
    )


def _materialize_mm(merger: _Merger, inputs: Sequence[str], outputs: Sequence[str]) -> MealyMachine:
    root = merger.find(0)
    order = [root]
    new_id = {root: 0}
    transitions: dict[tuple[int, str], tuple[int, str]] = {}
    for state in order:
        for sym in sorted(merger.children[state]):
            dst = merger.find(merger.children[state][sym])
            if dst not in new_id:
                new_id[dst] = len(order)
                order.append(dst)
            transitions[(new_id[state], sym)] = (new_id[dst], merger.edge_out[state][sym])
    return MealyMachine(
        num_states=len(order),
        start=0,
        input_alphabet=tuple(inputs),
        output_alphabet=tuple(outputs),
        transitions=transitions,
    )


def rpni(sample: InformedSample, alphabet: Optional[Sequence[str]] = None) -> Dfa:
    """Learn a DFA consistent with the sample (accepts all positives, rejects
    all negatives under the reject-sink convention)."""
    pta = _Pta()
    for word in sorted(sample.positives):
        pta.add_word(word, _ACC)
    for word in sorted(sample.negatives):
        pta.add_word(word, _REJ)
    pta.canonicalize()
    merger = _Merger(pta, mealy=False)
    merger.run()
    dfa = _materialize_dfa(merger, alphabet or sample.symbols())
    for word in sample.positives:
        assert dfa.accepts(word), "learned DFA rejects a positive sample word"
    for word in sample.negatives:
        assert not dfa.accepts(word), "learned DFA accepts a negative sample word"
    return dfa


def rpni_mealy(sample: IOSample, inputs: Optional[Sequence[str]] = None) -> MealyMachine:
    """Learn a Mealy machine reproducing every sample output sequence."""
    pta = _Pta()
    for word in sorted(sample.pairs):
        pta.add_io(word, sample.pairs[word])
    pta.canonicalize()
    merger = _Merger(pta, mealy=True)
    merger.run()
    mm = _materialize_mm(merger, inputs or sample.symbols(), sample.outputs())
    for word, outputs in sample.pairs.items():
        assert tuple(mm.output_word(word)) == outputs, (
            "learned Mealy machine deviates from a training output"
        )
    return mm
