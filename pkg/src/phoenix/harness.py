"""Signature database, monitoring pipeline, metrics, throughput, memory report.

A signature database is an ordered list of entries, each naming one undesired
behavior and carrying its detector in one of the three representations: an
inline formula (``pltl``), or a path to a serialized machine (``dfa`` /
``mm``).  The pipeline feeds every event of a trace to every signature's
monitor in database order and classifies a trace as an attack exactly when at
least one signature fires.

Database file format (repeated blocks)::

    [signature]
    name=rlf_report
    layer=RRC
    kind=pltl
    severity=high
    remedy=reconnect
    body=(imp (prop ueInformationRequest) ...)
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from . import catalog as _catalog
from . import pltl
from .automata import BENIGN_OUTPUT, Dfa, MealyMachine, load_dfa, load_mm
from .pltl import Alphabet, Formula, PltlMonitor
from .traces import TraceSkeleton, event_symbol, event_to_state

__all__ = [
    "SignatureEntry",
    "SignatureDb",
    "Verdict",
    "MonitorReport",
    "MetricsRow",
    "MetricsReport",
    "MemRow",
    "MemReport",
    "ThroughputResult",
    "DbFormatError",
    "load_db",
    "save_db",
    "default_db",
    "run_monitors",
    "evaluate",
    "bench_throughput",
    "mem_report",
    "vulnerability_attack_name",
]

_KINDS = ("pltl", "dfa", "mm")
_SEVERITIES = ("low", "medium", "high")
_LAYERS = ("NAS", "RRC")


class DbFormatError(ValueError):
    """Signature database file rejected."""


@dataclass
class SignatureEntry:
    name: str
    layer: str
    kind: str
    severity: str
    remedy: str
    body: str
    formula: Optional[Formula] = None
    dfa: Optional[Dfa] = None
    mm: Optional[MealyMachine] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DbFormatError(f"unknown kind {self.kind!r}")
        if self.layer not in _LAYERS:
            raise DbFormatError(f"unknown layer {self.layer!r}")
        if self.severity not in _SEVERITIES:
            raise DbFormatError(f"unknown severity {self.severity!r}")

    def resolve(self, base_dir: Optional[Path] = None) -> None:
        """Parse/load the body so a monitor can be constructed."""
        if self.kind == "pltl":
            self.formula = pltl.parse_formula(self.body)
        else:
            path = Path(self.body)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise DbFormatError(f"signature {self.name!r}: no such file {path}")
            if self.kind == "dfa":
                self.dfa = load_dfa(path)
            else:
                self.mm = load_mm(path)


@dataclass
class SignatureDb:
    entries: list[SignatureEntry] = field(default_factory=list)

    def __post_init__(self):
        names = [e.name for e in self.entries]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise DbFormatError(f"duplicate signature names: {sorted(dupes)}")

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def by_name(self, name: str) -> SignatureEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def for_layer(self, layer: Optional[str]) -> list[SignatureEntry]:
        if layer is None:
            return list(self.entries)
        return [e for e in self.entries if e.layer == layer]


def load_db(path: Union[str, Path]) -> SignatureDb:
    path = Path(path)
    entries: list[SignatureEntry] = []
    fields: dict[str, str] = {}
    in_block = False

    def close_block(lineno: int) -> None:
        nonlocal fields, in_block
        if not in_block:
            return
        missing = {"name", "layer", "kind", "severity", "remedy", "body"} - set(fields)
        if missing:
            raise DbFormatError(f"line {lineno}: block missing {sorted(missing)}")
        entries.append(SignatureEntry(**fields))
        fields = {}
        in_block = False

    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[signature]":
            close_block(lineno)
            in_block = True
            continue
        if not in_block:
            raise DbFormatError(f"line {lineno}: content outside a [signature] block")
        key, sep, value = line.partition("=")
        if not sep:
            raise DbFormatError(f"line {lineno}: expected key=value, got {line!r}")
        key = key.strip()
        if key in fields:
            raise DbFormatError(f"line {lineno}: duplicate field {key!r}")
        fields[key] = value.strip()
    close_block(lineno if entries or fields else 0)
    db = SignatureDb(entries)
    for entry in db:
        try:
            entry.resolve(base_dir=path.parent)
        except pltl.ParseError as exc:
            raise DbFormatError(f"signature {entry.name!r}: {exc}") from exc
    return db


def save_db(path: Union[str, Path], db: SignatureDb) -> None:
    lines = []
    for e in db:
        lines += [
            "[signature]",
            f"name={e.name}",
            f"layer={e.layer}",
            f"kind={e.kind}",
            f"severity={e.severity}",
            f"remedy={e.remedy}",
            f"body={e.body}",
            "",
        ]
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def default_db(layer: Optional[str] = None) -> SignatureDb:
    """Database of the built-in catalog's reference formulas."""
    entries = []
    for name in sorted(_catalog.ATTACKS):
        info = _catalog.ATTACKS[name]
        if layer is not None and info.layer != layer:
            continue
        entry = SignatureEntry(
            name=info.name,
            layer=info.layer,
            kind="pltl",
            severity=info.severity,
            remedy=info.remedy,
            body=info.signature,
        )
        entry.resolve()
        entries.append(entry)
    return SignatureDb(entries)


# ---------------------------------------------------------------------------
# Monitoring pipeline.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    trace_index: int
    step_index: int
    signature: str
    kind: str               # "pltl-false" | "dfa-reject" | "mm-output"
    output: Optional[str] = None  # Mealy output label for mm hits

    @property
    def attack(self) -> Optional[str]:
        """Attack attribution: the signature name, or the Mealy output."""
        if self.kind == "mm-output" and self.output is not None:
            return vulnerability_attack_name(self.output)
        return self.signature


def vulnerability_attack_name(output: str) -> str:
    prefix = "vulnerability_"
    return output[len(prefix):] if output.startswith(prefix) else output


@dataclass
class MonitorReport:
    verdicts: list[Verdict] = field(default_factory=list)
    trace_count: int = 0
    skipped_symbols: dict[str, int] = field(default_factory=dict)

    def flagged(self, signature: str, attack: Optional[str] = None) -> set[int]:
        out = set()
        for v in self.verdicts:
            if v.signature != signature:
                continue
            if attack is not None and v.attack != attack:
                continue
            out.add(v.trace_index)
        return out

    @property
    def flagged_traces(self) -> set[int]:
        return {v.trace_index for v in self.verdicts}


class _PltlCursor:
    __slots__ = ("entry", "monitor", "stopped")

    def __init__(self, entry: SignatureEntry, alphabet: Alphabet):
        self.entry = entry
        for name in entry.formula.propositions():
            if name not in alphabet:
                raise ValueError(
                    f"signature {entry.name!r} uses proposition {name!r} "
                    "absent from the stream alphabet"
                )
        self.monitor = PltlMonitor(entry.formula, alphabet)
        self.stopped = False


class _DfaCursor:
    __slots__ = ("entry", "state", "symbols", "stopped", "skipped")

    def __init__(self, entry: SignatureEntry):
        self.entry = entry
        self.state: Optional[int] = entry.dfa.start
        self.symbols = frozenset(entry.dfa.alphabet)
        self.stopped = False
        self.skipped = 0


class _MmCursor:
    __slots__ = ("entry", "state", "symbols", "stopped", "skipped", "missing")

    def __init__(self, entry: SignatureEntry):
        self.entry = entry
        self.state = entry.mm.start
        self.symbols = frozenset(entry.mm.input_alphabet)
        self.stopped = False
        self.skipped = 0
        self.missing = 0


def run_monitors(
    db: SignatureDb,
    traces: Sequence[TraceSkeleton],
    alphabet: Alphabet,
    mode: str = "stop-first",
    layer: Optional[str] = None,
) -> MonitorReport:
    """Dispatch every event of every trace to every signature monitor.

    Event symbols outside a machine's alphabet are skipped for that machine
    (counted per signature); unknown propositions in a formula signature are
    an error.  In stop-first mode a signature stops monitoring a trace after
    its first hit; other signatures continue.
    """
    if mode not in ("stop-first", "report-all"):
        raise ValueError(f"unknown run mode {mode!r}")
    entries = db.for_layer(layer)
    report = MonitorReport(trace_count=len(traces))
    stop_first = mode == "stop-first"
    verdicts = report.verdicts
    for t_idx, skeleton in enumerate(traces):
        cursors = []
        for entry in entries:
            if entry.kind == "pltl":
                cursors.append(_PltlCursor(entry, alphabet))
            elif entry.kind == "dfa":
                cursors.append(_DfaCursor(entry))
            else:
                cursors.append(_MmCursor(entry))
        events = skeleton.events()
        for s_idx, event in enumerate(events):
            state = event_to_state(event, alphabet)
            symbol = event_symbol(event)
            for cur in cursors:
                if cur.stopped:
                    continue
                entry = cur.entry
                if entry.kind == "pltl":
                    if not cur.monitor.step(state):
                        verdicts.append(Verdict(t_idx, s_idx, entry.name, "pltl-false"))
                        if stop_first:
                            cur.stopped = True
                elif entry.kind == "dfa":
                    if symbol not in cur.symbols:
                        cur.skipped += 1
                        continue
                    if cur.state is not None:
                        nxt = entry.dfa.transitions.get((cur.state, symbol))
                    else:
                        nxt = None
                    cur.state = nxt
                    if nxt is None or nxt not in entry.dfa.accepting:
                        verdicts.append(Verdict(t_idx, s_idx, entry.name, "dfa-reject"))
                        if stop_first:
                            cur.stopped = True
                else:
                    if symbol not in cur.symbols:
                        cur.skipped += 1
                        continue
                    hop = entry.mm.transitions.get((cur.state, symbol))
                    if hop is None:
                        cur.missing += 1  # stay in place, emit benign
                        continue
                    cur.state, out = hop
                    if out != BENIGN_OUTPUT:
                        verdicts.append(Verdict(t_idx, s_idx, entry.name, "mm-output", out))
                        if stop_first:
                            cur.stopped = True
        for cur in cursors:
            skipped = getattr(cur, "skipped", 0)
            if skipped:
                key = cur.entry.name
                report.skipped_symbols[key] = report.skipped_symbols.get(key, 0) + skipped
    return report


# ---------------------------------------------------------------------------
# Metrics.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsRow:
    signature: str
    attack: str
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 1.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 1.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class MetricsReport:
    rows: list[MetricsRow]

    def row(self, signature: str, attack: Optional[str] = None) -> MetricsRow:
        for r in self.rows:
            if r.signature == signature and (attack is None or r.attack == attack):
                return r
        raise KeyError((signature, attack))


def evaluate(
    db: SignatureDb,
    traces: Sequence[TraceSkeleton],
    alphabet: Alphabet,
    mode: str = "stop-first",
    layer: Optional[str] = None,
) -> MetricsReport:
    """Per-signature detection metrics over a labeled corpus.

    A signature is scored per attack against the benign traces plus that
    attack's traces (other attacks' traces are out of scope for it, matching
    per-attack test corpora).  For a formula or DFA signature the attack is
    the signature's name; a Mealy signature is scored once per vulnerability
    output it can emit.
    """
    report = run_monitors(db, traces, alphabet, mode=mode, layer=layer)
    benign_idx = {i for i, t in enumerate(traces) if not t.is_attack}
    by_attack: dict[str, set[int]] = {}
    for i, t in enumerate(traces):
        if t.is_attack:
            by_attack.setdefault(t.attack_name, set()).add(i)
    rows = []
    for entry in db.for_layer(layer):
        if entry.kind == "mm":
            attacks = [
                vulnerability_attack_name(o)
                for o in entry.mm.output_alphabet
                if o != BENIGN_OUTPUT
            ]
        else:
            attacks = [entry.name]
        for attack in sorted(attacks):
            flagged = report.flagged(entry.name, attack if entry.kind == "mm" else None)
            attack_idx = by_attack.get(attack, set())
            tp = len(flagged & attack_idx)
            fn = len(attack_idx - flagged)
            fp = len(flagged & benign_idx)
            tn = len(benign_idx - flagged)
            rows.append(MetricsRow(entry.name, attack, tp, fp, fn, tn))
    return MetricsReport(rows)


# ---------------------------------------------------------------------------
# Throughput benchmark.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThroughputResult:
    messages: int
    repeat: int
    mean_mps: float
    sd_mps: float


def bench_throughput(
    db: SignatureDb,
    traces: Sequence[TraceSkeleton],
    repeat: int = 5,
    alphabet: Optional[Alphabet] = None,
    layer: Optional[str] = None,
) -> ThroughputResult:
    """Messages/second of `run_monitors` over pre-parsed events.

    Event decoding (states and symbols) happens once, outside the timed
    region; each repetition replays the same deterministic stream against
    fresh monitors.
    """
    if repeat < 1:
        raise ValueError("repeat must be >= 1")
    entries = db.for_layer(layer)
    if alphabet is None:
        layers = {e.layer for e in entries} or ({layer} if layer else set())
        if len(layers) != 1:
            raise ValueError("pass an explicit alphabet for a mixed-layer database")
        alphabet = _catalog.layer_alphabet(layers.pop())
    stream = []
    for skeleton in traces:
        for event in skeleton.events():
            stream.append((event_to_state(event, alphabet), event_symbol(event)))
    if not stream:
        raise ValueError("empty event stream")
    rates = []
    for _ in range(repeat):
        cursors = []
        for entry in entries:
            if entry.kind == "pltl":
                cursors.append(("p", PltlMonitor(entry.formula, alphabet)))
            elif entry.kind == "dfa":
                cursors.append(("d", _DfaCursor(entry)))
            else:
                cursors.append(("m", _MmCursor(entry)))
        t0 = time.perf_counter()
        for state, symbol in stream:
            for kind, cur in cursors:
                if kind == "p":
                    cur.step(state)
                elif kind == "d":
                    if symbol in cur.symbols and cur.state is not None:
                        cur.state = cur.entry.dfa.transitions.get((cur.state, symbol))
                else:
                    if symbol in cur.symbols:
                        hop = cur.entry.mm.transitions.get((cur.state, symbol))
                        if hop is not None:
                            cur.state = hop[0]
        elapsed = time.perf_counter() - t0
        rates.append(len(stream) / elapsed if elapsed > 0 else float("inf"))
    mean = statistics.fmean(rates)
    sd = statistics.stdev(rates) if len(rates) > 1 else 0.0
    return ThroughputResult(len(stream), repeat, mean, sd)


# ---------------------------------------------------------------------------
# Lower-bound memory report.
# ---------------------------------------------------------------------------

PLTL_OPERATOR_MENU_SIZE = 9  # constants plus unary and binary operator symbols


def _bits(count: int) -> int:
    """Ceiling log2 with log2(1) = 0; fields counting 0 or 1 items need no bits."""
    return 0 if count <= 1 else max(1, math.ceil(math.log2(count)))


@dataclass(frozen=True)
class MemRow:
    name: str
    kind: str
    layer: str
    params: dict
    structure_bits: int
    state_bits: int
    header_bytes: int

    @property
    def total_bits(self) -> int:
        return self.structure_bits + self.state_bits


@dataclass
class MemReport:
    rows: list[MemRow]

    def layer_total_bits(self, layer: str) -> int:
        return sum(r.total_bits for r in self.rows if r.layer == layer)

    def row(self, name: str) -> MemRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def dfa_memory_bits(num_states: int, num_transitions: int, alphabet_size: int) -> tuple[int, int]:
    """(structure, runtime-state) bit counts: each transition stores source,
    target, and symbol; each state start/accept flags; the run keeps the
    current state."""
    n, m, a = num_states, num_transitions, alphabet_size
    structure = m * (_bits(n) + _bits(n) + _bits(a)) + 2 * n
    return structure, _bits(n)


def mm_memory_bits(num_states: int, num_transitions: int, input_size: int, output_size: int) -> tuple[int, int]:
    n, m = num_states, num_transitions
    structure = m * (_bits(n) + _bits(n) + _bits(input_size) + _bits(output_size)) + n
    return structure, _bits(n)


def pltl_memory_bits(formula: Formula, alphabet_size: int) -> tuple[int, int, int, int]:
    """(P, T, structure, runtime) where P counts proposition leaves and T the
    remaining nodes; the monitor keeps two truth bits per subformula."""
    props = 0
    ops = 0
    def walk(f: Formula):
        nonlocal props, ops
        if f.kind == "prop":
            props += 1
        else:
            ops += 1
        if f.left is not None:
            walk(f.left)
        if f.right is not None:
            walk(f.right)
    walk(formula)
    structure = props * _bits(alphabet_size) + ops * _bits(PLTL_OPERATOR_MENU_SIZE)
    runtime = 2 * (props + ops)
    return props, ops, structure, runtime


def mem_report(
    db: SignatureDb,
    alphabet_sizes: Optional[Mapping[str, int]] = None,
) -> MemReport:
    """Lower-bound bits per signature using ceiling-rounded logarithms.

    `alphabet_sizes` gives the monitored alphabet size per layer for formula
    signatures (defaults to the built-in layer alphabets).
    """
    if alphabet_sizes is None:
        alphabet_sizes = {L: len(_catalog.layer_alphabet(L)) for L in _LAYERS}
    rows = []
    for entry in db:
        if entry.kind == "pltl":
            a = alphabet_sizes[entry.layer]
            p, t, structure, runtime = pltl_memory_bits(entry.formula, a)
            rows.append(MemRow(
                entry.name, "pltl", entry.layer,
                {"P": p, "T": t, "A": a},
                structure, runtime, 8,
            ))
        elif entry.kind == "dfa":
            d = entry.dfa
            structure, runtime = dfa_memory_bits(d.num_states, d.num_transitions, len(d.alphabet))
            rows.append(MemRow(
                entry.name, "dfa", entry.layer,
                {"N": d.num_states, "M": d.num_transitions, "A": len(d.alphabet)},
                structure, runtime, 12,
            ))
        else:
            m = entry.mm
            structure, runtime = mm_memory_bits(
                m.num_states, m.num_transitions,
                len(m.input_alphabet), len(m.output_alphabet),
            )
            rows.append(MemRow(
                entry.name, "mm", entry.layer,
                {"N": m.num_states, "M": m.num_transitions,
                 "I": len(m.input_alphabet), "O": len(m.output_alphabet)},
                structure, runtime, 16,
            ))
    return MemReport(rows)
