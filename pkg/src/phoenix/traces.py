"""Event/session/trace data model, trace file format, and trace generators.

A trace is a sequence of sessions; a session is a sequence of events starting
at a connection-initiation message.  Events carry a message label plus named
Boolean predicates over the payload.  Generators build benign traces by
concatenating randomly drawn seed sessions and malicious traces by splicing
attack-session variants into a benign skeleton; both are deterministic for a
fixed seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .pltl import Alphabet, State, Trace

__all__ = [
    "Event",
    "Session",
    "TraceSkeleton",
    "VariantCatalog",
    "TraceFormatError",
    "DEFAULT_INITIATION_LABELS",
    "event_to_state",
    "event_symbol",
    "trace_word",
    "skeleton_to_trace",
    "parse_traces_text",
    "parse_traces",
    "write_traces_text",
    "write_traces",
    "load_alphabet_file",
    "write_alphabet_file",
    "gen_benign",
    "gen_malicious",
]

DEFAULT_INITIATION_LABELS = (
    "rrcConnectionRequest",
    "attachRequest",
    "serviceRequest",
    "tauRequest",
)


class TraceFormatError(ValueError):
    """Trace or alphabet file rejected; message carries the line number."""


@dataclass(frozen=True)
class Event:
    """One protocol message: a label and Boolean payload predicates."""

    label: str
    predicates: Mapping[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        if not self.label:
            raise ValueError("event label must be non-empty")
        object.__setattr__(self, "predicates", dict(self.predicates))

    def __hash__(self):
        return hash((self.label, tuple(sorted(self.predicates.items()))))


@dataclass(frozen=True)
class Session:
    """Non-empty ordered event sequence; the first event opens the connection."""

    events: tuple[Event, ...]

    def __init__(self, events: Iterable[Event]):
        events = tuple(events)
        if not events:
            raise ValueError("session must contain at least one event")
        object.__setattr__(self, "events", events)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def starts_with_initiation(self, labels: Sequence[str] = DEFAULT_INITIATION_LABELS) -> bool:
        return self.events[0].label in labels


@dataclass
class TraceSkeleton:
    """Sequence of sessions with a benign/attack label.

    `attack_name` is set exactly when the trace contains attack sessions;
    `attack_session_indices` records which session positions were replaced.
    """

    sessions: tuple[Session, ...]
    attack_name: Optional[str] = None
    attack_session_indices: frozenset[int] = frozenset()

    def __post_init__(self):
        self.sessions = tuple(self.sessions)
        self.attack_session_indices = frozenset(self.attack_session_indices)
        if (self.attack_name is not None) != bool(self.attack_session_indices):
            # Parsed files carry a label but not the splice positions; allow
            # labelled traces without indices, but never indices without label.
            if self.attack_name is None:
                raise ValueError("attack session indices require an attack label")
        for i in self.attack_session_indices:
            if not 0 <= i < len(self.sessions):
                raise ValueError(f"attack session index {i} out of range")

    @property
    def is_attack(self) -> bool:
        return self.attack_name is not None

    @property
    def label(self) -> str:
        return "benign" if self.attack_name is None else f"attack {self.attack_name}"

    def events(self) -> list[Event]:
        out: list[Event] = []
        for s in self.sessions:
            out.extend(s.events)
        return out

    def __len__(self):
        return sum(len(s) for s in self.sessions)


@dataclass
class VariantCatalog:
    """Attack name -> distinct undesired-behavior-session variants."""

    variants: dict[str, list[Session]] = field(default_factory=dict)

    def add(self, attack: str, session: Session) -> None:
        bucket = self.variants.setdefault(attack, [])
        if session in bucket:
            raise ValueError(f"duplicate variant for attack {attack!r}")
        bucket.append(session)

    def attacks(self) -> list[str]:
        return sorted(self.variants)

    def __contains__(self, attack: str) -> bool:
        return attack in self.variants

    def __getitem__(self, attack: str) -> list[Session]:
        return self.variants[attack]


# ---------------------------------------------------------------------------
# Encoding events for the two monitor families.
# ---------------------------------------------------------------------------

def event_to_state(event: Event, alphabet: Alphabet) -> State:
    """Total state: label proposition true, predicates as given, rest false."""
    bits = [0] * len(alphabet)
    if event.label not in alphabet:
        raise KeyError(f"event label {event.label!r} not in alphabet")
    bits[alphabet.index(event.label)] = 1
    for name, value in event.predicates.items():
        if name not in alphabet:
            raise KeyError(f"predicate {name!r} not in alphabet")
        bits[alphabet.index(name)] = 1 if value else 0
    return State(alphabet, bits)


def event_symbol(event: Event) -> str:
    """Automata-word symbol: label plus any true predicates, canonically ordered."""
    on = sorted(name for name, value in event.predicates.items() if value)
    if not on:
        return event.label
    return event.label + ":" + ":".join(on)


def trace_word(trace: TraceSkeleton) -> tuple[str, ...]:
    """The trace as a word over event symbols (for automata learning/runs)."""
    return tuple(event_symbol(e) for e in trace.events())


def skeleton_to_trace(skeleton: TraceSkeleton, alphabet: Alphabet) -> Trace:
    """Flatten to a monitorable state sequence, carrying the label."""
    states = [event_to_state(e, alphabet) for e in skeleton.events()]
    label = "benign" if not skeleton.is_attack else skeleton.attack_name
    return Trace(states, label=label)


# ---------------------------------------------------------------------------
# Trace file format (line oriented, UTF-8):
#   '#' comment lines, ignored
#   '@label benign' or '@label attack <name>'  before a trace
#   one event per line:  LABEL [pred=0|1 ...]
#   blank line   -> session boundary
#   '---' line   -> trace boundary
# Alphabet file: one identifier per line, message labels first, then
# predicates after a '%predicates' marker.
# ---------------------------------------------------------------------------

def _parse_event_line(line: str, lineno: int) -> Event:
    parts = line.split()
    label = parts[0]
    preds: dict[str, bool] = {}
    for part in parts[1:]:
        if "=" not in part:
            raise TraceFormatError(
                f"line {lineno}: malformed predicate {part!r} (expected name=0|1)"
            )
        name, _, value = part.partition("=")
        if value not in ("0", "1") or not name:
            raise TraceFormatError(
                f"line {lineno}: malformed predicate {part!r} (expected name=0|1)"
            )
        preds[name] = value == "1"
    return Event(label, preds)


def parse_traces_text(
    text: str,
    initiation_labels: Sequence[str] = DEFAULT_INITIATION_LABELS,
    warn: Optional[list[str]] = None,
) -> list[TraceSkeleton]:
    """Parse trace file content.  Sessions that do not open with an initiation
    label produce a warning string (collected into `warn` if given), not an
    error."""
    traces: list[TraceSkeleton] = []
    sessions: list[Session] = []
    current: list[Event] = []
    label: Optional[str] = None  # None = benign / unlabelled

    def close_session(lineno: int) -> None:
        nonlocal current
        if current:
            session = Session(current)
            if not session.starts_with_initiation(initiation_labels) and warn is not None:
                warn.append(
                    f"line {lineno}: session starts with {current[0].label!r}, "
                    "not a connection-initiation label"
                )
            sessions.append(session)
            current = []

    def close_trace(lineno: int) -> None:
        nonlocal sessions, label
        close_session(lineno)
        if sessions:
            traces.append(TraceSkeleton(tuple(sessions), attack_name=label))
            sessions = []
            label = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        if not line:
            close_session(lineno)
            continue
        if line == "---":
            close_trace(lineno)
            continue
        if line.startswith("@label"):
            parts = line.split()
            if len(parts) == 2 and parts[1] == "benign":
                label = None
            elif len(parts) == 3 and parts[1] == "attack":
                label = parts[2]
            else:
                raise TraceFormatError(f"line {lineno}: malformed label directive {line!r}")
            continue
        if line.startswith("@"):
            raise TraceFormatError(f"line {lineno}: unknown directive {line!r}")
        current.append(_parse_event_line(line, lineno))
    close_trace(len(text.splitlines()) + 1)
    return traces


def write_traces_text(traces: Iterable[TraceSkeleton]) -> str:
    out: list[str] = []
    for t, trace in enumerate(traces):
        if t:
            out.append("---")
        out.append(f"@label {trace.label}")
        for s, session in enumerate(trace.sessions):
            if s:
                out.append("")
            for event in session:
                parts = [event.label]
                for name in sorted(event.predicates):
                    parts.append(f"{name}={1 if event.predicates[name] else 0}")
                out.append(" ".join(parts))
    return "\n".join(out) + "\n"


def parse_traces(path: Union[str, Path], **kwargs) -> list[TraceSkeleton]:
    return parse_traces_text(Path(path).read_text(encoding="utf-8"), **kwargs)


def write_traces(path: Union[str, Path], traces: Iterable[TraceSkeleton]) -> None:
    Path(path).write_text(write_traces_text(traces), encoding="utf-8")


def load_alphabet_file(path: Union[str, Path]) -> tuple[Alphabet, list[str], list[str]]:
    """Returns (alphabet, labels, predicates); labels precede the marker."""
    labels: list[str] = []
    predicates: list[str] = []
    bucket = labels
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "%predicates":
            bucket = predicates
            continue
        if len(line.split()) != 1:
            raise TraceFormatError(f"line {lineno}: one identifier per line, got {line!r}")
        bucket.append(line)
    return Alphabet(labels + predicates), labels, predicates


def write_alphabet_file(path: Union[str, Path], labels: Sequence[str], predicates: Sequence[str]) -> None:
    lines = list(labels) + ["%predicates"] + list(predicates)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Generation.
# ---------------------------------------------------------------------------

def gen_benign(
    seed_sessions: Sequence[Session],
    sessions_per_trace: int,
    count: int,
    seed: int,
) -> list[TraceSkeleton]:
    """`count` benign traces, each concatenating `sessions_per_trace` sessions
    drawn uniformly with replacement from the seed pool."""
    if not seed_sessions:
        raise ValueError("empty seed session pool")
    if sessions_per_trace < 1:
        raise ValueError("sessions_per_trace must be >= 1")
    rng = random.Random(seed)
    pool = list(seed_sessions)
    traces = []
    for _ in range(count):
        picks = [pool[rng.randrange(len(pool))] for _ in range(sessions_per_trace)]
        traces.append(TraceSkeleton(tuple(picks)))
    return traces


def gen_malicious(
    seed_sessions: Sequence[Session],
    catalog: VariantCatalog,
    attack: str,
    sessions_per_trace: int,
    count: int,
    seed: int,
) -> list[TraceSkeleton]:
    """`count` possibly-malicious traces for one attack.

    Each trace starts from a fresh benign skeleton; `a_s` distinct variants
    (1 <= a_s < min(M, K), or exactly 1 when that bound is 1) replace `a_s`
    distinct session positions.  Variants and positions are drawn without
    replacement to keep per-trace attack sessions diverse.
    """
    if attack not in catalog:
        raise KeyError(f"unknown attack {attack!r}")
    if not seed_sessions:
        raise ValueError("empty seed session pool")
    variants = catalog[attack]
    if not variants:
        raise ValueError(f"attack {attack!r} has no variants")
    rng = random.Random(seed)
    pool = list(seed_sessions)
    m = sessions_per_trace
    bound = min(m, len(variants))
    traces = []
    for _ in range(count):
        sessions = [pool[rng.randrange(len(pool))] for _ in range(m)]
        a_s = 1 if bound <= 1 else rng.randint(1, bound - 1)
        positions = rng.sample(range(m), a_s)
        chosen = rng.sample(range(len(variants)), a_s)
        for pos, v in zip(positions, chosen):
            sessions[pos] = variants[v]
        traces.append(
            TraceSkeleton(tuple(sessions), attack_name=attack,
                          attack_session_indices=frozenset(positions))
        )
    return traces
