"""SAT-based synthesis of minimally sized PLTL signatures from labeled traces.

The search iterates a target node count upward; for each count it encodes
"some well-formed formula with exactly that many AST nodes classifies every
sample trace correctly" as CNF and hands it to the embedded solver.  The
first satisfiable count is minimal by construction, and enumeration of
further models (blocking each found structure) yields alternative candidate
signatures, ranked afterwards on held-out traces.

Encoding shape: syntax-tree nodes are numbered 1..n with children strictly
below their parent and the root at n.  Per node there are label variables
(one per proposition, constant, and operator), left/right child pointers, and
per trace position a semantic truth variable plus left/right child-value
taps.  Structural constraints force exactly one label, arity-correct unique
children, and a unique parent for every non-root node, so models decode to
trees of exactly n nodes.  Semantic clauses chain each position's truth value
to the previous position's, one clause group per (node, label, position).

Trace positions are stored in a shared prefix table: two sample traces with
equal state prefixes share evaluation variables, which past-time semantics
makes sound (a formula's value at a position depends only on the prefix).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from . import pltl
from .pltl import Alphabet, Formula, Trace
from .sat import CnfFormula, SatSolver, SolverBudgetExceeded

__all__ = [
    "SynthesisProblem",
    "PltlEncoding",
    "RankedCandidate",
    "SynthesisTimeout",
    "EncodingBugError",
    "DEFAULT_OPERATORS",
    "CORE_OPERATORS",
    "encode",
    "decode",
    "synthesize_min",
    "synthesize_candidates",
    "select_best",
    "rank_candidates",
    "split_holdout",
]

DEFAULT_OPERATORS = ("not", "and", "or", "Y", "O", "H", "S")
CORE_OPERATORS = ("not", "and", "or", "Y", "S")

_UNARY = ("not", "Y", "O", "H")
_BINARY = ("and", "or", "S")
_COMMUTATIVE = ("and", "or")


class SynthesisTimeout(RuntimeError):
    """Wall-clock budget exhausted before the search finished."""


class EncodingBugError(AssertionError):
    """A decoded model failed re-verification against the sample."""


@dataclass
class SynthesisProblem:
    """Sample, alphabet, and search bounds for signature synthesis.

    `size` is the node count targeted by :func:`encode`; `max_size` is the
    threshold at which :func:`synthesize_min` gives up.  `semantics` selects
    what "consistent" means for a positive trace: satisfaction at every
    position (``global``, the monitoring contract) or only at the last
    position (``final``).
    """

    positives: list[Trace]
    negatives: list[Trace]
    alphabet: Alphabet
    size: int = 1
    max_size: int = 12
    operators: tuple[str, ...] = DEFAULT_OPERATORS
    semantics: str = "global"

    def __post_init__(self):
        if len(self.alphabet) == 0:
            raise ValueError("empty alphabet")
        if self.size < 1:
            raise ValueError("size must be >= 1")
        if self.max_size < self.size:
            raise ValueError("max_size must be >= size")
        if self.semantics not in ("global", "final"):
            raise ValueError(f"unknown semantics {self.semantics!r}")
        for op in self.operators:
            if op not in DEFAULT_OPERATORS:
                raise ValueError(f"unknown operator {op!r}")
        for trace in list(self.positives) + list(self.negatives):
            for state in trace:
                if state.alphabet != self.alphabet:
                    raise ValueError("sample trace alphabet mismatch")
        pos_keys = {_trace_key(t) for t in self.positives}
        for t in self.negatives:
            if not len(t):
                raise ValueError("an empty trace cannot be a negative example")
            if _trace_key(t) in pos_keys:
                raise ValueError("positive and negative sets overlap")


def _trace_key(trace: Trace) -> tuple:
    return tuple(s.bits for s in trace)


class _PrefixTable:
    """Shared prefix tree over the sample traces' state sequences."""

    def __init__(self, traces: Sequence[Trace]):
        self.parent: list[int] = []   # -1 for depth-0 nodes
        self.bits: list[tuple[int, ...]] = []
        self.paths: list[list[int]] = []
        index: dict[tuple[int, tuple[int, ...]], int] = {}
        for trace in traces:
            node = -1
            path = []
            for state in trace:
                key = (node, state.bits)
                nxt = index.get(key)
                if nxt is None:
                    nxt = len(self.parent)
                    index[key] = nxt
                    self.parent.append(node)
                    self.bits.append(state.bits)
                node = nxt
                path.append(node)
            self.paths.append(path)

    def __len__(self):
        return len(self.parent)


@dataclass
class PltlEncoding:
    """CNF plus the variable maps needed to decode or inspect a model."""

    problem: SynthesisProblem
    size: int
    cnf: CnfFormula
    labels: tuple[str, ...]
    x: dict[tuple[int, str], int]          # (node, label) -> var
    left: dict[tuple[int, int], int]       # (node, child) -> var
    right: dict[tuple[int, int], int]
    y: list[dict[int, int]]                # node -> table position -> var
    table: _PrefixTable

    def y_var(self, trace_index: int, node: int, position: int) -> int:
        """Semantic variable of `node` at a (trace, position) coordinate;
        traces are indexed positives-first, matching the problem order."""
        path = self.table.paths[trace_index]
        return self.y[node][path[position]]

    def structure_literals(self, formula: Formula) -> list[int]:
        """Unit literals pinning the encoding to `formula`'s tree (canonical
        postorder numbering, root last).  Raises if the formula does not fit
        the encoding's size or label menu."""
        nodes: list[Formula] = []

        def walk(f: Formula) -> int:
            # Right subtree first, so a binary node's left child always gets
            # the larger index (required of commutative operators).
            right = walk(f.right) if f.right is not None else None
            left = walk(f.left) if f.left is not None else None
            nodes.append(f)
            idx = len(nodes)
            lits.extend(self._node_literals(idx, f, left, right))
            return idx

        lits: list[int] = []
        walk(formula)
        if len(nodes) != self.size:
            raise ValueError(f"formula has {len(nodes)} nodes, encoding expects {self.size}")
        return lits

    def _node_literals(self, idx: int, f: Formula, left: Optional[int], right: Optional[int]) -> list[int]:
        label = f.name if f.kind == "prop" else f.kind
        if (idx, label) not in self.x:
            raise ValueError(f"label {label!r} not in the encoding menu")
        out = [self.x[(idx, label)]]
        for (node, lab), var in self.x.items():
            if node == idx and lab != label:
                out.append(-var)
        for (node, child), var in self.left.items():
            if node == idx:
                out.append(var if child == left else -var)
        for (node, child), var in self.right.items():
            if node == idx:
                out.append(var if child == right else -var)
        return out


def encode(problem: SynthesisProblem, size: Optional[int] = None) -> PltlEncoding:
    """CNF that is satisfiable iff some well-formed formula of exactly
    `size` nodes over the problem's alphabet classifies every sample trace
    correctly under the problem's semantics."""
    n = problem.size if size is None else size
    if n < 1:
        raise ValueError("size must be >= 1")
    alphabet = problem.alphabet
    props = list(alphabet.propositions)
    labels = tuple(props + ["true", "false"] + list(problem.operators))
    unary = [op for op in problem.operators if op in _UNARY]
    binary = [op for op in problem.operators if op in _BINARY]
    leaf_labels = props + ["true", "false"]

    table = _PrefixTable(list(problem.positives) + list(problem.negatives))
    prop_index = {p: i for i, p in enumerate(props)}

    counter = 0

    def new_var() -> int:
        nonlocal counter
        counter += 1
        return counter

    x = {(i, lab): new_var() for i in range(1, n + 1) for lab in labels}
    left = {(i, j): new_var() for i in range(2, n + 1) for j in range(1, i)}
    right = {(i, j): new_var() for i in range(2, n + 1) for j in range(1, i)}
    y = [None] + [
        {v: new_var() for v in range(len(table))} for _ in range(n)
    ]
    lval = [None] + [
        {v: new_var() for v in range(len(table))} if i >= 2 else None
        for i in range(1, n + 1)
    ]
    rval = [None] + [
        {v: new_var() for v in range(len(table))} if i >= 2 else None
        for i in range(1, n + 1)
    ]

    clauses: list[list[int]] = []
    add = clauses.append

    # --- structure: exactly one label per node -----------------------------
    for i in range(1, n + 1):
        row = [x[(i, lab)] for lab in labels]
        add(row)
        for a in range(len(row)):
            for b in range(a + 1, len(row)):
                add([-row[a], -row[b]])

    # --- structure: children ----------------------------------------------
    for i in range(1, n + 1):
        lchildren = [left[(i, j)] for j in range(1, i)]
        rchildren = [right[(i, j)] for j in range(1, i)]
        for a in range(len(lchildren)):
            for b in range(a + 1, len(lchildren)):
                add([-lchildren[a], -lchildren[b]])
                add([-rchildren[a], -rchildren[b]])
        for op in unary + binary:
            # needs a left child (impossible at node 1, making it a leaf)
            add([-x[(i, op)]] + lchildren)
        for op in binary:
            add([-x[(i, op)]] + rchildren)
        for op in unary:
            for var in rchildren:
                add([-x[(i, op)], -var])
        for lab in leaf_labels:
            for var in lchildren + rchildren:
                add([-x[(i, lab)], -var])
        # commutative operators take their larger-indexed child on the left;
        # swapping children preserves meaning, so this only prunes mirrors
        for op in _COMMUTATIVE:
            if op in binary:
                for j in range(1, i):
                    for k in range(j, i):
                        add([-x[(i, op)], -left[(i, j)], -right[(i, k)]])

    # --- structure: every non-root node has exactly one parent -------------
    for j in range(1, n):
        incoming = [left[(i, j)] for i in range(j + 1, n + 1)]
        incoming += [right[(i, j)] for i in range(j + 1, n + 1)]
        add(list(incoming))
        for a in range(len(incoming)):
            for b in range(a + 1, len(incoming)):
                add([-incoming[a], -incoming[b]])

    # --- child-value taps ---------------------------------------------------
    for i in range(2, n + 1):
        li = lval[i]
        ri = rval[i]
        for j in range(1, i):
            lv = left[(i, j)]
            rv = right[(i, j)]
            yj = y[j]
            for v in range(len(table)):
                add([-lv, -li[v], yj[v]])
                add([-lv, li[v], -yj[v]])
                add([-rv, -ri[v], yj[v]])
                add([-rv, ri[v], -yj[v]])

    # --- semantics per (node, label, position) ------------------------------
    parent = table.parent
    bits = table.bits
    for i in range(1, n + 1):
        yi = y[i]
        li = lval[i]
        ri = rval[i]
        for lab in labels:
            if i == 1 and lab not in leaf_labels:
                continue  # node 1 cannot carry an operator (no child exists)
            xv = x[(i, lab)]
            if lab in prop_index:
                p = prop_index[lab]
                for v in range(len(table)):
                    add([-xv, yi[v]] if bits[v][p] else [-xv, -yi[v]])
            elif lab == "true":
                for v in range(len(table)):
                    add([-xv, yi[v]])
            elif lab == "false":
                for v in range(len(table)):
                    add([-xv, -yi[v]])
            elif lab == "not":
                for v in range(len(table)):
                    add([-xv, -yi[v], -li[v]])
                    add([-xv, yi[v], li[v]])
            elif lab == "and":
                for v in range(len(table)):
                    add([-xv, -yi[v], li[v]])
                    add([-xv, -yi[v], ri[v]])
                    add([-xv, yi[v], -li[v], -ri[v]])
            elif lab == "or":
                for v in range(len(table)):
                    add([-xv, yi[v], -li[v]])
                    add([-xv, yi[v], -ri[v]])
                    add([-xv, -yi[v], li[v], ri[v]])
            elif lab == "Y":
                for v in range(len(table)):
                    u = parent[v]
                    if u < 0:
                        add([-xv, -yi[v]])
                    else:
                        add([-xv, -yi[v], li[u]])
                        add([-xv, yi[v], -li[u]])
            elif lab == "O":
                for v in range(len(table)):
                    u = parent[v]
                    if u < 0:
                        add([-xv, -yi[v], li[v]])
                        add([-xv, yi[v], -li[v]])
                    else:
                        add([-xv, yi[v], -li[v]])
                        add([-xv, yi[v], -yi[u]])
                        add([-xv, -yi[v], li[v], yi[u]])
            elif lab == "H":
                for v in range(len(table)):
                    u = parent[v]
                    if u < 0:
                        add([-xv, -yi[v], li[v]])
                        add([-xv, yi[v], -li[v]])
                    else:
                        add([-xv, -yi[v], li[v]])
                        add([-xv, -yi[v], yi[u]])
                        add([-xv, yi[v], -li[v], -yi[u]])
            elif lab == "S":
                for v in range(len(table)):
                    u = parent[v]
                    if u < 0:
                        add([-xv, -yi[v], ri[v]])
                        add([-xv, yi[v], -ri[v]])
                    else:
                        add([-xv, yi[v], -ri[v]])
                        add([-xv, yi[v], -yi[u], -li[v]])
                        add([-xv, -yi[v], ri[v], yi[u]])
                        add([-xv, -yi[v], ri[v], li[v]])

    # --- consistency ---------------------------------------------------------
    yroot = y[n]
    npos = len(problem.positives)
    if problem.semantics == "global":
        positive_nodes = set()
        for path in table.paths[:npos]:
            positive_nodes.update(path)
        for v in sorted(positive_nodes):
            add([yroot[v]])
        for path in table.paths[npos:]:
            add([-yroot[v] for v in path])
    else:
        for path in table.paths[:npos]:
            if path:
                add([yroot[path[-1]]])
        for path in table.paths[npos:]:
            add([-yroot[path[-1]]])

    cnf = CnfFormula(counter, clauses)
    return PltlEncoding(
        problem=problem, size=n, cnf=cnf, labels=labels,
        x=x, left=left, right=right, y=y, table=table,
    )


def decode(model: Sequence[bool], encoding: PltlEncoding) -> Formula:
    """Read the labeled tree out of a model and re-verify it against the
    sample with the reference semantics (never trusting the encoding)."""
    n = encoding.size

    def node_label(i: int) -> str:
        found = [lab for lab in encoding.labels if model[encoding.x[(i, lab)]]]
        if len(found) != 1:
            raise EncodingBugError(f"node {i} carries {len(found)} labels")
        return found[0]

    def child(table: dict, i: int) -> Optional[int]:
        found = [j for j in range(1, i) if model[table[(i, j)]]]
        if len(found) > 1:
            raise EncodingBugError(f"node {i} has {len(found)} children in one slot")
        return found[0] if found else None

    used: set[int] = set()

    def build(i: int) -> Formula:
        if i in used:
            raise EncodingBugError(f"node {i} referenced twice; model is not a tree")
        used.add(i)
        lab = node_label(i)
        lchild = child(encoding.left, i)
        rchild = child(encoding.right, i)
        if lab == "true":
            f = pltl.true()
        elif lab == "false":
            f = pltl.false()
        elif lab in ("not", "Y", "O", "H"):
            if lchild is None:
                raise EncodingBugError(f"unary node {i} lacks a child")
            f = Formula(lab, left=build(lchild))
        elif lab in ("and", "or", "S"):
            if lchild is None or rchild is None:
                raise EncodingBugError(f"binary node {i} lacks children")
            f = Formula(lab, left=build(lchild), right=build(rchild))
        else:
            f = pltl.prop(lab)
        return f

    formula = build(n)
    if len(used) != n or pltl.size(formula) != n:
        raise EncodingBugError(
            f"decoded tree uses {len(used)} of {n} nodes (size {pltl.size(formula)})"
        )
    _verify_consistent(formula, encoding.problem)
    return formula


def _classifies(formula: Formula, trace: Trace, semantics: str) -> bool:
    """True when the formula calls the trace benign."""
    if semantics == "global":
        return pltl.holds_globally(formula, trace)
    return len(trace) == 0 or pltl.eval_at(formula, trace, len(trace) - 1)


def _verify_consistent(formula: Formula, problem: SynthesisProblem) -> None:
    for trace in problem.positives:
        if not _classifies(formula, trace, problem.semantics):
            raise EncodingBugError(
                f"decoded formula {pltl.format_formula(formula)} rejects a positive trace"
            )
    for trace in problem.negatives:
        if _classifies(formula, trace, problem.semantics):
            raise EncodingBugError(
                f"decoded formula {pltl.format_formula(formula)} accepts a negative trace"
            )


def _structure_blocking_clause(model: Sequence[bool], encoding: PltlEncoding) -> list[int]:
    # Blocking only the true structural literals suffices: exactly-one
    # constraints make them determine the false ones.
    lits = []
    for var in encoding.x.values():
        if model[var]:
            lits.append(-var)
    for table in (encoding.left, encoding.right):
        for var in table.values():
            if model[var]:
                lits.append(-var)
    return lits


def synthesize_min(
    problem: SynthesisProblem,
    timeout: Optional[float] = 60.0,
) -> Optional[Formula]:
    """Smallest consistent formula, or None when no formula of size up to
    `problem.max_size` is consistent (bound exceeded).

    Sizes are tried in ascending order, so a returned formula of size n comes
    with every size below n proven unsatisfiable.  Raises
    :class:`SynthesisTimeout` when the wall-clock budget runs out first.
    """
    if not problem.positives and not problem.negatives:
        return pltl.true()  # any formula is vacuously consistent; ⊤ is minimal
    deadline = None if timeout is None else time.monotonic() + timeout
    for n in range(1, problem.max_size + 1):
        encoding = encode(problem, n)
        solver = SatSolver()
        solver.add_cnf(encoding.cnf)
        try:
            model = solver.solve(deadline=deadline)
        except SolverBudgetExceeded as exc:
            raise SynthesisTimeout(f"timed out while trying size {n}") from exc
        if model is not None:
            return decode(model, encoding)
    return None


def synthesize_candidates(
    problem: SynthesisProblem,
    k: int,
    timeout: Optional[float] = 60.0,
) -> list[Formula]:
    """Up to `k` consistent candidate formulas.

    The first is the minimal one; repeated solves with the previous structure
    blocked enumerate alternatives of the same size, then the size bound
    moves up (never past `problem.max_size`).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not problem.positives and not problem.negatives:
        return [pltl.true()]
    deadline = None if timeout is None else time.monotonic() + timeout
    found: list[Formula] = []
    n = 0
    solver = None
    encoding = None
    while len(found) < k and (n <= problem.max_size):
        if solver is None:
            n += 1
            if n > problem.max_size:
                break
            encoding = encode(problem, n)
            solver = SatSolver()
            solver.add_cnf(encoding.cnf)
        try:
            model = solver.solve(deadline=deadline)
        except SolverBudgetExceeded as exc:
            if found:
                return found
            raise SynthesisTimeout(f"timed out while trying size {n}") from exc
        if model is None:
            solver = None  # size exhausted; move up
            continue
        found.append(decode(model, encoding))
        solver.add_clause(_structure_blocking_clause(model, encoding))
    return found


def select_best(candidates: Sequence[Formula], holdout: Sequence[Trace]) -> Formula:
    """Highest hold-out F1; ties broken by smaller size, then candidate order."""
    if not candidates:
        raise ValueError("empty candidate list")
    ranked = rank_candidates_on(candidates, holdout)
    return ranked[0].formula


@dataclass(frozen=True)
class RankedCandidate:
    formula: Formula
    size: int
    f1: float


def holdout_f1(formula: Formula, holdout: Sequence[Trace], semantics: str = "global") -> float:
    """F1 of "formula flags the trace" against attack labels."""
    tp = fp = fn = 0
    for trace in holdout:
        flagged = not _classifies(formula, trace, semantics)
        is_attack = trace.label is not None and trace.label != "benign"
        if flagged and is_attack:
            tp += 1
        elif flagged and not is_attack:
            fp += 1
        elif not flagged and is_attack:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def rank_candidates_on(
    candidates: Sequence[Formula],
    holdout: Sequence[Trace],
    semantics: str = "global",
) -> list[RankedCandidate]:
    ranked = [
        RankedCandidate(f, pltl.size(f), holdout_f1(f, holdout, semantics))
        for f in candidates
    ]
    order = sorted(range(len(ranked)), key=lambda i: (-ranked[i].f1, ranked[i].size, i))
    return [ranked[i] for i in order]


def split_holdout(
    traces: Sequence[Trace],
    holdout_fraction: float,
    seed: int,
) -> tuple[list[Trace], list[Trace]]:
    """Seeded split, stratified by label; returns (train, holdout)."""
    import random

    if not 0 <= holdout_fraction < 1:
        raise ValueError("holdout fraction must be in [0, 1)")
    rng = random.Random(seed)
    by_label: dict[Optional[str], list[Trace]] = {}
    for t in traces:
        by_label.setdefault(t.label, []).append(t)
    train: list[Trace] = []
    holdout: list[Trace] = []
    for label in sorted(by_label, key=str):
        bucket = list(by_label[label])
        rng.shuffle(bucket)
        cut = int(round(len(bucket) * holdout_fraction))
        holdout.extend(bucket[:cut])
        train.extend(bucket[cut:])
    return train, holdout


def rank_candidates(
    positives: Sequence[Trace],
    negatives: Sequence[Trace],
    alphabet: Alphabet,
    k: int = 5,
    holdout_fraction: float = 0.2,
    seed: int = 0,
    max_size: int = 12,
    timeout: Optional[float] = 60.0,
    operators: tuple[str, ...] = DEFAULT_OPERATORS,
    semantics: str = "global",
) -> list[RankedCandidate]:
    """The full synthesis workflow: hold out a stratified slice of the
    sample, enumerate candidates on the rest, and rank them on the slice."""
    labeled = [Trace(t.states, label="benign") for t in positives]
    labeled += [Trace(t.states, label=t.label or "attack") for t in negatives]
    train, holdout = split_holdout(labeled, holdout_fraction, seed)
    problem = SynthesisProblem(
        positives=[t for t in train if t.label == "benign"],
        negatives=[t for t in train if t.label != "benign"],
        alphabet=alphabet,
        max_size=max_size,
        operators=operators,
        semantics=semantics,
    )
    candidates = synthesize_candidates(problem, k, timeout=timeout)
    if not candidates:
        return []
    if not holdout:
        holdout = labeled
    return rank_candidates_on(candidates, holdout, semantics)
