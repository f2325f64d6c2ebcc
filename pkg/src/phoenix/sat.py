"""Embedded CDCL satisfiability solver with DIMACS import/export.

Complete (terminates with a model or a refutation, never "unknown") and
deterministic: decisions follow activity order with ties broken by variable
index, and no randomization is used anywhere, so repeated runs and model
enumeration are reproducible.  The solver supports incremental clause
addition between `solve()` calls, which is how blocking-clause model
enumeration is driven.

The implementation is the standard kit: two-watched-literal propagation,
first-UIP conflict analysis with activity bumping and decay, phase saving,
Luby restarts, and length-based reduction of the learned-clause database.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

__all__ = [
    "CnfFormula",
    "SatSolver",
    "SolverBudgetExceeded",
    "sat_solve",
    "check_model",
    "to_dimacs",
    "from_dimacs",
    "write_dimacs",
    "read_dimacs",
]


@dataclass
class CnfFormula:
    """CNF over variables 1..num_vars; a clause is a list of nonzero literals."""

    num_vars: int
    clauses: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        for clause in self.clauses:
            self._check(clause)

    def _check(self, clause: Sequence[int]) -> None:
        if not clause:
            raise ValueError("empty clause")
        for lit in clause:
            if lit == 0 or abs(lit) > self.num_vars:
                raise ValueError(f"literal {lit} out of range (num_vars={self.num_vars})")

    def add_clause(self, clause: Sequence[int]) -> None:
        clause = list(clause)
        self._check(clause)
        self.clauses.append(clause)

    def __len__(self):
        return len(self.clauses)


class SolverBudgetExceeded(RuntimeError):
    """solve() hit the caller-supplied conflict budget or deadline."""


def check_model(cnf: CnfFormula, model: Sequence[bool]) -> bool:
    """True iff `model` (indexed by variable, entry 0 ignored) satisfies
    every clause."""
    return all(
        any(model[lit] if lit > 0 else not model[-lit] for lit in clause)
        for clause in cnf.clauses
    )


def to_dimacs(cnf: CnfFormula) -> str:
    lines = [f"p cnf {cnf.num_vars} {len(cnf.clauses)}"]
    for clause in cnf.clauses:
        lines.append(" ".join(str(lit) for lit in clause) + " 0")
    return "\n".join(lines) + "\n"


def from_dimacs(text: str) -> CnfFormula:
    num_vars = None
    declared = None
    clauses: list[list[int]] = []
    pending: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"line {lineno}: malformed problem line {line!r}")
            num_vars, declared = int(parts[2]), int(parts[3])
            continue
        if num_vars is None:
            raise ValueError(f"line {lineno}: clause before problem line")
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(pending)
                pending = []
            else:
                pending.append(lit)
    if pending:
        raise ValueError("unterminated clause at end of input")
    if num_vars is None:
        raise ValueError("missing problem line")
    if declared is not None and declared != len(clauses):
        raise ValueError(f"header declares {declared} clauses, found {len(clauses)}")
    return CnfFormula(num_vars, clauses)


def write_dimacs(path: Union[str, Path], cnf: CnfFormula) -> None:
    Path(path).write_text(to_dimacs(cnf), encoding="utf-8")


def read_dimacs(path: Union[str, Path]) -> CnfFormula:
    return from_dimacs(Path(path).read_text(encoding="utf-8"))


def _luby(i: int) -> int:
    # Luby restart sequence: 1 1 2 1 1 2 4 1 1 2 1 1 2 4 8 ...
    k = 1
    while (1 << (k + 1)) - 1 <= i:
        k += 1
    while (1 << k) - 1 != i + 1:
        i -= (1 << (k - 1)) - 1
        k -= 1
        while (1 << (k + 1)) - 1 <= i:
            k += 1
    return 1 << (k - 1)


class SatSolver:
    """Conflict-driven clause-learning solver over variables 1..num_vars."""

    def __init__(self, num_vars: int = 0):
        self.num_vars = 0
        self.clauses: list[list[int]] = []   # problem clauses
        self.learnts: list[list[int]] = []
        self.watches: dict[int, list[list[int]]] = {}
        self.assign: list[int] = [0]         # var -> 0 / +1 / -1
        self.level: list[int] = [0]
        self.reason: list[Optional[list[int]]] = [None]
        self.activity: list[float] = [0.0]
        self.phase: list[bool] = [False]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.var_inc = 1.0
        self.var_decay = 0.95
        self.unsat = False
        self.conflicts = 0
        self.propagations = 0
        self._heap: list[tuple[float, int]] = []
        if num_vars:
            self.grow(num_vars)

    # -- setup ------------------------------------------------------------

    def grow(self, num_vars: int) -> None:
        added = False
        while self.num_vars < num_vars:
            self.num_vars += 1
            v = self.num_vars
            self.assign.append(0)
            self.level.append(0)
            self.reason.append(None)
            self.activity.append(0.0)
            self.phase.append(False)
            self.watches[v] = []
            self.watches[-v] = []
            self._heap.append((0.0, v))
            added = True
        if added:
            heapq.heapify(self._heap)

    def add_cnf(self, cnf: CnfFormula) -> None:
        self.grow(cnf.num_vars)
        for clause in cnf.clauses:
            self.add_clause(clause)

    def add_clause(self, lits: Iterable[int]) -> None:
        """Add a problem clause; duplicates are removed, tautologies dropped.
        Safe to call between `solve()` invocations."""
        if self.trail_lim:
            self._cancel_until(0)
        seen = set()
        clause = []
        for lit in lits:
            if lit == 0:
                raise ValueError("literal 0 is not allowed")
            if abs(lit) > self.num_vars:
                self.grow(abs(lit))
            if -lit in seen:
                return  # tautology
            if lit not in seen:
                seen.add(lit)
                clause.append(lit)
        if not clause:
            self.unsat = True
            return
        # Drop root-level falsified literals; skip satisfied clauses.
        filtered = []
        for lit in clause:
            val = self._value(lit)
            if val == 1:
                return
            if val == 0:
                filtered.append(lit)
        if not filtered:
            self.unsat = True
            return
        if len(filtered) == 1:
            if not self._enqueue(filtered[0], None) or self._propagate() is not None:
                self.unsat = True
            return
        self.clauses.append(filtered)
        self._watch(filtered)

    def _watch(self, clause: list[int]) -> None:
        self.watches[clause[0]].append(clause)
        self.watches[clause[1]].append(clause)

    @staticmethod
    def _unwatch(watchlist: list[list[int]], clause: list[int]) -> None:
        for idx, entry in enumerate(watchlist):
            if entry is clause:
                del watchlist[idx]
                return

    # -- core -------------------------------------------------------------

    def _value(self, lit: int) -> int:
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def _enqueue(self, lit: int, reason: Optional[list[int]]) -> bool:
        val = self._value(lit)
        if val == 1:
            return True
        if val == -1:
            return False
        var = abs(lit)
        self.assign[var] = 1 if lit > 0 else -1
        self.level[var] = len(self.trail_lim)
        self.reason[var] = reason
        self.trail.append(lit)
        return True

    def _propagate(self) -> Optional[list[int]]:
        """Propagate queued assignments; returns a conflicting clause or None."""
        trail = self.trail
        assign = self.assign
        while self.qhead < len(trail):
            lit = trail[self.qhead]
            self.qhead += 1
            self.propagations += 1
            false_lit = -lit
            watchlist = self.watches[false_lit]
            i = 0
            j = 0
            n = len(watchlist)
            while i < n:
                clause = watchlist[i]
                i += 1
                # Keep the falsified literal in slot 1.
                if clause[0] == false_lit:
                    clause[0], clause[1] = clause[1], clause[0]
                first = clause[0]
                v = assign[first] if first > 0 else -assign[-first]
                if v == 1:
                    watchlist[j] = clause
                    j += 1
                    continue
                found = False
                for k in range(2, len(clause)):
                    lk = clause[k]
                    vk = assign[lk] if lk > 0 else -assign[-lk]
                    if vk != -1:
                        clause[1], clause[k] = clause[k], clause[1]
                        self.watches[clause[1]].append(clause)
                        found = True
                        break
                if found:
                    continue
                watchlist[j] = clause
                j += 1
                if not self._enqueue(first, clause):
                    while i < n:
                        watchlist[j] = watchlist[i]
                        j += 1
                        i += 1
                    del watchlist[j:]
                    return clause
            del watchlist[j:]
        return None

    def _bump(self, var: int) -> None:
        self.activity[var] += self.var_inc
        if self.activity[var] > 1e100:
            for v in range(1, self.num_vars + 1):
                self.activity[v] *= 1e-100
            self.var_inc *= 1e-100

    def _analyze(self, conflict: list[int]) -> tuple[list[int], int]:
        """First-UIP learned clause and backjump level."""
        learnt = [0]  # slot for the asserting literal
        seen = [False] * (self.num_vars + 1)
        counter = 0
        lit = None
        clause = conflict
        start = 0  # reason clauses carry their implied literal in slot 0
        index = len(self.trail)
        cur_level = len(self.trail_lim)
        while True:
            for q in clause[start:]:
                var = abs(q)
                if not seen[var] and self.level[var] > 0:
                    seen[var] = True
                    self._bump(var)
                    if self.level[var] == cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while True:
                index -= 1
                lit = -self.trail[index]
                if seen[abs(lit)]:
                    break
            counter -= 1
            seen[abs(lit)] = False
            if counter == 0:
                break
            clause = self.reason[abs(lit)]
            start = 1
        learnt[0] = lit
        if len(learnt) == 1:
            return learnt, 0
        # Backjump to the second-highest decision level in the clause.
        hi = max(range(1, len(learnt)), key=lambda idx: self.level[abs(learnt[idx])])
        back = self.level[abs(learnt[hi])]
        learnt[1], learnt[hi] = learnt[hi], learnt[1]
        return learnt, back

    def _cancel_until(self, target: int) -> None:
        while len(self.trail_lim) > target:
            limit = self.trail_lim.pop()
            for lit in self.trail[limit:]:
                var = abs(lit)
                self.phase[var] = lit > 0
                self.assign[var] = 0
                self.reason[var] = None
                heapq.heappush(self._heap, (-self.activity[var], var))
            del self.trail[limit:]
        self.qhead = min(self.qhead, len(self.trail))

    def _pick_branch_var(self) -> int:
        while self._heap:
            act, var = heapq.heappop(self._heap)
            if self.assign[var] == 0 and -act == self.activity[var]:
                return var
        for v in range(1, self.num_vars + 1):
            if self.assign[v] == 0:
                return v
        return 0

    def _reduce_db(self) -> None:
        self.learnts.sort(key=len)
        keep = len(self.learnts) // 2
        locked = {id(r) for r in self.reason if r is not None}
        kept = []
        for idx, clause in enumerate(self.learnts):
            if idx < keep or len(clause) <= 2 or id(clause) in locked:
                kept.append(clause)
            else:
                self._unwatch(self.watches[clause[0]], clause)
                self._unwatch(self.watches[clause[1]], clause)
        self.learnts = kept

    def solve(
        self,
        max_conflicts: Optional[int] = None,
        deadline: Optional[float] = None,
    ) -> Optional[list[bool]]:
        """Model as a bool list indexed by variable (slot 0 unused), or None
        when unsatisfiable.

        `max_conflicts` / `deadline` (a time.monotonic() instant) bound the
        search for callers running under a budget; exceeding either raises
        :class:`SolverBudgetExceeded` with the solver left reusable.
        """
        if self.unsat:
            return None
        self._cancel_until(0)
        if self._propagate() is not None:
            self.unsat = True
            return None
        restart_count = 0
        limit = 100 * _luby(restart_count)
        conflicts_here = 0
        start_conflicts = self.conflicts
        max_learnts = max(1000, len(self.clauses) // 3)
        while True:
            conflict = self._propagate()
            if conflict is not None:
                self.conflicts += 1
                conflicts_here += 1
                if not self.trail_lim:
                    self.unsat = True
                    return None
                learnt, back = self._analyze(conflict)
                self._cancel_until(back)
                if len(learnt) == 1:
                    if not self._enqueue(learnt[0], None):
                        self.unsat = True
                        return None
                else:
                    self.learnts.append(learnt)
                    self._watch(learnt)
                    self._enqueue(learnt[0], learnt)
                self.var_inc /= self.var_decay
                if max_conflicts is not None and self.conflicts - start_conflicts >= max_conflicts:
                    self._cancel_until(0)
                    raise SolverBudgetExceeded("conflict budget exhausted")
                if deadline is not None and self.conflicts % 256 == 0 and time.monotonic() > deadline:
                    self._cancel_until(0)
                    raise SolverBudgetExceeded("deadline exceeded")
                if conflicts_here >= limit:
                    restart_count += 1
                    limit = 100 * _luby(restart_count)
                    conflicts_here = 0
                    self._cancel_until(0)
                if len(self.learnts) > max_learnts:
                    self._reduce_db()
                    max_learnts = int(max_learnts * 1.2)
                continue
            var = self._pick_branch_var()
            if var == 0:
                model = [False] * (self.num_vars + 1)
                for v in range(1, self.num_vars + 1):
                    model[v] = self.assign[v] == 1
                self._cancel_until(0)
                return model
            self.trail_lim.append(len(self.trail))
            lit = var if self.phase[var] else -var
            self._enqueue(lit, None)


def sat_solve(cnf: CnfFormula) -> Optional[list[bool]]:
    """Complete satisfiability check; a returned model is verified against
    every clause before being handed back."""
    solver = SatSolver()
    solver.add_cnf(cnf)
    model = solver.solve()
    if model is not None:
        assert check_model(cnf, model), "solver returned a non-model"
    return model
