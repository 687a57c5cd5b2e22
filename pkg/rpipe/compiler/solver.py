"""A small CDCL SAT solver.

Two watched literals per clause, first-UIP clause learning, VSIDS branching
with saved phases and Luby restarts. Learnt clauses are never deleted.
Single-threaded runs are deterministic: ties in the activity heap fall back
to the variable number.
"""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field
from rpipe._compat import StrEnum
from typing import Callable, Iterable, Sequence

from rpipe.errors import InconsistentAssignmentError, SolverTimeout

logger = logging.getLogger(__name__)

RESTART_UNIT = 100
VAR_DECAY = 0.95
_CHECK_EVERY = 256


class SolveStatus(StrEnum):
    SAT = "sat"
    UNSAT = "unsat"
    TIMEOUT = "timeout"


class Heuristic(StrEnum):
    VSIDS = "vsids"
    ORDERED = "ordered"  # lowest unset variable, positive phase first


@dataclass(frozen=True)
class Assignment:
    values: tuple[bool, ...]  # index 0 unused

    def __getitem__(self, var: int) -> bool:
        return self.values[var]

    def true_vars(self) -> list[int]:
        return [v for v in range(1, len(self.values)) if self.values[v]]

    def satisfies(self, clause: Iterable[int]) -> bool:
        return any(self.values[abs(x)] == (x > 0) for x in clause)


@dataclass
class SolverStats:
    decisions: int = 0
    propagations: int = 0
    conflicts: int = 0
    restarts: int = 0
    learnt: int = 0


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    assignment: Assignment | None = None
    stats: SolverStats = field(default_factory=SolverStats)
    seconds: float = 0.0


def luby(i: int) -> int:
    """i-th element (from 1) of 1 1 2 1 1 2 4 1 1 2 ..."""
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while (1 << k) - 1 != i:
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1
    return 1 << (k - 1)


def _code(lit: int) -> int:
    return 2 * lit if lit > 0 else -2 * lit + 1


class CdclSolver:
    def __init__(
        self,
        num_vars: int,
        clauses: Iterable[Sequence[int]] = (),
        heuristic: Heuristic = Heuristic.VSIDS,
    ) -> None:
        self.num_vars = num_vars
        self.heuristic = Heuristic(heuristic)
        self.stats = SolverStats()
        self.original: list[list[int]] = []
        self._clauses: list[list[int]] = []
        self._watches: list[list[int]] = [[] for _ in range(2 * num_vars + 2)]
        self._value = [0] * (num_vars + 1)
        self._level = [0] * (num_vars + 1)
        self._reason: list[int | None] = [None] * (num_vars + 1)
        self._trail: list[int] = []
        self._trail_lim: list[int] = []
        self._qhead = 0
        self._activity = [0.0] * (num_vars + 1)
        self._inc = 1.0
        self._phase = [self.heuristic is Heuristic.ORDERED] * (num_vars + 1)
        self._heap = [(0.0, v) for v in range(1, num_vars + 1)]
        self._next_var = 1
        self._unsat = False
        for clause in clauses:
            self.add_clause(clause)

    def _lit_value(self, lit: int) -> int:
        v = self._value[abs(lit)]
        return v if lit > 0 else -v

    def _enqueue(self, lit: int, reason: int | None) -> None:
        var = abs(lit)
        self._value[var] = 1 if lit > 0 else -1
        self._level[var] = len(self._trail_lim)
        self._reason[var] = reason
        self._trail.append(lit)

    def add_clause(self, lits: Sequence[int]) -> None:
        """Add a clause; allowed between calls to ``solve``."""
        self._backtrack(0)
        clause = list(dict.fromkeys(lits))
        if any(not 0 < abs(x) <= self.num_vars for x in clause):
            raise ValueError(f"clause {list(lits)} references a variable outside 1..{self.num_vars}")
        self.original.append(list(clause))
        if any(-x in clause for x in clause):
            return
        clause = [x for x in clause if self._lit_value(x) != -1 or self._level[abs(x)] > 0]
        if any(self._lit_value(x) == 1 for x in clause):
            return
        if not clause:
            self._unsat = True
        elif len(clause) == 1:
            self._enqueue(clause[0], None)
        else:
            self._attach(clause)

    def _attach(self, clause: list[int]) -> int:
        index = len(self._clauses)
        self._clauses.append(clause)
        self._watches[_code(clause[0])].append(index)
        self._watches[_code(clause[1])].append(index)
        return index

    def _propagate(self) -> int | None:
        """Unit propagation; returns the index of a conflicting clause."""
        clauses, watches = self._clauses, self._watches
        while self._qhead < len(self._trail):
            false_lit = -self._trail[self._qhead]
            self._qhead += 1
            self.stats.propagations += 1
            ws = watches[_code(false_lit)]
            i = j = 0
            while i < len(ws):
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                if self._lit_value(c[0]) == 1:
                    ws[j] = ci
                    j += 1
                    continue
                for k in range(2, len(c)):
                    if self._lit_value(c[k]) != -1:
                        c[1], c[k] = c[k], c[1]
                        watches[_code(c[1])].append(ci)
                        break
                else:
                    ws[j] = ci
                    j += 1
                    if self._lit_value(c[0]) == -1:
                        while i < len(ws):
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        return ci
                    self._enqueue(c[0], ci)
            del ws[j:]
        return None

    def _bump(self, var: int) -> None:
        self._activity[var] += self._inc
        if self._activity[var] > 1e100:
            self._activity = [a * 1e-100 for a in self._activity]
            self._inc *= 1e-100
            self._heap = [(-self._activity[v], v) for v in range(1, self.num_vars + 1) if self._value[v] == 0]
            heapq.heapify(self._heap)
        elif self._value[var] == 0:
            heapq.heappush(self._heap, (-self._activity[var], var))

    def _analyze(self, conflict: int) -> tuple[list[int], int]:
        """First-UIP learnt clause (asserting literal first) and backjump level."""
        seen = set()
        learnt: list[int] = [0]
        current = len(self._trail_lim)
        pending = 0
        p: int | None = None
        index = len(self._trail) - 1
        clause = self._clauses[conflict]
        while True:
            for q in clause:
                if q == p:
                    continue
                var = abs(q)
                if var in seen or self._level[var] == 0:
                    continue
                seen.add(var)
                self._bump(var)
                if self._level[var] == current:
                    pending += 1
                else:
                    learnt.append(q)
            while abs(self._trail[index]) not in seen:
                index -= 1
            p = self._trail[index]
            index -= 1
            seen.discard(abs(p))
            pending -= 1
            if pending == 0:
                break
            clause = self._clauses[self._reason[abs(p)]]
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        deepest = max(range(1, len(learnt)), key=lambda k: self._level[abs(learnt[k])])
        learnt[1], learnt[deepest] = learnt[deepest], learnt[1]
        return learnt, self._level[abs(learnt[1])]

    def _backtrack(self, level: int) -> None:
        if len(self._trail_lim) <= level:
            return
        start = self._trail_lim[level]
        for lit in self._trail[start:]:
            var = abs(lit)
            if self.heuristic is Heuristic.VSIDS:
                self._phase[var] = lit > 0
                heapq.heappush(self._heap, (-self._activity[var], var))
            self._value[var] = 0
            self._reason[var] = None
            self._next_var = min(self._next_var, var)
        del self._trail[start:]
        del self._trail_lim[level:]
        self._qhead = len(self._trail)

    def _pick(self) -> int | None:
        if self.heuristic is Heuristic.ORDERED:
            while self._next_var <= self.num_vars and self._value[self._next_var] != 0:
                self._next_var += 1
            return self._next_var if self._next_var <= self.num_vars else None
        while self._heap:
            _, var = heapq.heappop(self._heap)
            if self._value[var] == 0:
                return var
        return None

    def _model(self) -> Assignment:
        values = tuple([False] + [self._value[v] == 1 for v in range(1, self.num_vars + 1)])
        assignment = Assignment(values)
        for clause in self.original:
            if not assignment.satisfies(clause):
                raise InconsistentAssignmentError(f"solver model violates clause {clause}")
        return assignment

    def _search(self, deadline: float | None, should_stop: Callable[[], bool] | None) -> SolveStatus:
        if self._unsat or self._propagate() is not None:
            self._unsat = True
            return SolveStatus.UNSAT
        restart_no, budget = 1, RESTART_UNIT * luby(1)
        ticks = 0
        while True:
            ticks += 1
            if ticks % _CHECK_EVERY == 0:
                if deadline is not None and time.monotonic() > deadline:
                    raise SolverTimeout("solver budget exhausted")
                if should_stop is not None and should_stop():
                    raise SolverTimeout("solver stopped")
            conflict = self._propagate()
            if conflict is not None:
                self.stats.conflicts += 1
                if not self._trail_lim:
                    self._unsat = True
                    return SolveStatus.UNSAT
                learnt, level = self._analyze(conflict)
                self._backtrack(level)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    self._enqueue(learnt[0], self._attach(learnt))
                self.stats.learnt += 1
                self._inc /= VAR_DECAY
                budget -= 1
                continue
            if budget <= 0:
                restart_no += 1
                budget = RESTART_UNIT * luby(restart_no)
                self.stats.restarts += 1
                self._backtrack(0)
                continue
            var = self._pick()
            if var is None:
                return SolveStatus.SAT
            self.stats.decisions += 1
            self._trail_lim.append(len(self._trail))
            self._enqueue(var if self._phase[var] else -var, None)

    def solve(
        self,
        timeout: float | None = None,
        should_stop: Callable[[], bool] | None = None,
    ) -> SolveResult:
        """Search for a model; ``timeout`` is in seconds of wall time."""
        started = time.monotonic()
        deadline = started + timeout if timeout else None
        try:
            status = self._search(deadline, should_stop)
        except SolverTimeout as exc:
            logger.debug("%s after %d conflicts", exc, self.stats.conflicts)
            self._backtrack(0)
            return SolveResult(SolveStatus.TIMEOUT, None, self.stats, time.monotonic() - started)
        assignment = self._model() if status is SolveStatus.SAT else None
        self._backtrack(0)
        elapsed = time.monotonic() - started
        logger.debug(
            "%s: %d vars, %d clauses, %d decisions, %d conflicts in %.3fs",
            status,
            self.num_vars,
            len(self.original),
            self.stats.decisions,
            self.stats.conflicts,
            elapsed,
        )
        return SolveResult(status, assignment, self.stats, elapsed)


def solve(
    num_vars: int,
    clauses: Iterable[Sequence[int]],
    timeout: float | None = None,
    heuristic: Heuristic = Heuristic.VSIDS,
    should_stop: Callable[[], bool] | None = None,
) -> SolveResult:
    return CdclSolver(num_vars, clauses, heuristic).solve(timeout, should_stop)
