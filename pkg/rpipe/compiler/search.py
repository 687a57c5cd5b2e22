"""Degree-limit randomized compile search.

Each try encodes the program against a randomly restricted view of the
architecture and solves it. A restricted UNSAT only means the sampled edges
were not enough; only a try over a view that dropped no edge can prove the
program infeasible.
"""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import FIRST_COMPLETED, Future, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from rpipe._compat import StrEnum
from itertools import count
from multiprocessing import Manager
from typing import Any, Iterator, Protocol

from rpipe.compiler.encode import LitKind, encode
from rpipe.compiler.extract import extract_config
from rpipe.compiler.restrict import restrict
from rpipe.compiler.solver import CdclSolver, Heuristic, SolveStatus
from rpipe.errors import EncodeError, InconsistentAssignmentError, ParameterError
from rpipe.frontend.normalize import normalize_program
from rpipe.ir.config import RuntimeConfig
from rpipe.ir.nodes import PipeKind, PipelineArch, ProtocolProgram
from rpipe.ir.serialize import dump_json, load_artifact, to_document

logger = logging.getLogger(__name__)

DEFAULT_DEGREE_LIMITS = (2, 4, 8, 0)


class _Cancel(Protocol):
    def is_set(self) -> bool: ...


class Outcome(StrEnum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SearchParams:
    degree_limits: tuple[int, ...] = DEFAULT_DEGREE_LIMITS
    seed: int = 0
    workers: int = 1
    per_try_timeout: float | None = 60.0
    total_timeout: float | None = 300.0
    max_tries: int | None = None
    heuristic: Heuristic = Heuristic.VSIDS
    depth_pruning: bool = True
    # re-solve unrestricted whenever a restricted try succeeds
    check_monotone: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "degree_limits", tuple(self.degree_limits))
        if not self.degree_limits:
            raise ParameterError("at least one degree limit is required")
        if any(d < 0 for d in self.degree_limits):
            raise ParameterError(f"degree limits must be >= 0, got {list(self.degree_limits)}")
        if self.workers < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")
        if not 0 <= self.seed < 1 << 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        bounded = self.total_timeout is not None or self.max_tries is not None
        if not bounded and not (0 in self.degree_limits and self.per_try_timeout is None):
            raise ParameterError("search needs a total timeout or a try cap")


def try_seed(seed: int, index: int) -> int:
    digest = hashlib.blake2b(f"{seed}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def try_schedule(params: SearchParams) -> Iterator[tuple[int, int, int]]:
    """(try index, degree limit, try seed), round robin over the limits."""
    limits = params.degree_limits
    for index in count():
        if params.max_tries is not None and index >= params.max_tries:
            return
        yield index, limits[index % len(limits)], try_seed(params.seed, index)


@dataclass(frozen=True)
class TryResult:
    index: int
    degree_limit: int
    seed: int
    status: str  # SolveStatus value or "structural"
    conclusive: bool
    seconds: float
    var_count: int = 0
    clause_count: int = 0
    config: RuntimeConfig | None = None
    reason: str = ""

    def to_document(self) -> dict[str, Any]:
        doc = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "config"}
        doc["config"] = to_document(self.config) if self.config is not None else None
        return doc

    @classmethod
    def from_document(cls, doc: dict[str, Any]) -> "TryResult":
        fields = dict(doc)
        config = fields.pop("config", None)
        if config is not None:
            config = load_artifact(dump_json(config), "config")
        return cls(config=config, **fields)


@dataclass
class CompileStats:
    tries: list[TryResult] = field(default_factory=list)
    seconds: float = 0.0
    reason: str = ""

    def to_document(self) -> dict[str, Any]:
        return {
            "seconds": round(self.seconds, 6),
            "reason": self.reason,
            "tries": [
                {k: v for k, v in t.to_document().items() if k != "config"} for t in self.tries
            ],
        }


@dataclass(frozen=True)
class CompileResult:
    outcome: Outcome
    config: RuntimeConfig | None
    stats: CompileStats

    @property
    def feasible(self) -> bool:
        return self.outcome is Outcome.FEASIBLE


def run_try(
    program: ProtocolProgram,
    arch: PipelineArch,
    degree_limit: int,
    seed: int,
    index: int = 0,
    timeout: float | None = None,
    heuristic: Heuristic = Heuristic.VSIDS,
    depth_pruning: bool = True,
    cancel: _Cancel | None = None,
) -> TryResult:
    """One encode-and-solve attempt; ``program`` must already be normalized."""
    started = time.monotonic()
    view = restrict(arch, degree_limit, seed)
    conclusive = view.dropped_edges == 0
    try:
        cnf = encode(program, arch, view, depth_pruning=depth_pruning)
    except EncodeError as exc:
        return TryResult(index, degree_limit, seed, "structural", conclusive, time.monotonic() - started, reason=str(exc))
    stop = cancel.is_set if cancel is not None else None
    result = CdclSolver(cnf.var_count, cnf.clauses, heuristic).solve(timeout, stop)
    config = None
    if result.status is SolveStatus.SAT:
        config = extract_config(result.assignment, cnf.litmap, arch, cnf.program)
    return TryResult(
        index,
        degree_limit,
        seed,
        str(result.status),
        conclusive,
        time.monotonic() - started,
        cnf.var_count,
        len(cnf.clauses),
        config,
    )


def _log_try(result: TryResult) -> None:
    logger.info(
        "try %d: degree limit %d, seed %#018x -> %s (%d vars, %d clauses, %.2fs)",
        result.index,
        result.degree_limit,
        result.seed,
        result.status,
        result.var_count,
        result.clause_count,
        result.seconds,
    )


def try_verdict(result: TryResult) -> Outcome | None:
    if result.status == SolveStatus.SAT:
        return Outcome.FEASIBLE
    if result.conclusive and result.status in (SolveStatus.UNSAT, "structural"):
        return Outcome.INFEASIBLE
    return None


def _check_monotone(program: ProtocolProgram, arch: PipelineArch, result: TryResult, params: SearchParams) -> None:
    if result.conclusive:
        return
    full = run_try(program, arch, 0, result.seed, result.index, None, params.heuristic, params.depth_pruning)
    if full.status != SolveStatus.SAT:
        raise InconsistentAssignmentError(
            f"try {result.index} is satisfiable under degree limit {result.degree_limit} but the unrestricted instance is {full.status}"
        )


def _remaining(deadline: float | None) -> float | None:
    return None if deadline is None else deadline - time.monotonic()


def _try_timeout(params: SearchParams, deadline: float | None) -> float | None:
    left = _remaining(deadline)
    if left is None:
        return params.per_try_timeout
    if params.per_try_timeout is None:
        return left
    return min(params.per_try_timeout, left)


def _sequential(
    program: ProtocolProgram, arch: PipelineArch, params: SearchParams, deadline: float | None, stats: CompileStats
) -> TryResult | None:
    for index, limit, seed in try_schedule(params):
        left = _remaining(deadline)
        if left is not None and left <= 0:
            break
        result = run_try(
            program, arch, limit, seed, index, _try_timeout(params, deadline), params.heuristic, params.depth_pruning
        )
        _log_try(result)
        stats.tries.append(result)
        if try_verdict(result) is not None:
            return result
    return None


def _parallel(
    program: ProtocolProgram, arch: PipelineArch, params: SearchParams, deadline: float | None, stats: CompileStats
) -> TryResult | None:
    schedule = try_schedule(params)
    with Manager() as manager, ProcessPoolExecutor(max_workers=params.workers) as pool:
        cancel = manager.Event()
        pending: dict[Future, int] = {}

        def submit() -> bool:
            nxt = next(schedule, None)
            if nxt is None:
                return False
            index, limit, seed = nxt
            future = pool.submit(
                run_try,
                program,
                arch,
                limit,
                seed,
                index,
                _try_timeout(params, deadline),
                params.heuristic,
                params.depth_pruning,
                cancel,
            )
            pending[future] = index
            return True

        for _ in range(params.workers):
            if not submit():
                break
        winner: TryResult | None = None
        while pending and winner is None:
            left = _remaining(deadline)
            if left is not None and left <= 0:
                break
            done, _ = wait(pending, timeout=left, return_when=FIRST_COMPLETED)
            for future in sorted(done, key=pending.__getitem__):
                pending.pop(future)
                result = future.result()
                _log_try(result)
                stats.tries.append(result)
                if winner is None and try_verdict(result) is not None:
                    winner = result
            if winner is None:
                while len(pending) < params.workers and submit():
                    pass
        cancel.set()
        for future in pending:
            future.cancel()
    return winner


def compile(program: ProtocolProgram, arch: PipelineArch, params: SearchParams | None = None) -> CompileResult:
    """Search for a runtime configuration of ``arch`` that realizes ``program``.

    The program is normalized to the architecture's prefix length first
    (``PrefixOverflowError`` if it parses more).
    """
    params = params or SearchParams()
    started = time.monotonic()
    program = normalize_program(program, arch.only(PipeKind.PACKET_IN).attrs["prefix_len"])
    deadline = started + params.total_timeout if params.total_timeout is not None else None
    stats = CompileStats()
    search = _sequential if params.workers == 1 else _parallel
    winner = search(program, arch, params, deadline, stats)
    stats.seconds = time.monotonic() - started

    if winner is None:
        stats.reason = "search budget exhausted"
        logger.info("compile: unknown after %d tries (%.2fs)", len(stats.tries), stats.seconds)
        return CompileResult(Outcome.UNKNOWN, None, stats)
    outcome = try_verdict(winner)
    if outcome is Outcome.FEASIBLE:
        if params.check_monotone:
            _check_monotone(program, arch, winner, params)
        stats.reason = f"try {winner.index} satisfiable"
    else:
        stats.reason = winner.reason or "unrestricted instance unsatisfiable"
    logger.info("compile: %s after %d tries (%.2fs)", outcome, len(stats.tries), stats.seconds)
    return CompileResult(outcome, winner.config, stats)


def enumerate_configs(
    program: ProtocolProgram,
    arch: PipelineArch,
    limit: int,
    timeout: float | None = None,
    heuristic: Heuristic = Heuristic.VSIDS,
) -> list[RuntimeConfig]:
    """Up to ``limit`` distinct configurations of the unrestricted instance.

    Each found model is blocked on its configuration literals (router picks,
    ALU ops, memory bindings and runtime constant matches) before solving again.
    """
    program = normalize_program(program, arch.only(PipeKind.PACKET_IN).attrs["prefix_len"])
    try:
        cnf = encode(program, arch)
    except EncodeError:
        return []
    projected = [
        var
        for var, lit in cnf.litmap
        if lit.kind is not LitKind.OUT or arch.nodes[lit.a.node].runtime_constant
    ]
    solver = CdclSolver(cnf.var_count, cnf.clauses, heuristic)
    found: list[RuntimeConfig] = []
    for _ in range(limit * 8):
        if len(found) >= limit:
            break
        result = solver.solve(timeout)
        if result.status is not SolveStatus.SAT:
            break
        config = extract_config(result.assignment, cnf.litmap, arch, cnf.program)
        if config not in found:
            found.append(config)
        block = [-v for v in projected if result.assignment[v]]
        if not block:
            break
        solver.add_clause(block)
    return found
