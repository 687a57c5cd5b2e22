"""Compilation of protocol programs onto pipeline architectures through SAT."""

from rpipe.compiler.dimacs import dimacs_sidecar, export_dimacs, parse_dimacs
from rpipe.compiler.encode import CnfInstance, LitKind, Literal, LitMap, encode
from rpipe.compiler.extract import extract_config
from rpipe.compiler.restrict import EdgeView, full_view, restrict
from rpipe.compiler.search import (
    CompileResult,
    CompileStats,
    Outcome,
    SearchParams,
    TryResult,
    compile,
    enumerate_configs,
    run_try,
    try_schedule,
    try_seed,
    try_verdict,
)
from rpipe.compiler.solver import Assignment, CdclSolver, Heuristic, SolveResult, SolveStatus, solve
from rpipe.compiler.static_check import MatchContext, static_check

__all__ = [
    "Assignment",
    "CdclSolver",
    "CnfInstance",
    "CompileResult",
    "CompileStats",
    "EdgeView",
    "Heuristic",
    "LitKind",
    "LitMap",
    "Literal",
    "MatchContext",
    "Outcome",
    "SearchParams",
    "SolveResult",
    "SolveStatus",
    "TryResult",
    "compile",
    "dimacs_sidecar",
    "encode",
    "enumerate_configs",
    "export_dimacs",
    "extract_config",
    "full_view",
    "parse_dimacs",
    "restrict",
    "run_try",
    "solve",
    "static_check",
    "try_schedule",
    "try_seed",
    "try_verdict",
]
