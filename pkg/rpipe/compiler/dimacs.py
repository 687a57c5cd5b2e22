"""DIMACS CNF export for running instances through external solvers."""

from __future__ import annotations

import re

from rpipe.compiler.encode import CnfInstance
from rpipe.errors import ArtifactSyntaxError
from rpipe.ir.serialize import dump_json

_HEADER = re.compile(r"p\s+cnf\s+(\d+)\s+(\d+)\s*$")


def export_dimacs(cnf: CnfInstance) -> bytes:
    lines = [f"p cnf {cnf.var_count} {len(cnf.clauses)}"]
    lines.extend(" ".join(map(str, clause)) + " 0" for clause in cnf.clauses)
    return ("\n".join(lines) + "\n").encode("ascii")


def dimacs_sidecar(cnf: CnfInstance) -> bytes:
    """JSON object mapping variable numbers to literal names."""
    return dump_json({str(var): name for var, name in cnf.litmap.names().items()})


def parse_dimacs(text: str) -> tuple[int, list[list[int]]]:
    header = None
    clauses: list[list[int]] = []
    pending: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if header is None:
            header = _HEADER.match(line)
            if header is None:
                raise ArtifactSyntaxError(f"expected 'p cnf' header, got {line!r}", lineno, 1)
            continue
        try:
            pending.extend(int(tok) for tok in line.split())
        except ValueError:
            raise ArtifactSyntaxError(f"bad literal in {line!r}", lineno, 1) from None
        while 0 in pending:
            end = pending.index(0)
            clauses.append(pending[:end])
            pending = pending[end + 1 :]
    if header is None:
        raise ArtifactSyntaxError("missing 'p cnf' header", 1, 1)
    num_vars, num_clauses = (int(x) for x in header.groups())
    if pending or len(clauses) != num_clauses:
        raise ArtifactSyntaxError(f"header announces {num_clauses} clauses, found {len(clauses)}", 1, 1)
    if any(abs(x) > num_vars for c in clauses for x in c):
        raise ArtifactSyntaxError(f"literal outside 1..{num_vars}", 1, 1)
    return num_vars, clauses
