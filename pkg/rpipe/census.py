"""Node censuses and static resource estimates for programs and architectures."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from rpipe.ir.graph import weighted_depth
from rpipe.ir.nodes import (
    COMPUTE_KINDS,
    PipeKind,
    PipelineArch,
    ProtocolProgram,
    ProtoKind,
)
from rpipe.ir.widths import program_widths

CENSUS_COLUMNS = ("ALUs", "Consts", "Regs", "Slice", "Routers", "Edges")

_MEMORY_KINDS = frozenset(
    {ProtoKind.ARRAY_READ, ProtoKind.ARRAY_WRITE, ProtoKind.TABLE_LOOKUP, ProtoKind.TABLE_WRITE}
)


@dataclass(frozen=True)
class Census:
    columns: dict[str, int]
    kinds: dict[str, int]

    def row(self) -> list[int]:
        return [self.columns[c] for c in CENSUS_COLUMNS]


@dataclass(frozen=True)
class ProgramEstimate:
    """Lower bounds a pipeline must meet to host a program."""

    alu_count: int
    alu_depth: int
    stage_depth: int
    live_words: list[int] = field(default_factory=list)
    live_flags: list[int] = field(default_factory=list)

    @property
    def peak_live_words(self) -> int:
        return max(self.live_words, default=0)


def census(artifact: ProtocolProgram | PipelineArch) -> Census:
    kinds = Counter(str(n.kind) for n in artifact)
    edges = sum(len(n.inputs) for n in artifact)
    if isinstance(artifact, PipelineArch):
        columns = {
            "ALUs": kinds[PipeKind.ALU],
            "Consts": kinds[PipeKind.CONSTANT],
            "Regs": kinds[PipeKind.REGISTER],
            "Slice": kinds[PipeKind.SLICE],
            "Routers": kinds[PipeKind.ROUTER],
            "Edges": edges,
        }
    else:
        columns = {
            "ALUs": sum(kinds[k] for k in COMPUTE_KINDS),
            "Consts": kinds[ProtoKind.CONSTANT],
            "Regs": 0,
            "Slice": kinds[ProtoKind.SLICE],
            "Routers": 0,
            "Edges": edges,
        }
    return Census(columns, dict(sorted(kinds.items())))


def estimate_program(program: ProtocolProgram) -> ProgramEstimate:
    """ALU count, critical path depth and values live across each stage boundary.

    Stage depth counts ALU operations and memory accesses (each occupies a
    stage); a value produced at depth d and last read by a node of depth e is
    live across boundaries d .. e-1 (a stage reads the previous boundary).
    """
    nodes = program.nodes
    alu_depth = weighted_depth(nodes, lambda nid: int(nodes[nid].kind in COMPUTE_KINDS))

    def staged(nid: str) -> int:
        return int(nodes[nid].kind in COMPUTE_KINDS or nodes[nid].kind in _MEMORY_KINDS)

    depth = weighted_depth(nodes, staged)
    stages = max(depth.values(), default=0)
    widths = program_widths(program)

    last_read: dict[tuple[str, int], int] = {}
    for node in program:
        if node.kind is ProtoKind.PACKET_OUT:
            at = stages
        else:
            at = depth[node.id] - staged(node.id)
        for src in node.inputs:
            last_read[src] = max(last_read.get(src, 0), at)

    words = [0] * (stages + 1)
    flags = [0] * (stages + 1)
    for (nid, port), until in last_read.items():
        kind = nodes[nid].kind
        if kind is ProtoKind.CONSTANT or (kind is ProtoKind.PACKET_IN and port == 0):
            continue
        tally = flags if widths[(nid, port)] == 1 else words
        for boundary in range(depth[nid], until):
            tally[boundary] += 1
    return ProgramEstimate(
        alu_count=sum(1 for n in program if n.kind in COMPUTE_KINDS),
        alu_depth=max(alu_depth.values(), default=0),
        stage_depth=stages,
        live_words=words,
        live_flags=flags,
    )
