"""Which hardware values can possibly carry which program values.

A value is a ``Port``. Nodes without outputs (PacketOut, writes) take part
through port 0, which then stands for "h realizes l".
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from rpipe.compiler.restrict import EdgeView, full_view
from rpipe.ir.graph import weighted_depth
from rpipe.ir.nodes import (
    COMPUTE_KINDS,
    PipeKind,
    PipelineArch,
    PipeNode,
    Port,
    ProtocolProgram,
    ProtoKind,
    ProtoNode,
)
from rpipe.ir.widths import arch_widths, program_widths

# program kinds a hardware kind may realize (Register/Router carry anything)
_REALIZES: dict[PipeKind, frozenset[ProtoKind]] = {
    PipeKind.CONSTANT: frozenset({ProtoKind.CONSTANT}),
    PipeKind.SLICE: frozenset({ProtoKind.SLICE}),
    PipeKind.MERGE: frozenset({ProtoKind.MERGE}),
    PipeKind.EXTEND: frozenset({ProtoKind.EXTEND}),
    PipeKind.ALU: COMPUTE_KINDS,
    PipeKind.PACKET_IN: frozenset({ProtoKind.PACKET_IN}),
    PipeKind.PACKET_OUT: frozenset({ProtoKind.PACKET_OUT}),
    PipeKind.RAM_ACCESS: frozenset({ProtoKind.ARRAY_READ, ProtoKind.ARRAY_WRITE}),
    PipeKind.CAM_ACCESS: frozenset({ProtoKind.TABLE_LOOKUP, ProtoKind.TABLE_WRITE}),
}


def value_ports(node: ProtoNode | PipeNode) -> range:
    return range(max(1, node.output_ports))


@dataclass
class MatchContext:
    """Everything compatibility needs, computed once per (program, view)."""

    program: ProtocolProgram
    arch: PipelineArch
    program_widths: dict[Port, int]
    arch_widths: dict[Port, int]
    compute_depth: dict[str, int]
    alu_reach: dict[str, int] | None = None
    _by_kind: dict[ProtoKind, list[ProtoNode]] = field(default_factory=dict, repr=False)
    _by_width: dict[int, list[Port]] = field(default_factory=dict, repr=False)

    @classmethod
    def build(
        cls,
        program: ProtocolProgram,
        arch: PipelineArch,
        view: EdgeView | None = None,
        depth_pruning: bool = True,
    ) -> "MatchContext":
        view = view or full_view(arch)
        compute_depth = weighted_depth(program.nodes, lambda nid: int(program.nodes[nid].kind in COMPUTE_KINDS))
        alu_reach = None
        if depth_pruning:
            restricted = view.nodes()
            alu_reach = weighted_depth(restricted, lambda nid: int(restricted[nid].kind is PipeKind.ALU))
        ctx = cls(program, arch, program_widths(program), arch_widths(arch), compute_depth, alu_reach)
        by_kind: dict[ProtoKind, list[ProtoNode]] = defaultdict(list)
        by_width: dict[int, list[Port]] = defaultdict(list)
        for node in sorted(program, key=lambda n: n.id):
            by_kind[node.kind].append(node)
            for port in range(node.output_ports):
                by_width[ctx.program_widths[Port(node.id, port)]].append(Port(node.id, port))
        ctx._by_kind, ctx._by_width = dict(by_kind), dict(by_width)
        return ctx

    def static_check(self, h: PipeNode, l: ProtoNode) -> bool:
        return static_check(h, l, self)

    def candidates(self, h: PipeNode, port: int) -> Iterable[Port]:
        """Program values worth testing against one hardware value."""
        if h.kind in (PipeKind.REGISTER, PipeKind.ROUTER):
            return self._by_width.get(self.arch_widths[Port(h.id, port)], ())
        if h.kind is PipeKind.PACKET_IN:
            return [Port(n.id, port) for n in self._by_kind.get(ProtoKind.PACKET_IN, ())]
        return [Port(n.id, 0) for kind in sorted(_REALIZES[h.kind]) for n in self._by_kind.get(kind, ())]

    def compatible(self, hv: Port, lv: Port) -> bool:
        h, l = self.arch.nodes[hv.node], self.program.nodes[lv.node]
        if self.alu_reach is not None and self.compute_depth[l.id] > self.alu_reach[h.id]:
            return False
        if self.arch_widths.get(hv) != self.program_widths.get(lv):
            return False
        if h.kind is PipeKind.PACKET_IN and hv.port != lv.port:
            return False
        return self._kind_compatible(h, l)

    def _in_widths(self, node: ProtoNode) -> list[int]:
        return [self.program_widths[p] for p in node.inputs]

    def _hw_in_widths(self, node: PipeNode) -> list[int]:
        return [self.arch_widths[p] for p in node.inputs]

    def _kind_compatible(self, h: PipeNode, l: ProtoNode) -> bool:
        if h.kind in (PipeKind.REGISTER, PipeKind.ROUTER):
            return l.output_ports > 0
        if l.kind not in _REALIZES[h.kind]:
            return False
        attrs, want = h.attrs, l.attrs
        match h.kind:
            case PipeKind.CONSTANT:
                return h.runtime_constant or attrs["value"] == want["value"]
            case PipeKind.ALU:
                if l.op not in h.ops:
                    return False
                operands = self._in_widths(l)
                if l.kind is ProtoKind.CONDITIONAL:
                    operands = operands[1:]
                return all(w == attrs["width"] for w in operands)
            case PipeKind.SLICE:
                return (
                    (attrs["offset"], attrs["width"]) == (want["offset"], want["width"])
                    and self._hw_in_widths(h) == self._in_widths(l)
                )
            case PipeKind.MERGE:
                return self._hw_in_widths(h) == self._in_widths(l)
            case PipeKind.EXTEND:
                return (
                    (attrs["width"], attrs["signed"]) == (want["width"], want["signed"])
                    and self._hw_in_widths(h) == self._in_widths(l)
                )
            case PipeKind.PACKET_IN | PipeKind.PACKET_OUT:
                return attrs["prefix_len"] == want["prefix_len"]
            case PipeKind.RAM_ACCESS:
                if h.is_write != (l.kind is ProtoKind.ARRAY_WRITE):
                    return False
                return array_fits(self.program, l.attrs["array"], self.arch, attrs["ram"])
            case PipeKind.CAM_ACCESS:
                if h.is_write != (l.kind is ProtoKind.TABLE_WRITE):
                    return False
                return table_fits(self.program, l.attrs["table"], self.arch, attrs["cam"])
        return False


def array_fits(program: ProtocolProgram, array_id: str, arch: PipelineArch, ram_id: str) -> bool:
    decl, ram = program.arrays[array_id], arch.rams[ram_id]
    return (decl.elem_width, decl.num_elems) == (ram.elem_width, ram.num_elems)


def table_fits(program: ProtocolProgram, table_id: str, arch: PipelineArch, cam_id: str) -> bool:
    decl, cam = program.tables[table_id], arch.cams[cam_id]
    return (decl.key_width, decl.num_entries) == (cam.key_width, cam.num_entries)


def bind_candidates(program: ProtocolProgram, arch: PipelineArch) -> Mapping[str, list[str]]:
    """Dimension-compatible memories for every declared array and table."""
    found: dict[str, list[str]] = {}
    for aid in sorted(program.arrays):
        found[aid] = [r for r in sorted(arch.rams) if array_fits(program, aid, arch, r)]
    for tid in sorted(program.tables):
        found[tid] = [c for c in sorted(arch.cams) if table_fits(program, tid, arch, c)]
    return found


def static_check(h: PipeNode, l: ProtoNode, context: MatchContext) -> bool:
    """True iff some output of ``h`` can carry the matching output of ``l``.

    Widths live on edges, so the check needs the graphs both nodes belong
    to; ``context`` carries them (``context.static_check(h, l)`` reads the
    same).
    """
    if h.kind is PipeKind.PACKET_IN:
        return any(context.compatible(Port(h.id, p), Port(l.id, p)) for p in value_ports(l))
    return context.compatible(Port(h.id, 0), Port(l.id, 0))
