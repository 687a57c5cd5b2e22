"""Functional executors for protocol programs and configured pipelines.

Both executors evaluate their graph once per packet in topological order.
Memory reads see the state as it was before the packet; enabled writes are
collected and committed afterwards in ascending node id order, so the write
with the larger id wins an index collision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from rpipe.errors import ConfigError
from rpipe.ir.config import RuntimeConfig, check_config
from rpipe.ir.graph import topo_order
from rpipe.ir.nodes import (
    UNARY_OPS,
    Opcode,
    PipeKind,
    PipelineArch,
    PipeNode,
    Port,
    ProtocolProgram,
    ProtoKind,
    ProtoNode,
    alu_operand_slots,
)
from rpipe.ir.widths import arch_widths, program_widths
from rpipe.sim.ops import eval_op, extend_bits, merge_bits, slice_bits
from rpipe.sim.packet import Packet, PacketResult, deparse
from rpipe.sim.state import StateStore


@dataclass(frozen=True)
class _Write:
    node: str
    memory: str
    index: int
    value: int
    table: bool


@dataclass
class Evaluation:
    """Everything one packet produced: verdict, every value, pending writes."""

    result: PacketResult
    values: dict[Port, int]
    writes: list[_Write]


def _convert(kind: str, attrs: dict, ins: Sequence[int], in_widths: Sequence[int]) -> int:
    match kind:
        case "Slice":
            return slice_bits(ins[0], attrs["offset"], attrs["width"])
        case "Merge":
            return merge_bits(ins, in_widths)
        case "Extend":
            return extend_bits(ins[0], in_widths[0], attrs["width"], attrs.get("signed", False))
    raise ValueError(kind)


def _lookup(state: StateStore, memory: str, key: int, idx_width: int) -> int:
    valid, index = state.cams[memory].lookup(key, state.hash_seed)
    return (1 << idx_width) | index if valid else 0


def _plan_table_write(
    state: StateStore, node: str, memory: str, ins: Sequence[int], idx_width: int, writes: list[_Write]
) -> int:
    enabled = ins[2] if len(ins) > 2 else 1
    if not enabled:
        return 0
    valid, index = state.cams[memory].place(ins[0], state.hash_seed)
    if not valid:
        return 0
    writes.append(_Write(node, memory, index, ins[0], table=True))
    return (1 << idx_width) | index


def _plan_array_write(
    state: StateStore, node: str, memory: str, ins: Sequence[int], writes: list[_Write]
) -> None:
    enabled = ins[2] if len(ins) > 2 else 1
    if enabled and ins[0] < len(state.arrays[memory]):
        writes.append(_Write(node, memory, ins[0], ins[1], table=False))


def _read(state: StateStore, memory: str, index: int) -> int:
    cells = state.arrays[memory]
    return cells[index] if index < len(cells) else 0


def commit(state: StateStore, writes: Sequence[_Write]) -> StateStore:
    """Apply pending writes to a copy of ``state``."""
    out = state.copy()
    for write in sorted(writes, key=lambda w: w.node):
        if write.table:
            out.cams[write.memory].store(write.index, write.value)
        else:
            out.arrays[write.memory][write.index] = write.value
    return out


class ProtocolExecutor:
    """Reference semantics of a protocol program."""

    def __init__(self, program: ProtocolProgram) -> None:
        self.program = program
        self.order = topo_order(program.nodes)
        self.widths = program_widths(program)

    def evaluate(self, state: StateStore, packet: Packet) -> Evaluation:
        program, widths = self.program, self.widths
        values: dict[Port, int] = {}
        writes: list[_Write] = []
        result = PacketResult(None)
        for nid in self.order:
            node: ProtoNode = program.nodes[nid]
            ins = [values[p] for p in node.inputs]
            attrs = node.attrs
            out: int | None = None
            match node.kind:
                case ProtoKind.CONSTANT:
                    out = attrs["value"]
                case ProtoKind.SLICE | ProtoKind.MERGE | ProtoKind.EXTEND:
                    out = _convert(node.kind, attrs, ins, [widths[p] for p in node.inputs])
                case ProtoKind.UNARY | ProtoKind.BINARY:
                    out = eval_op(node.op, ins, widths[node.inputs[0]])
                case ProtoKind.CONDITIONAL:
                    out = eval_op(Opcode.MUX, ins, widths[node.inputs[1]])
                case ProtoKind.PACKET_IN:
                    values[Port(nid, 0)] = packet.prefix(attrs["prefix_len"])
                    values[Port(nid, 1)] = packet.length_field()
                case ProtoKind.PACKET_OUT:
                    result = deparse(packet, attrs["prefix_len"], ins[0], ins[1], ins[2])
                case ProtoKind.ARRAY_READ:
                    out = _read(state, attrs["array"], ins[0])
                case ProtoKind.ARRAY_WRITE:
                    _plan_array_write(state, nid, attrs["array"], ins, writes)
                case ProtoKind.TABLE_LOOKUP:
                    out = _lookup(state, attrs["table"], ins[0], program.tables[attrs["table"]].idx_width)
                case ProtoKind.TABLE_WRITE:
                    out = _plan_table_write(
                        state, nid, attrs["table"], ins, program.tables[attrs["table"]].idx_width, writes
                    )
            if out is not None:
                values[Port(nid, 0)] = out
        return Evaluation(result, values, writes)

    def run(self, state: StateStore, packet: Packet) -> tuple[PacketResult, StateStore]:
        evaluation = self.evaluate(state, packet)
        return evaluation.result, commit(state, evaluation.writes)


class PipelineExecutor:
    """Semantics of an architecture under one runtime configuration."""

    def __init__(self, arch: PipelineArch, config: RuntimeConfig) -> None:
        check_config(config, arch)
        self.arch = arch
        self.config = config
        self.order = topo_order(arch.nodes)
        self.widths = arch_widths(arch)
        self.bound = set(config.mem_bind.values())
        self.live = self._live_nodes()

    def _used_inputs(self, node: PipeNode) -> list[Port]:
        if node.kind is PipeKind.ROUTER:
            return [node.inputs[self.config.select(node.id)]] if node.inputs else []
        if node.kind is PipeKind.ALU:
            op = self.config.alu_op.get(node.id, node.ops[0])
            if op is Opcode.MUX:
                return list(node.inputs[:3])
            slots = alu_operand_slots(node)
            return [node.inputs[s] for s in (slots[:1] if op in UNARY_OPS else slots)]
        return list(node.inputs)

    def _memory(self, node: PipeNode) -> str | None:
        if node.kind is PipeKind.RAM_ACCESS:
            return node.attrs["ram"]
        if node.kind is PipeKind.CAM_ACCESS:
            return node.attrs["cam"]
        return None

    def _constant(self, port: Port) -> int | None:
        """Value of ``port`` when it is a constant seen through routers and registers."""
        node = self.arch.nodes[port.node]
        while node.kind in (PipeKind.ROUTER, PipeKind.REGISTER) and node.inputs:
            upstream = node.inputs[self.config.select(node.id)] if node.kind is PipeKind.ROUTER else node.inputs[0]
            node = self.arch.nodes[upstream.node]
        if node.kind is not PipeKind.CONSTANT:
            return None
        value = node.attrs["value"]
        return self.config.const_value.get(node.id, 0) if value is None else value

    def _live_nodes(self) -> set[str]:
        """Nodes feeding the deparser or a non-idle write to a bound memory under this configuration."""
        stack = [n.id for n in self.arch.of_kind(PipeKind.PACKET_OUT)]
        for n in self.arch.nodes.values():
            if not n.is_write or self._memory(n) not in self.bound:
                continue
            idle = len(n.inputs) > 2 and self._constant(n.inputs[2]) == 0
            stack.extend([n.inputs[2].node] if idle else [n.id])
        live: set[str] = set()
        while stack:
            nid = stack.pop()
            if nid in live:
                continue
            live.add(nid)
            stack.extend(p.node for p in self._used_inputs(self.arch.nodes[nid]))
        return live

    def _alu(self, node: PipeNode, ins: Sequence[int]) -> int:
        op = self.config.alu_op.get(node.id, node.ops[0])
        width = node.attrs["width"]
        if op is Opcode.MUX:
            return eval_op(op, ins[:3], width)
        slots = alu_operand_slots(node)
        operands = [ins[s] for s in slots]
        if op in UNARY_OPS:
            operands = operands[:1]
        return eval_op(op, operands, width)

    def _require(self, nid: str, memory: str) -> bool:
        """Whether ``memory`` is bound; an unbound memory may only be reached by dead nodes."""
        if memory in self.bound:
            return True
        if nid in self.live:
            raise ConfigError(f"{nid!r} accesses unbound memory {memory!r}")
        return False

    def evaluate(self, state: StateStore, packet: Packet) -> Evaluation:
        arch, config, widths = self.arch, self.config, self.widths
        values: dict[Port, int] = {}
        writes: list[_Write] = []
        result = PacketResult(None)
        for nid in self.order:
            node: PipeNode = arch.nodes[nid]
            ins = [values[p] for p in node.inputs]
            attrs = node.attrs
            out: int | None = None
            match node.kind:
                case PipeKind.REGISTER:
                    out = ins[0]
                case PipeKind.ROUTER:
                    out = ins[config.select(nid)]
                case PipeKind.CONSTANT:
                    value = attrs["value"]
                    out = config.const_value.get(nid, 0) if value is None else value
                case PipeKind.SLICE | PipeKind.MERGE | PipeKind.EXTEND:
                    out = _convert(node.kind, attrs, ins, [widths[p] for p in node.inputs])
                case PipeKind.ALU:
                    out = self._alu(node, ins)
                case PipeKind.PACKET_IN:
                    values[Port(nid, 0)] = packet.prefix(attrs["prefix_len"])
                    values[Port(nid, 1)] = packet.length_field()
                case PipeKind.PACKET_OUT:
                    result = deparse(packet, attrs["prefix_len"], ins[0], ins[1], ins[2])
                case PipeKind.RAM_ACCESS:
                    ram = attrs["ram"]
                    if not self._require(nid, ram):
                        out = None if node.is_write else 0
                    elif node.is_write:
                        _plan_array_write(state, nid, ram, ins, writes)
                    else:
                        out = _read(state, ram, ins[0])
                case PipeKind.CAM_ACCESS:
                    cam = attrs["cam"]
                    idx_width = arch.cams[cam].idx_width
                    if not self._require(nid, cam):
                        out = 0
                    elif node.is_write:
                        out = _plan_table_write(state, nid, cam, ins, idx_width, writes)
                    else:
                        out = _lookup(state, cam, ins[0], idx_width)
            if out is not None:
                values[Port(nid, 0)] = out
        return Evaluation(result, values, writes)

    def run(self, state: StateStore, packet: Packet) -> tuple[PacketResult, StateStore]:
        evaluation = self.evaluate(state, packet)
        return evaluation.result, commit(state, evaluation.writes)


def run_protocol(
    program: ProtocolProgram, state: StateStore, packet: Packet | bytes
) -> tuple[PacketResult, StateStore]:
    packet = packet if isinstance(packet, Packet) else Packet(packet)
    return ProtocolExecutor(program).run(state, packet)


def run_pipeline(
    arch: PipelineArch, config: RuntimeConfig, state: StateStore, packet: Packet | bytes
) -> tuple[PacketResult, StateStore]:
    packet = packet if isinstance(packet, Packet) else Packet(packet)
    return PipelineExecutor(arch, config).run(state, packet)
