"""Bit-width typing rules for both graph kinds.

Every edge carries the width of the producing output. The per-node rules
return the output widths of a node given its input widths, or raise
``TypingViolation`` naming the broken rule.
"""

from __future__ import annotations

from typing import Sequence

from rpipe.ir.graph import topo_order
from rpipe.ir.nodes import (
    BINARY_OPS,
    CMD_WIDTH,
    COMPARE_OPS,
    LENGTH_WIDTH,
    MAX_WIDTH,
    UNARY_OPS,
    Opcode,
    PipeKind,
    PipelineArch,
    PipeNode,
    Port,
    ProtocolProgram,
    ProtoKind,
    ProtoNode,
    alu_arity,
    alu_output_width,
)


class TypingViolation(Exception):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code
        self.message = message


def _check_width(value: object, what: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= MAX_WIDTH:
        raise TypingViolation("bad-width", f"{what} must be a width in 1..{MAX_WIDTH}, got {value!r}")
    return value


def _expect(actual: int, expected: int, what: str) -> None:
    if actual != expected:
        raise TypingViolation("width mismatch", f"width mismatch: {what} is {actual} bits, expected {expected}")


def _constant(attrs: dict, optional_value: bool) -> tuple[int]:
    width = _check_width(attrs.get("width"), "constant width")
    value = attrs.get("value")
    if value is None and optional_value:
        return (width,)
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < (1 << width):
        raise TypingViolation("bad-constant", f"constant value {value!r} does not fit {width} bits")
    return (width,)


def _slice(attrs: dict, ins: Sequence[int]) -> tuple[int]:
    width = _check_width(attrs.get("width"), "slice width")
    offset = attrs.get("offset")
    if not isinstance(offset, int) or offset < 0:
        raise TypingViolation("bad-attr", f"slice offset must be >= 0, got {offset!r}")
    if offset + width > ins[0]:
        raise TypingViolation("width mismatch", f"width mismatch: slice [{offset}+{width}] exceeds input width {ins[0]}")
    return (width,)


def _merge(ins: Sequence[int]) -> tuple[int]:
    return (_check_width(sum(ins), "merge result"),)


def _extend(attrs: dict, ins: Sequence[int]) -> tuple[int]:
    width = _check_width(attrs.get("width"), "extend width")
    if width <= ins[0]:
        raise TypingViolation("width mismatch", f"width mismatch: extend to {width} from {ins[0]} does not widen")
    return (width,)


def _packet_in(attrs: dict) -> tuple[int, int]:
    prefix_len = attrs.get("prefix_len")
    if not isinstance(prefix_len, int) or prefix_len < 1:
        raise TypingViolation("bad-attr", f"prefix_len must be >= 1, got {prefix_len!r}")
    return (_check_width(prefix_len * 8, "prefix"), LENGTH_WIDTH)


def _packet_out(attrs: dict, ins: Sequence[int]) -> tuple[()]:
    prefix_width = _packet_in(attrs)[0]
    _expect(ins[0], CMD_WIDTH, "cmd")
    _expect(ins[1], prefix_width, "prefix")
    _expect(ins[2], LENGTH_WIDTH, "length")
    return ()


def proto_arity_ok(kind: ProtoKind, count: int) -> bool:
    if kind is ProtoKind.MERGE:
        return count >= 2
    if kind in (ProtoKind.ARRAY_WRITE, ProtoKind.TABLE_WRITE):
        # enable may be omitted before normalization
        return count in (2, 3)
    return count == PROTO_ARITY[kind]


PROTO_ARITY = {
    ProtoKind.CONSTANT: 0,
    ProtoKind.PACKET_IN: 0,
    ProtoKind.SLICE: 1,
    ProtoKind.EXTEND: 1,
    ProtoKind.UNARY: 1,
    ProtoKind.ARRAY_READ: 1,
    ProtoKind.TABLE_LOOKUP: 1,
    ProtoKind.BINARY: 2,
    ProtoKind.CONDITIONAL: 3,
    ProtoKind.ARRAY_WRITE: 3,
    ProtoKind.TABLE_WRITE: 3,
    ProtoKind.PACKET_OUT: 3,
}


def proto_node_widths(node: ProtoNode, ins: Sequence[int], program: ProtocolProgram) -> tuple[int, ...]:
    kind, attrs = node.kind, node.attrs
    match kind:
        case ProtoKind.CONSTANT:
            return _constant(attrs, optional_value=False)
        case ProtoKind.SLICE:
            return _slice(attrs, ins)
        case ProtoKind.MERGE:
            return _merge(ins)
        case ProtoKind.EXTEND:
            return _extend(attrs, ins)
        case ProtoKind.UNARY:
            if attrs.get("op") not in UNARY_OPS:
                raise TypingViolation("bad-opcode", f"{attrs.get('op')!r} is not a unary opcode")
            return (ins[0],)
        case ProtoKind.BINARY:
            if attrs.get("op") not in BINARY_OPS:
                raise TypingViolation("bad-opcode", f"{attrs.get('op')!r} is not a binary opcode")
            _expect(ins[1], ins[0], "right operand")
            return (1,) if Opcode(attrs["op"]) in COMPARE_OPS else (ins[0],)
        case ProtoKind.CONDITIONAL:
            _expect(ins[0], 1, "condition")
            _expect(ins[2], ins[1], "f-value")
            return (ins[1],)
        case ProtoKind.PACKET_IN:
            return _packet_in(attrs)
        case ProtoKind.PACKET_OUT:
            return _packet_out(attrs, ins)
        case ProtoKind.ARRAY_READ | ProtoKind.ARRAY_WRITE:
            decl = program.arrays.get(attrs.get("array"))
            if decl is None:
                raise TypingViolation("undeclared array", f"undeclared array {attrs.get('array')!r}")
            _expect(ins[0], decl.index_width, "array index")
            if kind is ProtoKind.ARRAY_READ:
                return (decl.elem_width,)
            _expect(ins[1], decl.elem_width, "array value")
            if len(ins) == 3:
                _expect(ins[2], 1, "enable")
            return ()
        case ProtoKind.TABLE_LOOKUP | ProtoKind.TABLE_WRITE:
            decl = program.tables.get(attrs.get("table"))
            if decl is None:
                raise TypingViolation("undeclared table", f"undeclared table {attrs.get('table')!r}")
            _expect(ins[0], decl.key_width, "table key")
            if kind is ProtoKind.TABLE_WRITE:
                _expect(ins[1], decl.idx_width, "index hint")
                if len(ins) == 3:
                    _expect(ins[2], 1, "enable")
            return (decl.result_width,)
    raise TypingViolation("unknown-kind", f"unknown node kind {kind!r}")


def pipe_arity_ok(node: PipeNode, arch: PipelineArch) -> bool:
    count = len(node.inputs)
    match node.kind:
        case PipeKind.CONSTANT | PipeKind.PACKET_IN:
            return count == 0
        case PipeKind.REGISTER | PipeKind.SLICE | PipeKind.EXTEND:
            return count == 1
        case PipeKind.ROUTER:
            return count >= 1
        case PipeKind.MERGE:
            return count >= 2
        case PipeKind.ALU:
            return count == alu_arity(node.ops)
        case PipeKind.PACKET_OUT:
            return count == 3
        case PipeKind.RAM_ACCESS:
            return count == (3 if node.is_write else 1)
        case PipeKind.CAM_ACCESS:
            return count == (3 if node.is_write else 1)
    return False


def pipe_node_widths(node: PipeNode, ins: Sequence[int], arch: PipelineArch) -> tuple[int, ...]:
    kind, attrs = node.kind, node.attrs
    match kind:
        case PipeKind.REGISTER:
            width = _check_width(attrs.get("width"), "register width")
            _expect(ins[0], width, "register input")
            return (width,)
        case PipeKind.ROUTER:
            for ordinal, w in enumerate(ins[1:], start=1):
                _expect(w, ins[0], f"router input {ordinal}")
            return (ins[0],)
        case PipeKind.CONSTANT:
            return _constant(attrs, optional_value=True)
        case PipeKind.SLICE:
            return _slice(attrs, ins)
        case PipeKind.MERGE:
            return _merge(ins)
        case PipeKind.EXTEND:
            return _extend(attrs, ins)
        case PipeKind.ALU:
            return _alu(node, ins)
        case PipeKind.PACKET_IN:
            return _packet_in(attrs)
        case PipeKind.PACKET_OUT:
            return _packet_out(attrs, ins)
        case PipeKind.RAM_ACCESS:
            ram = arch.rams.get(attrs.get("ram"))
            if ram is None:
                raise TypingViolation("undeclared ram", f"undeclared RAM {attrs.get('ram')!r}")
            _expect(ins[0], ram.index_width, "RAM index")
            if not node.is_write:
                return (ram.elem_width,)
            _expect(ins[1], ram.elem_width, "RAM value")
            _expect(ins[2], 1, "enable")
            return ()
        case PipeKind.CAM_ACCESS:
            cam = arch.cams.get(attrs.get("cam"))
            if cam is None:
                raise TypingViolation("undeclared cam", f"undeclared CAM {attrs.get('cam')!r}")
            _expect(ins[0], cam.key_width, "CAM key")
            if node.is_write:
                _expect(ins[1], cam.idx_width, "index hint")
                _expect(ins[2], 1, "enable")
            return (cam.result_width,)
    raise TypingViolation("unknown-kind", f"unknown node kind {kind!r}")


def _alu(node: PipeNode, ins: Sequence[int]) -> tuple[int]:
    width = _check_width(node.attrs.get("width"), "ALU width")
    try:
        ops = node.ops
    except ValueError as exc:
        raise TypingViolation("bad-opcode", str(exc)) from None
    if not ops:
        raise TypingViolation("bad-opcode", "ALU supports no operations")
    if len(set(ops)) != len(ops):
        raise TypingViolation("bad-opcode", "ALU op list has duplicates")
    latency = node.attrs.get("latency", 1)
    if not isinstance(latency, int) or latency < 1:
        raise TypingViolation("bad-attr", f"ALU latency must be >= 1, got {latency!r}")
    compares = set(ops) & COMPARE_OPS
    if compares and set(ops) - COMPARE_OPS:
        raise TypingViolation("mixed-results", "ALU mixes comparison and word-result operations")
    operands = ins
    if Opcode.MUX in ops:
        _expect(ins[0], 1, "ALU condition")
        operands = ins[1:]
    for ordinal, w in enumerate(operands):
        _expect(w, width, f"ALU operand {ordinal}")
    return (alu_output_width(width, ops),)


def program_widths(program: ProtocolProgram) -> dict[Port, int]:
    """Output widths of every program value; assumes a valid program."""
    widths: dict[Port, int] = {}
    for nid in topo_order(program.nodes):
        node = program.nodes[nid]
        outs = proto_node_widths(node, [widths[p] for p in node.inputs], program)
        for port, w in enumerate(outs):
            widths[Port(nid, port)] = w
    return widths


def arch_widths(arch: PipelineArch) -> dict[Port, int]:
    """Output widths of every architecture value; assumes a valid architecture."""
    widths: dict[Port, int] = {}
    for nid in topo_order(arch.nodes):
        node = arch.nodes[nid]
        outs = pipe_node_widths(node, [widths[p] for p in node.inputs], arch)
        for port, w in enumerate(outs):
            widths[Port(nid, port)] = w
    return widths
