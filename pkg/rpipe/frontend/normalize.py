"""Bring a program into the shape the encoder matches against."""

from __future__ import annotations

from rpipe.errors import PrefixOverflowError
from rpipe.ir.graph import topo_order
from rpipe.ir.nodes import Opcode, Port, ProtocolProgram, ProtoKind, ProtoNode
from rpipe.ir.widths import proto_node_widths


def _fresh(program: ProtocolProgram, taken: set[str], base: str) -> str:
    nid, n = base, 0
    while nid in program.nodes or nid in taken:
        n += 1
        nid = f"{base}_{n}"
    taken.add(nid)
    return nid


def _lenient_widths(program: ProtocolProgram) -> dict[Port, int]:
    """Output widths, tolerating wide Conditional conditions."""
    widths: dict[Port, int] = {}
    for nid in topo_order(program.nodes):
        node = program.nodes[nid]
        ins = [widths[p] for p in node.inputs]
        if node.kind is ProtoKind.CONDITIONAL:
            outs: tuple[int, ...] = (ins[1],)
        else:
            outs = proto_node_widths(node, ins, program)
        for port, w in enumerate(outs):
            widths[Port(nid, port)] = w
    return widths


def normalize_program(program: ProtocolProgram, target_prefix_len: int) -> ProtocolProgram:
    """Widen the parser/deparser to ``target_prefix_len`` bytes and fill defaults.

    The old prefix is recovered with a Slice of the wider one; the output
    prefix is the old output prefix merged with the untouched input bytes.
    Write nodes without an enable get a shared Constant 1; Conditional
    conditions wider than one bit are replaced by ``cond != 0``.
    """
    old_len = program.prefix_len
    if old_len > target_prefix_len:
        raise PrefixOverflowError(
            f"program parses {old_len} bytes but the target prefix is {target_prefix_len} bytes"
        )
    widths = _lenient_widths(program)
    packet_in = program.only(ProtoKind.PACKET_IN)
    packet_out = program.only(ProtoKind.PACKET_OUT)
    taken: set[str] = set()
    nodes: dict[str, ProtoNode] = dict(program.nodes)
    widened = old_len != target_prefix_len
    redirect: dict[Port, Port] = {}
    old_prefix: str | None = None

    if widened:
        nodes[packet_in.id] = ProtoNode(packet_in.id, ProtoKind.PACKET_IN, {"prefix_len": target_prefix_len})
        old_prefix = _fresh(program, taken, "norm_prefix_in")
        nodes[old_prefix] = ProtoNode(
            old_prefix, ProtoKind.SLICE, {"offset": 0, "width": old_len * 8}, (Port(packet_in.id, 0),)
        )
        redirect[Port(packet_in.id, 0)] = Port(old_prefix, 0)

    one: str | None = None
    zeros: dict[int, str] = {}
    for nid, node in list(nodes.items()):
        if nid == old_prefix:
            continue
        inputs = tuple(redirect.get(p, p) for p in node.inputs)
        if node.kind in (ProtoKind.ARRAY_WRITE, ProtoKind.TABLE_WRITE) and len(inputs) == 2:
            if one is None:
                one = _fresh(program, taken, "norm_enable")
                nodes[one] = ProtoNode(one, ProtoKind.CONSTANT, {"value": 1, "width": 1})
            inputs += (Port(one, 0),)
        if node.kind is ProtoKind.CONDITIONAL and widths[node.inputs[0]] > 1:
            w = widths[node.inputs[0]]
            if w not in zeros:
                zeros[w] = _fresh(program, taken, f"norm_zero{w}")
                nodes[zeros[w]] = ProtoNode(zeros[w], ProtoKind.CONSTANT, {"value": 0, "width": w})
            test = _fresh(program, taken, f"{nid}_cond")
            nodes[test] = ProtoNode(test, ProtoKind.BINARY, {"op": Opcode.NEQ}, (inputs[0], Port(zeros[w], 0)))
            inputs = (Port(test, 0),) + inputs[1:]
        if inputs != node.inputs:
            nodes[nid] = ProtoNode(nid, node.kind, node.attrs, inputs)

    if widened:
        out = nodes[packet_out.id]
        rest = _fresh(program, taken, "norm_prefix_rest")
        nodes[rest] = ProtoNode(
            rest,
            ProtoKind.SLICE,
            {"offset": old_len * 8, "width": (target_prefix_len - old_len) * 8},
            (Port(packet_in.id, 0),),
        )
        merged = _fresh(program, taken, "norm_prefix_out")
        nodes[merged] = ProtoNode(merged, ProtoKind.MERGE, {}, (out.inputs[1], Port(rest, 0)))
        nodes[packet_out.id] = ProtoNode(
            packet_out.id,
            ProtoKind.PACKET_OUT,
            {"prefix_len": target_prefix_len},
            (out.inputs[0], Port(merged, 0), out.inputs[2]),
        )
    return ProtocolProgram(nodes, dict(program.arrays), dict(program.tables))
