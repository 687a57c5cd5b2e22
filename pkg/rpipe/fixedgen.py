"""Generate a fixed (non-reconfigurable) pipeline from a protocol program.

The translation is one-to-one: each program node becomes the pipeline node
with the same id, each input goes through a single-input Router, and edges
whose endpoints sit in different cycles get a chain of Registers. Nodes are
placed as soon as all their inputs have arrived.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

from rpipe.errors import ParameterError
from rpipe.frontend.normalize import normalize_program
from rpipe.ir.config import RuntimeConfig
from rpipe.ir.graph import topo_order
from rpipe.ir.nodes import (
    CamDecl,
    CamImpl,
    Opcode,
    PipeKind,
    PipelineArch,
    PipeNode,
    Port,
    ProtocolProgram,
    ProtoKind,
    ProtoNode,
    RamDecl,
)
from rpipe.ir.validate import validate_pipeline
from rpipe.ir.widths import program_widths

logger = logging.getLogger(__name__)

# cycles each program node kind takes once mapped
_LATENCY = {
    ProtoKind.UNARY: 1,
    ProtoKind.BINARY: 1,
    ProtoKind.CONDITIONAL: 1,
    ProtoKind.ARRAY_READ: 1,
    ProtoKind.ARRAY_WRITE: 1,
    ProtoKind.TABLE_LOOKUP: 1,
    ProtoKind.TABLE_WRITE: 1,
}


@dataclass(frozen=True)
class FixedGenResult:
    arch: PipelineArch
    config: RuntimeConfig
    stage_of: dict[str, int]


def _schedule(program: ProtocolProgram) -> tuple[dict[str, int | None], dict[str, int | None]]:
    """ASAP (input arrival, output arrival) per node; None for constant-only values."""
    start: dict[str, int | None] = {}
    done: dict[str, int | None] = {}
    for nid in topo_order(program.nodes):
        node = program.nodes[nid]
        arrivals = [done[p.node] for p in node.inputs if done[p.node] is not None]
        if node.kind is ProtoKind.PACKET_IN:
            start[nid], done[nid] = 0, 0
        elif not arrivals:
            start[nid], done[nid] = None, None
        else:
            start[nid] = max(arrivals)
            done[nid] = start[nid] + _LATENCY.get(node.kind, 0)
    return start, done


def _hardware_node(node: ProtoNode, widths: Mapping[Port, int], inputs: tuple[Port, ...]) -> PipeNode:
    attrs = node.attrs
    match node.kind:
        case ProtoKind.CONSTANT:
            return PipeNode(node.id, PipeKind.CONSTANT, {"width": attrs["width"], "value": attrs["value"]})
        case ProtoKind.SLICE:
            return PipeNode(node.id, PipeKind.SLICE, {"offset": attrs["offset"], "width": attrs["width"]}, inputs)
        case ProtoKind.MERGE:
            return PipeNode(node.id, PipeKind.MERGE, {}, inputs)
        case ProtoKind.EXTEND:
            return PipeNode(node.id, PipeKind.EXTEND, {"width": attrs["width"], "signed": attrs["signed"]}, inputs)
        case ProtoKind.UNARY | ProtoKind.BINARY:
            width = widths[node.inputs[0]]
            return PipeNode(node.id, PipeKind.ALU, {"width": width, "ops": [node.op], "latency": 1}, inputs)
        case ProtoKind.CONDITIONAL:
            width = widths[node.inputs[1]]
            return PipeNode(node.id, PipeKind.ALU, {"width": width, "ops": [Opcode.MUX], "latency": 1}, inputs)
        case ProtoKind.PACKET_IN | ProtoKind.PACKET_OUT:
            return PipeNode(node.id, PipeKind(str(node.kind)), {"prefix_len": attrs["prefix_len"]}, inputs)
        case ProtoKind.ARRAY_READ | ProtoKind.ARRAY_WRITE:
            write = node.kind is ProtoKind.ARRAY_WRITE
            return PipeNode(node.id, PipeKind.RAM_ACCESS, {"ram": attrs["array"], "write": write}, inputs)
        case ProtoKind.TABLE_LOOKUP | ProtoKind.TABLE_WRITE:
            write = node.kind is ProtoKind.TABLE_WRITE
            return PipeNode(node.id, PipeKind.CAM_ACCESS, {"cam": attrs["table"], "write": write}, inputs)
    raise ValueError(f"no pipeline counterpart for {node.kind}")


def generate_fixed(
    program: ProtocolProgram,
    cam_impls: Mapping[str, CamImpl] | None = None,
) -> FixedGenResult:
    """Translate ``program`` into a pipeline with no runtime flexibility.

    ``cam_impls`` overrides the CAM implementation per table (RegisterCam
    by default).
    """
    cam_impls = dict(cam_impls or {})
    unknown = set(cam_impls) - set(program.tables)
    if unknown:
        raise ParameterError(f"CAM implementation given for unknown tables {sorted(unknown)}")
    program = normalize_program(program, program.prefix_len)
    widths = program_widths(program)
    start, done = _schedule(program)
    taken = set(program.nodes)

    def fresh(base: str) -> str:
        nid, n = base, 0
        while nid in taken:
            n += 1
            nid = f"{base}_{n}"
        taken.add(nid)
        return nid

    nodes: list[PipeNode] = []
    for nid in sorted(program.nodes):
        node = program.nodes[nid]
        inputs: list[Port] = []
        for k, src in enumerate(node.inputs):
            carried = src
            if done[src.node] is not None:
                for d in range(start[nid] - done[src.node]):
                    reg = fresh(f"{nid}_in{k}_d{d}")
                    nodes.append(PipeNode(reg, PipeKind.REGISTER, {"width": widths[src]}, (carried,)))
                    carried = Port(reg, 0)
            router = fresh(f"{nid}_in{k}")
            nodes.append(PipeNode(router, PipeKind.ROUTER, {}, (carried,)))
            inputs.append(Port(router, 0))
        nodes.append(_hardware_node(node, widths, tuple(inputs)))

    rams = [RamDecl(a.id, a.elem_width, a.num_elems) for a in program.arrays.values()]
    cams = [
        CamDecl(t.id, t.key_width, t.num_entries, impl=cam_impls.get(t.id, CamImpl.REGISTER))
        for t in program.tables.values()
    ]
    arch = PipelineArch.build(nodes, rams, cams)
    validate_pipeline(arch).raise_for_errors("generated fixed pipeline")
    mem_bind = {sid: sid for sid in sorted([*program.arrays, *program.tables])}
    stage_of = {nid: start[nid] or 0 for nid in program.nodes}
    logger.debug("fixed pipeline: %d nodes, %d cycles", len(arch.nodes), max(done[n] or 0 for n in done))
    return FixedGenResult(arch, RuntimeConfig(mem_bind=mem_bind), stage_of)
