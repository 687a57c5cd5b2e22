"""Validators for protocol programs and pipeline architectures.

Validators accept arbitrary decoded input and never raise: every violation is
collected as a diagnostic so a single run pinpoints all of them.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from rpipe.errors import ValidationFailed
from rpipe.ir.graph import find_cycle, topo_order
from rpipe.ir.nodes import (
    MAX_WIDTH,
    CamImpl,
    PipeKind,
    PipelineArch,
    Port,
    ProtocolProgram,
    ProtoKind,
    proto_output_ports,
)
from rpipe.ir.timing import compute_arrivals
from rpipe.ir.widths import (
    TypingViolation,
    pipe_arity_ok,
    pipe_node_widths,
    proto_arity_ok,
    proto_node_widths,
)

logger = logging.getLogger(__name__)

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    node: str
    code: str
    message: str
    severity: str = ERROR


@dataclass
class ValidationReport:
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors()

    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == ERROR]

    def add(self, node: str, code: str, message: str, severity: str = ERROR) -> None:
        self.diagnostics.append(Diagnostic(node, code, message, severity))

    def codes(self) -> set[str]:
        return {d.code for d in self.diagnostics}

    def raise_for_errors(self, what: str) -> None:
        if not self.ok:
            raise ValidationFailed(what, self)


def _positive(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 1


def _width_ok(value: object) -> bool:
    return _positive(value) and value <= MAX_WIDTH


def _check_ports(
    report: ValidationReport,
    nodes: Mapping,
    output_ports: Callable[[object], int],
) -> bool:
    clean = True
    for node in nodes.values():
        for ordinal, src in enumerate(node.inputs):
            producer = nodes.get(src.node)
            if producer is None:
                report.add(node.id, "dangling input", f"input {ordinal} reads unknown node {src.node!r}")
                clean = False
            elif not 0 <= src.port < output_ports(producer):
                report.add(node.id, "bad port", f"input {ordinal} reads port {src.port} of {src.node!r}")
                clean = False
    return clean


def _check_singletons(report: ValidationReport, nodes: Iterable, kinds: tuple) -> None:
    census = Counter(n.kind for n in nodes)
    for kind in kinds:
        if census[kind] != 1:
            report.add("<graph>", f"{kind} count", f"expected exactly one {kind} node, found {census[kind]}")


def _infer(report: ValidationReport, nodes: Mapping, rule: Callable) -> dict[Port, int]:
    widths: dict[Port, int] = {}
    for nid in topo_order(nodes):
        node = nodes[nid]
        ins = [widths.get(p) for p in node.inputs]
        if any(w is None for w in ins):
            continue  # an upstream node already failed
        try:
            outs = rule(node, ins)
        except TypingViolation as exc:
            report.add(nid, exc.code, exc.message)
            continue
        except (KeyError, TypeError, ValueError) as exc:
            report.add(nid, "bad-attr", f"malformed attributes: {exc}")
            continue
        for port, w in enumerate(outs):
            widths[Port(nid, port)] = w
    return widths


def validate_protocol(program: ProtocolProgram) -> ValidationReport:
    report = ValidationReport()
    nodes = program.nodes
    for key, node in nodes.items():
        if key != node.id:
            report.add(node.id, "id mismatch", f"node stored under {key!r}")
        if not isinstance(node.kind, ProtoKind):
            report.add(node.id, "unknown kind", f"unknown node kind {node.kind!r}")
    if not report.ok:
        return report
    for node in nodes.values():
        if not proto_arity_ok(node.kind, len(node.inputs)):
            report.add(node.id, "arity", f"{node.kind} cannot take {len(node.inputs)} inputs")
    for decl in program.arrays.values():
        if not _width_ok(decl.elem_width) or not _positive(decl.num_elems):
            report.add(decl.id, "bad declaration", "array needs elem_width in 1..1024 and num_elems >= 1")
    for decl in program.tables.values():
        if not _width_ok(decl.key_width) or not _positive(decl.num_entries):
            report.add(decl.id, "bad declaration", "table needs key_width in 1..1024 and num_entries >= 1")
    _check_singletons(report, nodes.values(), (ProtoKind.PACKET_IN, ProtoKind.PACKET_OUT))
    ports_ok = _check_ports(report, nodes, lambda n: proto_output_ports(n.kind))
    cycle = find_cycle(nodes)
    if cycle:
        report.add(cycle[0], "cycle", "graph has a cycle through " + " -> ".join(cycle))
    if ports_ok and not cycle and report.ok:
        _infer(report, nodes, lambda n, ins: proto_node_widths(n, ins, program))
        _warn_reserved_cmd(report, program)
    logger.debug("validated program: %d nodes, %d diagnostics", len(nodes), len(report.diagnostics))
    return report


def _warn_reserved_cmd(report: ValidationReport, program: ProtocolProgram) -> None:
    for out in program.of_kind(ProtoKind.PACKET_OUT):
        cmd = program.nodes.get(out.inputs[0].node)
        if cmd is not None and cmd.kind is ProtoKind.CONSTANT and cmd.attrs.get("value") == 3:
            report.add(out.id, "reserved cmd", "cmd value 3 is reserved and drops the packet", WARNING)


def validate_pipeline(arch: PipelineArch) -> ValidationReport:
    report = ValidationReport()
    nodes = arch.nodes
    for key, node in nodes.items():
        if key != node.id:
            report.add(node.id, "id mismatch", f"node stored under {key!r}")
        if not isinstance(node.kind, PipeKind):
            report.add(node.id, "unknown kind", f"unknown node kind {node.kind!r}")
    if not report.ok:
        return report
    for ram in arch.rams.values():
        if not _width_ok(ram.elem_width) or not _positive(ram.num_elems) or not _positive(ram.latency):
            report.add(ram.id, "bad declaration", "RAM needs elem_width, num_elems >= 1 and latency >= 1")
    for cam in arch.cams.values():
        if not _width_ok(cam.key_width) or not _positive(cam.num_entries) or not _positive(cam.latency):
            report.add(cam.id, "bad declaration", "CAM needs key_width, num_entries >= 1 and latency >= 1")
        if not isinstance(cam.impl, CamImpl):
            report.add(cam.id, "bad declaration", f"unsupported CAM implementation {cam.impl!r}")
    for node in nodes.values():
        try:
            arity_ok = pipe_arity_ok(node, arch)
        except ValueError as exc:
            report.add(node.id, "bad-opcode", str(exc))
            continue
        if not arity_ok:
            report.add(node.id, "arity", f"{node.kind} cannot take {len(node.inputs)} inputs")
    writers = Counter(n.attrs.get("ram") for n in nodes.values() if n.kind is PipeKind.RAM_ACCESS and n.is_write)
    for ram_id, count in writers.items():
        if count > 1:
            report.add(str(ram_id), "write ports", f"RAM {ram_id!r} has {count} write accesses (one write port)")
    _check_singletons(report, nodes.values(), (PipeKind.PACKET_IN, PipeKind.PACKET_OUT))
    ports_ok = _check_ports(report, nodes, lambda n: n.output_ports)
    cycle = find_cycle(nodes)
    if cycle:
        report.add(cycle[0], "cycle", "graph has a cycle through " + " -> ".join(cycle))
    if ports_ok and not cycle and report.ok:
        _infer(report, nodes, lambda n, ins: pipe_node_widths(n, ins, arch))
        for mismatch in compute_arrivals(arch).mismatches:
            report.add(mismatch.node, "arrival mismatch", mismatch.describe())
    logger.debug("validated architecture: %d nodes, %d diagnostics", len(nodes), len(report.diagnostics))
    return report
