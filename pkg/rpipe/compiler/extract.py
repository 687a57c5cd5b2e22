"""Read a runtime configuration off a satisfying assignment."""

from __future__ import annotations

from rpipe.compiler.encode import LitKind, LitMap
from rpipe.compiler.solver import Assignment
from rpipe.errors import ConfigError, InconsistentAssignmentError
from rpipe.ir.config import RuntimeConfig, check_config
from rpipe.ir.nodes import Opcode, PipeKind, PipelineArch, ProtocolProgram


def _put(table: dict, key, value, what: str) -> None:
    if key in table and table[key] != value:
        raise InconsistentAssignmentError(f"{what} {key!r}: both {table[key]!r} and {value!r} are selected")
    table[key] = value


def extract_config(
    assignment: Assignment,
    litmap: LitMap,
    arch: PipelineArch,
    program: ProtocolProgram,
) -> RuntimeConfig:
    """Routers without a true PICK select input 0, idle ALUs their first op and
    unmatched runtime constants 0. Routers with one input and ALUs with one
    op have nothing to configure and are left out."""
    router_select: dict[str, int] = {}
    alu_op: dict[str, Opcode] = {}
    const_value: dict[str, int] = {}
    mem_bind: dict[str, str] = {}
    bound: dict[str, str] = {}
    for var, lit in litmap:
        if not assignment[var]:
            continue
        match lit.kind:
            case LitKind.PICK:
                if len(arch.nodes[lit.a].inputs) > 1:
                    _put(router_select, lit.a, lit.b, "router")
            case LitKind.ALUOP:
                if len(arch.nodes[lit.a].ops) > 1:
                    _put(alu_op, lit.a, Opcode(lit.b), "ALU")
            case LitKind.BIND:
                _put(mem_bind, lit.a, lit.b, "state")
                _put(bound, lit.b, lit.a, "memory")
            case LitKind.OUT:
                h = arch.nodes[lit.a.node]
                if h.runtime_constant:
                    _put(const_value, h.id, program.nodes[lit.b.node].attrs["value"], "constant")

    for alu in arch.of_kind(PipeKind.ALU):
        if len(alu.ops) > 1:
            alu_op.setdefault(alu.id, alu.ops[0])
    for const in arch.of_kind(PipeKind.CONSTANT):
        if const.runtime_constant:
            const_value.setdefault(const.id, 0)
    config = RuntimeConfig(
        dict(sorted(router_select.items())),
        dict(sorted(alu_op.items())),
        dict(sorted(const_value.items())),
        dict(sorted(mem_bind.items())),
    )
    try:
        check_config(config, arch, program)
    except ConfigError as exc:
        raise InconsistentAssignmentError(f"extracted configuration is invalid: {exc}") from exc
    return config
