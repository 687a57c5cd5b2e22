"""Runtime configuration of a pipeline architecture."""

from __future__ import annotations

from dataclasses import dataclass, field

from rpipe.errors import ConfigError
from rpipe.ir.nodes import Opcode, PipeKind, PipelineArch, ProtocolProgram


@dataclass(frozen=True)
class RuntimeConfig:
    router_select: dict[str, int] = field(default_factory=dict)
    alu_op: dict[str, Opcode] = field(default_factory=dict)
    const_value: dict[str, int] = field(default_factory=dict)
    mem_bind: dict[str, str] = field(default_factory=dict)

    def select(self, router_id: str) -> int:
        return self.router_select.get(router_id, 0)

    def materialized(self, arch: PipelineArch) -> "RuntimeConfig":
        """Same configuration with every default written out explicitly."""
        routers = {n.id: self.select(n.id) for n in arch.of_kind(PipeKind.ROUTER) if len(n.inputs) > 1}
        alus = {n.id: self.alu_op.get(n.id, n.ops[0]) for n in arch.of_kind(PipeKind.ALU) if len(n.ops) > 1}
        consts = {n.id: self.const_value.get(n.id, 0) for n in arch.of_kind(PipeKind.CONSTANT) if n.runtime_constant}
        return RuntimeConfig(routers, alus, consts, dict(self.mem_bind))


def check_config(config: RuntimeConfig, arch: PipelineArch, program: ProtocolProgram | None = None) -> None:
    """Raise ``ConfigError`` unless the configuration fits the architecture."""
    for rid, ordinal in config.router_select.items():
        node = arch.nodes.get(rid)
        if node is None or node.kind is not PipeKind.ROUTER:
            raise ConfigError(f"router_select names unknown router {rid!r}")
        if not 0 <= ordinal < len(node.inputs):
            raise ConfigError(f"router {rid!r} has {len(node.inputs)} inputs, selection {ordinal} out of range")
    for aid, op in config.alu_op.items():
        node = arch.nodes.get(aid)
        if node is None or node.kind is not PipeKind.ALU:
            raise ConfigError(f"alu_op names unknown ALU {aid!r}")
        if op not in node.ops:
            raise ConfigError(f"ALU {aid!r} does not support {op}")
    for cid, value in config.const_value.items():
        node = arch.nodes.get(cid)
        if node is None or not node.runtime_constant:
            raise ConfigError(f"const_value names unknown runtime constant {cid!r}")
        if not 0 <= value < (1 << node.attrs["width"]):
            raise ConfigError(f"constant {cid!r} value {value} does not fit {node.attrs['width']} bits")
    used = set()
    for state_id, mem_id in config.mem_bind.items():
        if mem_id not in arch.rams and mem_id not in arch.cams:
            raise ConfigError(f"state {state_id!r} bound to unknown memory {mem_id!r}")
        if mem_id in used:
            raise ConfigError(f"memory {mem_id!r} bound twice")
        used.add(mem_id)
        if program is None:
            continue
        if state_id in program.arrays:
            decl, ram = program.arrays[state_id], arch.rams.get(mem_id)
            if ram is None or (ram.elem_width, ram.num_elems) != (decl.elem_width, decl.num_elems):
                raise ConfigError(f"array {state_id!r} does not fit memory {mem_id!r}")
        elif state_id in program.tables:
            decl, cam = program.tables[state_id], arch.cams.get(mem_id)
            if cam is None or (cam.key_width, cam.num_entries) != (decl.key_width, decl.num_entries):
                raise ConfigError(f"table {state_id!r} does not fit memory {mem_id!r}")
        else:
            raise ConfigError(f"mem_bind names unknown program state {state_id!r}")
