"""Structural elaboration of pipeline architectures.

``elaborate`` turns an architecture into a netlist: one module instance per
node, one wire per edge and the list of runtime-configurable registers. The
configuration registers are laid out as a dense map of 32-bit words, sorted
by owner id, which is what the control plane writes.

Area figures come from the per-kind constants below. They are relative
units for comparing architectures, not silicon areas.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Sequence

from rpipe.errors import ConfigError
from rpipe.ir.config import RuntimeConfig
from rpipe.ir.nodes import CamImpl, Opcode, PipeKind, PipelineArch, PipeNode, Port, clog2
from rpipe.ir.timing import compute_arrivals
from rpipe.ir.widths import arch_widths

WORD_BITS = 32
CONFIG_BUS = "cfg_bus"

# area units per bit of datapath width
OP_AREA: dict[Opcode, float] = {
    Opcode.ADD: 1.0,
    Opcode.SUB: 1.0,
    Opcode.NEG: 1.0,
    Opcode.AND: 0.25,
    Opcode.OR: 0.25,
    Opcode.XOR: 0.25,
    Opcode.NOT: 0.1,
    Opcode.SHL: 0.75,
    Opcode.SHR: 0.75,
    Opcode.EQ: 0.5,
    Opcode.NEQ: 0.5,
    Opcode.LTU: 0.5,
    Opcode.LEU: 0.5,
    Opcode.LTS: 0.5,
    Opcode.LES: 0.5,
    Opcode.MUX: 0.5,
}
MUL_AREA_PER_BIT2 = 1.0
REGISTER_AREA = 1.0
ROUTER_AREA = 0.5  # per bit per extra input
CONFIG_BIT_AREA = 1.0
RAM_BIT_AREA = 0.1
RAM_PORT_AREA = 2.0  # per index bit
REGISTER_CAM_BIT_AREA = 1.5
HASH_CAM_BIT_AREA = 0.15
HASH_UNIT_AREA = 64.0


@dataclass(frozen=True)
class Instance:
    id: str
    module: str
    params: dict[str, Any]


@dataclass(frozen=True)
class Wire:
    src: Port
    dst: str
    dst_port: int
    width: int


@dataclass(frozen=True)
class ConfigReg:
    owner: str
    field: str
    width: int


@dataclass(frozen=True)
class Netlist:
    instances: list[Instance]
    wires: list[Wire]
    config_regs: list[ConfigReg]

    def instance(self, instance_id: str) -> Instance:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        raise KeyError(instance_id)

    def to_document(self) -> dict[str, Any]:
        return {
            "kind": "netlist",
            "instances": [{"id": i.id, "module": i.module, "params": i.params} for i in self.instances],
            "wires": [
                {"src": [w.src.node, w.src.port], "dst": [w.dst, w.dst_port], "width": w.width} for w in self.wires
            ],
            "config_regs": [{"owner": r.owner, "field": r.field, "width": r.width} for r in self.config_regs],
        }


@dataclass(frozen=True)
class ConfigEntry:
    address: int
    owner: str
    field: str
    width: int
    offset: int = 0  # bit offset of this word within a wide field


@dataclass(frozen=True)
class ConfigMap:
    entries: list[ConfigEntry]

    @property
    def total_bits(self) -> int:
        return sum(e.width for e in self.entries)

    def to_document(self) -> dict[str, Any]:
        return {
            "kind": "config-map",
            "total_bits": self.total_bits,
            "entries": [
                {"address": e.address, "owner": e.owner, "field": e.field, "width": e.width, "offset": e.offset}
                for e in self.entries
            ],
        }


@dataclass(frozen=True)
class CostReport:
    counts: dict[str, int]
    area_by_kind: dict[str, float]
    depth: int
    config_bits: int

    @property
    def area(self) -> float:
        return round(sum(self.area_by_kind.values()), 6)


def _params(node: PipeNode) -> dict[str, Any]:
    params = {}
    for key, value in sorted(node.attrs.items()):
        if key == "value" and value is None:
            continue
        if key == "ops":
            value = [str(op) for op in value]
        params[key] = value
    return params


def _config_regs(node: PipeNode) -> list[ConfigReg]:
    if node.kind is PipeKind.ROUTER and len(node.inputs) > 1:
        return [ConfigReg(node.id, "select", clog2(len(node.inputs)))]
    if node.kind is PipeKind.ALU and len(node.ops) > 1:
        return [ConfigReg(node.id, "op", clog2(len(node.ops)))]
    if node.runtime_constant:
        return [ConfigReg(node.id, "value", node.attrs["width"])]
    return []


def elaborate(arch: PipelineArch) -> Netlist:
    """One instance per node (plus the config bus when anything is configurable)."""
    widths = arch_widths(arch)
    instances: list[Instance] = []
    wires: list[Wire] = []
    config_regs: list[ConfigReg] = []
    for nid in sorted(arch.nodes):
        node = arch.nodes[nid]
        instances.append(Instance(nid, str(node.kind), _params(node)))
        for ordinal, src in enumerate(node.inputs):
            wires.append(Wire(src, nid, ordinal, widths[src]))
        config_regs.extend(_config_regs(node))
    if config_regs:
        words = len(config_map_entries(config_regs))
        instances.append(Instance(CONFIG_BUS, "ConfigBus", {"words": words, "word_bits": WORD_BITS}))
    return Netlist(instances, wires, config_regs)


def config_map_entries(config_regs: Sequence[ConfigReg]) -> list[ConfigEntry]:
    entries: list[ConfigEntry] = []
    for reg in sorted(config_regs, key=lambda r: (r.owner, r.field)):
        for offset in range(0, reg.width, WORD_BITS):
            entries.append(ConfigEntry(len(entries), reg.owner, reg.field, min(WORD_BITS, reg.width - offset), offset))
    return entries


def config_map(netlist: Netlist) -> ConfigMap:
    return ConfigMap(config_map_entries(netlist.config_regs))


def config_bitstream(netlist: Netlist, config: RuntimeConfig) -> list[int]:
    """One word per config map entry, in address order.

    Memory bindings are not part of the bitstream: the control plane
    addresses memories directly.
    """
    fields = {(r.owner, r.field) for r in netlist.config_regs}
    for what, table in (("select", config.router_select), ("op", config.alu_op), ("value", config.const_value)):
        for owner in table:
            if (owner, what) not in fields:
                raise ConfigError(f"configuration sets {what} of {owner!r}, which has no config register")
    words = []
    for entry in config_map_entries(netlist.config_regs):
        if entry.field == "select":
            value = config.select(entry.owner)
        elif entry.field == "op":
            ops = netlist.instance(entry.owner).params["ops"]
            op = config.alu_op.get(entry.owner, Opcode(ops[0]))
            value = ops.index(str(op))
        else:
            value = config.const_value.get(entry.owner, 0)
        words.append((value >> entry.offset) & ((1 << entry.width) - 1))
    return words


def decode_bitstream(netlist: Netlist, words: Sequence[int]) -> RuntimeConfig:
    entries = config_map_entries(netlist.config_regs)
    if len(words) != len(entries):
        raise ConfigError(f"bitstream has {len(words)} words, the config map {len(entries)}")
    selects: dict[str, int] = {}
    ops: dict[str, Opcode] = {}
    consts: dict[str, int] = {}
    for entry, word in zip(entries, words):
        if word >> entry.width:
            raise ConfigError(f"word {entry.address} overflows the {entry.width}-bit field {entry.owner}.{entry.field}")
        if entry.field == "select":
            selects[entry.owner] = word
        elif entry.field == "op":
            supported = netlist.instance(entry.owner).params["ops"]
            if word >= len(supported):
                raise ConfigError(f"op index {word} out of range for {entry.owner!r}")
            ops[entry.owner] = Opcode(supported[word])
        else:
            consts[entry.owner] = consts.get(entry.owner, 0) | (word << entry.offset)
    return RuntimeConfig(selects, ops, consts)


def format_bitstream(words: Sequence[int]) -> str:
    return "".join(f"{w:08x}\n" for w in words)


def _node_area(node: PipeNode, widths: dict[Port, int], arch: PipelineArch) -> float:
    match node.kind:
        case PipeKind.REGISTER:
            return REGISTER_AREA * node.attrs["width"]
        case PipeKind.ROUTER:
            k = len(node.inputs)
            return ROUTER_AREA * widths[node.inputs[0]] * (k - 1) + CONFIG_BIT_AREA * (clog2(k) if k > 1 else 0)
        case PipeKind.CONSTANT:
            return CONFIG_BIT_AREA * node.attrs["width"] if node.runtime_constant else 0.0
        case PipeKind.ALU:
            width = node.attrs["width"]
            area = 0.0
            for op in node.ops:
                area += MUL_AREA_PER_BIT2 * width * width if op is Opcode.MUL else OP_AREA[op] * width
            if len(node.ops) > 1:
                area += CONFIG_BIT_AREA * clog2(len(node.ops)) + ROUTER_AREA * width * (len(node.ops) - 1)
            return area
        case PipeKind.RAM_ACCESS:
            return RAM_PORT_AREA * arch.rams[node.attrs["ram"]].index_width
        case PipeKind.CAM_ACCESS:
            return RAM_PORT_AREA * arch.cams[node.attrs["cam"]].key_width / WORD_BITS
    return 0.0


def estimate_cost(arch: PipelineArch) -> CostReport:
    """Relative area per node kind, configuration bits and pipeline depth."""
    widths = arch_widths(arch)
    area: Counter = Counter()
    counts = Counter(str(n.kind) for n in arch)
    for node in arch:
        area[str(node.kind)] += _node_area(node, widths, arch)
    for ram in arch.rams.values():
        area["RamStorage"] += RAM_BIT_AREA * ram.elem_width * ram.num_elems
    for cam in arch.cams.values():
        bits = cam.key_width * cam.num_entries
        if cam.impl is CamImpl.REGISTER:
            area["CamStorage"] += REGISTER_CAM_BIT_AREA * bits
        else:
            area["CamStorage"] += HASH_CAM_BIT_AREA * bits + HASH_UNIT_AREA
    config_bits = sum(r.width for n in arch for r in _config_regs(n))
    return CostReport(
        counts=dict(sorted(counts.items())),
        area_by_kind={k: round(v, 6) for k, v in sorted(area.items())},
        depth=compute_arrivals(arch).depth(arch),
        config_bits=config_bits,
    )
