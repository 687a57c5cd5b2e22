"""Parametric "flex" pipeline architectures: m stages of n ALUs.

Stage 0 is the parser: the prefix is cut into ``alu_width`` words and the
packet length is zero-extended to a word, each landing in its own register.
Every compute stage reads the previous stage's registers through full
crossbar routers, computes with its ALUs and memory accesses, and writes a
fresh register file:

* word registers: one hardwired per arithmetic ALU, one per memory result,
  the rest fed by routers (passthrough of earlier values and constants);
* flag registers: one hardwired per comparison ALU, the rest routed.

All producers of a stage are balanced with delay registers to the stage
latency ``max(alu_latency, memory latencies)``. The deparser builds the
output prefix from 16-bit halves of routed last-stage words.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from typing import Any, Iterable, Sequence

from rpipe.errors import ParameterError
from rpipe.ir.nodes import (
    COMPARE_OPS,
    DEFAULT_MTU,
    LENGTH_WIDTH,
    CamDecl,
    CamImpl,
    Opcode,
    PipeKind,
    PipelineArch,
    PipeNode,
    Port,
    RamDecl,
    alu_arity,
    clog2,
)
from rpipe.ir.serialize import decode_text

DEFAULT_OPS: tuple[Opcode, ...] = (
    Opcode.ADD,
    Opcode.SUB,
    Opcode.AND,
    Opcode.OR,
    Opcode.XOR,
    Opcode.NOT,
    Opcode.SHL,
    Opcode.SHR,
    Opcode.MUX,
    Opcode.EQ,
    Opcode.NEQ,
    Opcode.LTU,
    Opcode.LEU,
)
HALF = 16


@dataclass(frozen=True)
class MemoryBlock:
    id: str
    kind: str  # "ram" | "cam"
    stage: int
    width: int = 32
    entries: int = 256
    latency: int = 1
    write: bool = True
    impl: CamImpl = CamImpl.REGISTER


def default_memories(stages: int, width: int = 32) -> tuple[MemoryBlock, ...]:
    """One CAM in stage 2 and two RAMs in stage 3 (clamped to the last stage)."""
    return (
        MemoryBlock("cam0", "cam", min(2, stages), width),
        MemoryBlock("ram0", "ram", min(3, stages), width),
        MemoryBlock("ram1", "ram", min(3, stages), width),
    )


@dataclass(frozen=True)
class FlexParams:
    stages: int
    alus_per_stage: int
    alu_width: int = 32
    ops: tuple[Opcode, ...] = DEFAULT_OPS
    alu_latency: int = 1
    registers_per_stage: int = 40
    flag_registers: int = 8
    runtime_constants: int = 6
    flag_constants: int = 2
    compare_alus: int | None = None
    memories: tuple[MemoryBlock, ...] | None = None
    prefix_len: int = 80
    mtu: int = DEFAULT_MTU

    def blocks(self) -> tuple[MemoryBlock, ...]:
        if self.memories is None:
            return default_memories(self.stages, self.alu_width)
        return self.memories

    def with_ops(self, *extra: Opcode) -> "FlexParams":
        return replace(self, ops=tuple(dict.fromkeys(self.ops + extra)))

    def to_document(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["ops"] = [str(op) for op in self.ops]
        doc["memories"] = None if self.memories is None else [
            {**asdict(m), "impl": str(m.impl)} for m in self.memories
        ]
        return doc

    @classmethod
    def from_document(cls, doc: dict[str, Any]) -> "FlexParams":
        """Parameters file: the fields above as a JSON object."""
        try:
            values = dict(doc)
            if "ops" in values:
                values["ops"] = tuple(Opcode(o) for o in values["ops"])
            if values.get("memories") is not None:
                values["memories"] = tuple(
                    MemoryBlock(**{**m, "impl": CamImpl(m.get("impl", CamImpl.REGISTER))}) for m in values["memories"]
                )
            return cls(**values)
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"bad flex parameters: {exc}") from None


def load_flex_params(text: bytes | str) -> FlexParams:
    try:
        doc = json.loads(decode_text(text))
    except json.JSONDecodeError as exc:
        raise ParameterError(f"bad flex parameters file: {exc}") from None
    return FlexParams.from_document(doc)


def _split_ops(params: FlexParams) -> tuple[list[Opcode], list[Opcode], int, int]:
    ops = list(dict.fromkeys(params.ops))
    if not ops:
        raise ParameterError("ALUs need at least one operation")
    arith = [o for o in ops if o not in COMPARE_OPS]
    compare = [o for o in ops if o in COMPARE_OPS]
    n = params.alus_per_stage
    if not arith:
        return arith, compare, 0, n
    if not compare:
        return arith, compare, n, 0
    n_cmp = params.compare_alus if params.compare_alus is not None else max(1, n // 4)
    if not 1 <= n_cmp < n:
        raise ParameterError(f"cannot split {n} ALUs into arithmetic and {n_cmp} comparison ALUs")
    return arith, compare, n - n_cmp, n_cmp


def alu_split(params: FlexParams) -> tuple[int, int]:
    """(arithmetic, comparison) ALUs per stage."""
    _, _, n_arith, n_cmp = _split_ops(params)
    return n_arith, n_cmp


def _check(params: FlexParams) -> None:
    if params.stages < 1 or params.alus_per_stage < 1:
        raise ParameterError("flex architectures need at least one stage and one ALU per stage")
    if params.alu_width < LENGTH_WIDTH or params.alu_width % HALF:
        raise ParameterError(f"ALU width {params.alu_width} must be a multiple of {HALF}")
    if params.prefix_len * 8 % params.alu_width:
        raise ParameterError(f"a {params.prefix_len}-byte prefix does not split into {params.alu_width}-bit words")
    if params.alu_latency < 1:
        raise ParameterError("ALU latency must be at least one cycle")
    seen = set()
    for block in params.blocks():
        if block.id in seen:
            raise ParameterError(f"duplicate memory block {block.id!r}")
        seen.add(block.id)
        if block.kind not in ("ram", "cam"):
            raise ParameterError(f"memory block {block.id!r}: kind must be 'ram' or 'cam'")
        if not 1 <= block.stage <= params.stages:
            raise ParameterError(f"memory block {block.id!r} placed in stage {block.stage} of {params.stages}")
        if block.width != params.alu_width:
            raise ParameterError(f"memory block {block.id!r} width {block.width} differs from the ALU width")
        if block.entries < 1 or block.latency < 1:
            raise ParameterError(f"memory block {block.id!r} needs entries and latency >= 1")


class _ArchBuilder:
    def __init__(self) -> None:
        self.nodes: list[PipeNode] = []

    def add(self, nid: str, kind: PipeKind, attrs: dict, inputs: Sequence[Port] = ()) -> Port:
        self.nodes.append(PipeNode(nid, kind, attrs, tuple(inputs)))
        return Port(nid, 0)

    def router(self, nid: str, sources: Sequence[Port]) -> Port:
        return self.add(nid, PipeKind.ROUTER, {}, sources)

    def delayed_register(self, nid: str, source: Port, width: int, delay: int) -> Port:
        """``delay`` balancing registers followed by the stage register ``nid``."""
        for k in range(delay):
            source = self.add(f"{nid}_d{k}", PipeKind.REGISTER, {"width": width}, (source,))
        return self.add(nid, PipeKind.REGISTER, {"width": width}, (source,))


def gen_flex_arch(params: FlexParams) -> PipelineArch:
    _check(params)
    arith_ops, compare_ops, n_arith, n_cmp = _split_ops(params)
    width = params.alu_width
    num_words = params.prefix_len * 8 // width
    blocks = params.blocks()
    b = _ArchBuilder()

    # parser stage
    packet_in = b.add("s0_packet_in", PipeKind.PACKET_IN, {"prefix_len": params.prefix_len, "mtu": params.mtu})
    words: list[Port] = []
    for k in range(num_words):
        cut = b.add(f"s0_w{k:02d}", PipeKind.SLICE, {"offset": k * width, "width": width}, (packet_in,))
        words.append(b.delayed_register(f"s0_reg{k:02d}", cut, width, 0))
    length = b.add("s0_len", PipeKind.EXTEND, {"width": width, "signed": False}, (Port(packet_in.node, 1),))
    words.append(b.delayed_register(f"s0_reg{num_words:02d}", length, width, 0))
    flags: list[Port] = []

    for s in range(1, params.stages + 1):
        tag = f"s{s}"
        stage_blocks = [m for m in blocks if m.stage == s]
        mem_outputs = sum(1 for m in stage_blocks if m.kind == "ram") + sum(
            (1 + int(m.write)) for m in stage_blocks if m.kind == "cam"
        )
        surplus = params.registers_per_stage - n_arith - mem_outputs
        if surplus < num_words + 1:
            raise ParameterError(
                f"stage {s}: {params.registers_per_stage} registers leave {surplus} for passthrough, "
                f"the prefix and length need {num_words + 1}"
            )
        flag_surplus = params.flag_registers - n_cmp
        if flag_surplus < 0:
            raise ParameterError(f"stage {s}: {params.flag_registers} flag registers for {n_cmp} comparison ALUs")
        latency = max([params.alu_latency] + [m.latency for m in stage_blocks])

        consts = [b.add(f"{tag}_const{k}", PipeKind.CONSTANT, {"width": width, "value": None}) for k in range(params.runtime_constants)]
        fconsts = [b.add(f"{tag}_fconst{k}", PipeKind.CONSTANT, {"width": 1, "value": None}) for k in range(params.flag_constants)]
        word_in = words + consts
        flag_in = flags + fconsts
        next_words: list[Port] = []
        next_flags: list[Port] = []

        for i in range(n_arith):
            aid = f"{tag}_alu{i:02d}"
            arity = alu_arity(arith_ops)
            inputs = []
            if Opcode.MUX in arith_ops:
                if not flag_in:
                    raise ParameterError(f"stage {s}: MUX ALUs need flag registers or flag constants")
                inputs.append(b.router(f"{aid}_c", flag_in))
            for k in range(arity - len(inputs)):
                inputs.append(b.router(f"{aid}_{'ab'[k]}", word_in))
            alu = b.add(aid, PipeKind.ALU, {"width": width, "ops": list(arith_ops), "latency": params.alu_latency}, inputs)
            next_words.append(b.delayed_register(f"{tag}_reg{len(next_words):02d}", alu, width, latency - params.alu_latency))
        for j in range(n_cmp):
            aid = f"{tag}_cmp{j:02d}"
            inputs = [b.router(f"{aid}_{x}", word_in) for x in "ab"]
            alu = b.add(aid, PipeKind.ALU, {"width": width, "ops": list(compare_ops), "latency": params.alu_latency}, inputs)
            next_flags.append(b.delayed_register(f"{tag}_flag{len(next_flags):02d}", alu, 1, latency - params.alu_latency))

        for block in stage_blocks:
            mid = f"{tag}_{block.id}"
            iw = clog2(block.entries)
            delay = latency - block.latency
            if block.kind == "ram":
                index = b.add(f"{mid}_rd_idx", PipeKind.SLICE, {"offset": 0, "width": iw}, (b.router(f"{mid}_rd_ir", word_in),))
                read = b.add(f"{mid}_rd", PipeKind.RAM_ACCESS, {"ram": block.id, "write": False}, (index,))
                next_words.append(b.delayed_register(f"{tag}_reg{len(next_words):02d}", read, width, delay))
                if block.write:
                    if not flag_in:
                        raise ParameterError(f"stage {s}: memory writes need flag registers or flag constants")
                    windex = b.add(f"{mid}_wr_idx", PipeKind.SLICE, {"offset": 0, "width": iw}, (b.router(f"{mid}_wr_ir", word_in),))
                    value = b.router(f"{mid}_wr_v", word_in)
                    enable = b.router(f"{mid}_wr_en", flag_in)
                    b.add(f"{mid}_wr", PipeKind.RAM_ACCESS, {"ram": block.id, "write": True}, (windex, value, enable))
            else:
                key = b.router(f"{mid}_rd_k", word_in)
                lookup = b.add(f"{mid}_rd", PipeKind.CAM_ACCESS, {"cam": block.id, "write": False}, (key,))
                wide = b.add(f"{mid}_rd_x", PipeKind.EXTEND, {"width": width, "signed": False}, (lookup,))
                next_words.append(b.delayed_register(f"{tag}_reg{len(next_words):02d}", wide, width, delay))
                if block.write:
                    if not flag_in:
                        raise ParameterError(f"stage {s}: memory writes need flag registers or flag constants")
                    wkey = b.router(f"{mid}_wr_k", word_in)
                    hint = b.add(f"{mid}_wr_h", PipeKind.SLICE, {"offset": 0, "width": iw}, (b.router(f"{mid}_wr_hr", word_in),))
                    enable = b.router(f"{mid}_wr_en", flag_in)
                    insert = b.add(f"{mid}_wr", PipeKind.CAM_ACCESS, {"cam": block.id, "write": True}, (wkey, hint, enable))
                    wide = b.add(f"{mid}_wr_x", PipeKind.EXTEND, {"width": width, "signed": False}, (insert,))
                    next_words.append(b.delayed_register(f"{tag}_reg{len(next_words):02d}", wide, width, delay))

        for _ in range(surplus):
            rid = f"{tag}_reg{len(next_words):02d}"
            next_words.append(b.delayed_register(rid, b.router(f"{rid}_r", word_in), width, latency))
        if flag_in:
            for _ in range(flag_surplus):
                fid = f"{tag}_flag{len(next_flags):02d}"
                next_flags.append(b.delayed_register(fid, b.router(f"{fid}_r", flag_in), 1, latency))
        words, flags = next_words, next_flags

    # deparser over the last stage; its constants are the last stage's
    last = [*words, *consts]
    halves = []
    for h in range(params.prefix_len * 8 // HALF):
        source = b.router(f"dp_h{h:02d}_r", last)
        halves.append(b.add(f"dp_h{h:02d}", PipeKind.SLICE, {"offset": (h * HALF) % width, "width": HALF}, (source,)))
    prefix = b.add("dp_prefix", PipeKind.MERGE, {}, halves)
    cmd = b.add("dp_cmd", PipeKind.SLICE, {"offset": 0, "width": 2}, (b.router("dp_cmd_r", last),))
    out_len = b.add("dp_len", PipeKind.SLICE, {"offset": 0, "width": LENGTH_WIDTH}, (b.router("dp_len_r", last),))
    b.add("dp_packet_out", PipeKind.PACKET_OUT, {"prefix_len": params.prefix_len, "mtu": params.mtu}, (cmd, prefix, out_len))

    rams = [RamDecl(m.id, m.width, m.entries, m.latency) for m in blocks if m.kind == "ram"]
    cams = [CamDecl(m.id, m.width, m.entries, m.latency, m.impl) for m in blocks if m.kind == "cam"]
    return PipelineArch.build(b.nodes, rams, cams)


def sweep_flex(base: FlexParams, stages: Iterable[int], alus: Iterable[int]) -> list[tuple[FlexParams, PipelineArch]]:
    """Architectures for every (stages, alus_per_stage) combination."""
    family = []
    alus = list(alus)
    for m in stages:
        for n in alus:
            params = replace(base, stages=m, alus_per_stage=n)
            family.append((params, gen_flex_arch(params)))
    return family
