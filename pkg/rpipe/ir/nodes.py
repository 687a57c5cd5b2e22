"""Node and declaration types for protocol programs and pipeline architectures.

Both graphs are sets of nodes keyed by id. A node input is a ``Port``: the id
of the producing node and the index of its output (only PacketIn has two
outputs: 0 = prefix, 1 = length). Values are arbitrary-precision integers;
bit 0 is the least significant bit and Merge inputs are listed low to high.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from rpipe._compat import StrEnum
from typing import Any, Iterable, Iterator, NamedTuple

MAX_WIDTH = 1024
LENGTH_WIDTH = 16
CMD_WIDTH = 2
DEFAULT_MTU = 1500


def clog2(n: int) -> int:
    """Index width for ``n`` elements (never below one bit)."""
    return max(1, (n - 1).bit_length())


def mask(width: int) -> int:
    return (1 << width) - 1


class Opcode(StrEnum):
    ADD = "ADD"
    SUB = "SUB"
    MUL = "MUL"
    AND = "AND"
    OR = "OR"
    XOR = "XOR"
    NOT = "NOT"
    NEG = "NEG"
    SHL = "SHL"
    SHR = "SHR"
    EQ = "EQ"
    NEQ = "NEQ"
    LTU = "LTU"
    LEU = "LEU"
    LTS = "LTS"
    LES = "LES"
    MUX = "MUX"


UNARY_OPS = frozenset({Opcode.NOT, Opcode.NEG})
COMPARE_OPS = frozenset({Opcode.EQ, Opcode.NEQ, Opcode.LTU, Opcode.LEU, Opcode.LTS, Opcode.LES})
BINARY_OPS = frozenset(set(Opcode) - UNARY_OPS - {Opcode.MUX})


class ProtoKind(StrEnum):
    CONSTANT = "Constant"
    SLICE = "Slice"
    MERGE = "Merge"
    EXTEND = "Extend"
    UNARY = "Unary"
    BINARY = "Binary"
    CONDITIONAL = "Conditional"
    PACKET_IN = "PacketIn"
    PACKET_OUT = "PacketOut"
    ARRAY_READ = "ArrayRead"
    ARRAY_WRITE = "ArrayWrite"
    TABLE_LOOKUP = "TableLookup"
    TABLE_WRITE = "TableWrite"


class PipeKind(StrEnum):
    REGISTER = "Register"
    ROUTER = "Router"
    CONSTANT = "Constant"
    SLICE = "Slice"
    MERGE = "Merge"
    EXTEND = "Extend"
    ALU = "Alu"
    PACKET_IN = "PacketIn"
    PACKET_OUT = "PacketOut"
    RAM_ACCESS = "RamAccess"
    CAM_ACCESS = "CamAccess"


class CamImpl(StrEnum):
    REGISTER = "RegisterCam"
    HASH = "HashCam"


COMPUTE_KINDS = frozenset({ProtoKind.UNARY, ProtoKind.BINARY, ProtoKind.CONDITIONAL})
STATE_WRITE_KINDS = frozenset({ProtoKind.ARRAY_WRITE, ProtoKind.TABLE_WRITE})


class Port(NamedTuple):
    node: str
    port: int = 0


def _as_opcode(value: Any) -> Any:
    try:
        return Opcode(value)
    except ValueError:
        return value  # left for the validator to report


def _canonical(self: Any, defaults: dict[str, Any]) -> None:
    """Fill optional attributes and coerce opcodes so equal nodes compare equal."""
    attrs = dict(self.attrs)
    for key, value in defaults.items():
        attrs.setdefault(key, value)
    if "op" in attrs:
        attrs["op"] = _as_opcode(attrs["op"])
    if "ops" in attrs:
        attrs["ops"] = [_as_opcode(o) for o in attrs["ops"]]
    object.__setattr__(self, "attrs", attrs)
    object.__setattr__(self, "inputs", tuple(Port(*p) for p in self.inputs))


@dataclass(frozen=True)
class ProtoNode:
    id: str
    kind: ProtoKind
    attrs: dict[str, Any] = field(default_factory=dict)
    inputs: tuple[Port, ...] = ()

    def __post_init__(self) -> None:
        _canonical(self, {"signed": False} if self.kind == ProtoKind.EXTEND else {})

    @property
    def op(self) -> Opcode:
        """Operation an ALU must perform to produce this node."""
        if self.kind is ProtoKind.CONDITIONAL:
            return Opcode.MUX
        return Opcode(self.attrs["op"])

    @property
    def output_ports(self) -> int:
        return proto_output_ports(self.kind)


def proto_output_ports(kind: ProtoKind) -> int:
    if kind is ProtoKind.PACKET_IN:
        return 2
    if kind in (ProtoKind.PACKET_OUT, ProtoKind.ARRAY_WRITE):
        return 0
    return 1


@dataclass(frozen=True)
class ArrayDecl:
    id: str
    elem_width: int
    num_elems: int

    @property
    def index_width(self) -> int:
        return clog2(self.num_elems)


@dataclass(frozen=True)
class TableDecl:
    id: str
    key_width: int
    num_entries: int

    @property
    def idx_width(self) -> int:
        return clog2(self.num_entries)

    @property
    def result_width(self) -> int:
        return self.idx_width + 1


@dataclass(frozen=True)
class ProtocolProgram:
    nodes: dict[str, ProtoNode] = field(default_factory=dict)
    arrays: dict[str, ArrayDecl] = field(default_factory=dict)
    tables: dict[str, TableDecl] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        nodes: Iterable[ProtoNode],
        arrays: Iterable[ArrayDecl] = (),
        tables: Iterable[TableDecl] = (),
    ) -> "ProtocolProgram":
        return cls(
            nodes={n.id: n for n in nodes},
            arrays={a.id: a for a in arrays},
            tables={t.id: t for t in tables},
        )

    def __iter__(self) -> Iterator[ProtoNode]:
        return iter(self.nodes.values())

    def of_kind(self, kind: ProtoKind) -> list[ProtoNode]:
        return sorted((n for n in self.nodes.values() if n.kind is kind), key=lambda n: n.id)

    def only(self, kind: ProtoKind) -> ProtoNode:
        found = self.of_kind(kind)
        if len(found) != 1:
            raise LookupError(f"expected exactly one {kind} node, found {len(found)}")
        return found[0]

    @property
    def prefix_len(self) -> int:
        return self.only(ProtoKind.PACKET_IN).attrs["prefix_len"]


@dataclass(frozen=True)
class PipeNode:
    id: str
    kind: PipeKind
    attrs: dict[str, Any] = field(default_factory=dict)
    inputs: tuple[Port, ...] = ()

    def __post_init__(self) -> None:
        _canonical(self, _PIPE_DEFAULTS.get(self.kind, {}))

    @property
    def ops(self) -> tuple[Opcode, ...]:
        return tuple(Opcode(o) for o in self.attrs.get("ops", ()))

    @property
    def is_write(self) -> bool:
        return bool(self.attrs.get("write", False))

    @property
    def runtime_constant(self) -> bool:
        return self.kind is PipeKind.CONSTANT and self.attrs.get("value") is None

    @property
    def output_ports(self) -> int:
        if self.kind is PipeKind.PACKET_IN:
            return 2
        if self.kind is PipeKind.PACKET_OUT:
            return 0
        if self.kind is PipeKind.RAM_ACCESS and self.is_write:
            return 0
        return 1


_PIPE_DEFAULTS: dict[str, dict[str, Any]] = {
    PipeKind.CONSTANT: {"value": None},
    PipeKind.EXTEND: {"signed": False},
    PipeKind.ALU: {"latency": 1},
    PipeKind.PACKET_IN: {"mtu": DEFAULT_MTU},
    PipeKind.PACKET_OUT: {"mtu": DEFAULT_MTU},
    PipeKind.RAM_ACCESS: {"write": False},
    PipeKind.CAM_ACCESS: {"write": False},
}


def alu_operand_slots(node: PipeNode) -> tuple[int, ...]:
    """Input ordinals holding the a/b operands (MUX ALUs put cond first)."""
    ops = set(node.ops)
    offset = 1 if Opcode.MUX in ops else 0
    if Opcode.MUX in ops or ops - UNARY_OPS:
        return (offset, offset + 1)
    return (offset,)


def alu_arity(ops: Iterable[Opcode]) -> int:
    ops = set(ops)
    if Opcode.MUX in ops:
        return 3
    if ops - UNARY_OPS:
        return 2
    return 1


def alu_output_width(width: int, ops: Iterable[Opcode]) -> int:
    ops = set(ops)
    if ops and ops <= COMPARE_OPS:
        return 1
    return width


@dataclass(frozen=True)
class RamDecl:
    id: str
    elem_width: int
    num_elems: int
    latency: int = 1

    @property
    def index_width(self) -> int:
        return clog2(self.num_elems)


@dataclass(frozen=True)
class CamDecl:
    id: str
    key_width: int
    num_entries: int
    latency: int = 1
    impl: CamImpl = CamImpl.REGISTER

    @property
    def idx_width(self) -> int:
        return clog2(self.num_entries)

    @property
    def result_width(self) -> int:
        return self.idx_width + 1


@dataclass(frozen=True)
class PipelineArch:
    nodes: dict[str, PipeNode] = field(default_factory=dict)
    rams: dict[str, RamDecl] = field(default_factory=dict)
    cams: dict[str, CamDecl] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        nodes: Iterable[PipeNode],
        rams: Iterable[RamDecl] = (),
        cams: Iterable[CamDecl] = (),
    ) -> "PipelineArch":
        return cls(
            nodes={n.id: n for n in nodes},
            rams={r.id: r for r in rams},
            cams={c.id: c for c in cams},
        )

    def __iter__(self) -> Iterator[PipeNode]:
        return iter(self.nodes.values())

    def of_kind(self, kind: PipeKind) -> list[PipeNode]:
        return sorted((n for n in self.nodes.values() if n.kind is kind), key=lambda n: n.id)

    def only(self, kind: PipeKind) -> PipeNode:
        found = self.of_kind(kind)
        if len(found) != 1:
            raise LookupError(f"expected exactly one {kind} node, found {len(found)}")
        return found[0]

    def latency(self, node: PipeNode) -> int:
        if node.kind is PipeKind.REGISTER:
            return 1
        if node.kind is PipeKind.ALU:
            return int(node.attrs.get("latency", 1))
        if node.kind is PipeKind.RAM_ACCESS:
            return self.rams[node.attrs["ram"]].latency
        if node.kind is PipeKind.CAM_ACCESS:
            return self.cams[node.attrs["cam"]].latency
        return 0

    def edge_count(self) -> int:
        return sum(len(n.inputs) for n in self.nodes.values())
