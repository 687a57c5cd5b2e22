"""Python construction library for protocol programs.

Programs built here follow the word discipline of flex architectures: the
prefix is read as ``word_width``-bit words, computation happens on words and
1-bit flags, and the output prefix is a Merge of 16-bit halves each taken
from the low or high half of a word. Node ids carry a creation sequence
number so that id order equals construction order.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from rpipe.errors import ParameterError
from rpipe.ir.nodes import (
    COMPARE_OPS,
    LENGTH_WIDTH,
    ArrayDecl,
    Opcode,
    Port,
    ProtocolProgram,
    ProtoKind,
    ProtoNode,
    TableDecl,
    mask,
)

HALF = 16


class ProgramBuilder:
    def __init__(self, name: str, prefix_len: int, word_width: int = 32) -> None:
        if prefix_len * 8 % word_width or word_width % HALF:
            raise ParameterError(f"prefix of {prefix_len} bytes does not split into {word_width}-bit words")
        self.name = name
        self.prefix_len = prefix_len
        self.word_width = word_width
        self._nodes: list[ProtoNode] = []
        self._arrays: dict[str, ArrayDecl] = {}
        self._tables: dict[str, TableDecl] = {}
        self._consts: dict[tuple[int, int], Port] = {}
        self._words: dict[int, Port] = {}
        self._length_word: Port | None = None
        self._widths: dict[Port, int] = {}
        packet_in = self._add("packet_in", ProtoKind.PACKET_IN, {"prefix_len": prefix_len}, (), width=None)
        self.prefix = Port(packet_in.node, 0)
        self.length = Port(packet_in.node, 1)
        self._widths[self.prefix] = prefix_len * 8
        self._widths[self.length] = LENGTH_WIDTH

    # -- plumbing

    def _add(self, hint: str, kind: ProtoKind, attrs: dict, inputs: Sequence[Port], width: int | None) -> Port:
        nid = f"{self.name}_{len(self._nodes):03d}_{hint}"
        self._nodes.append(ProtoNode(nid, kind, attrs, tuple(inputs)))
        port = Port(nid, 0)
        if width is not None:
            self._widths[port] = width
        return port

    def width(self, port: Port) -> int:
        return self._widths[port]

    @property
    def num_words(self) -> int:
        return self.prefix_len * 8 // self.word_width

    @property
    def num_halves(self) -> int:
        return self.prefix_len * 8 // HALF

    # -- values

    def const(self, value: int, width: int | None = None) -> Port:
        width = self.word_width if width is None else width
        key = (value & mask(width), width)
        if key not in self._consts:
            self._consts[key] = self._add(f"c{key[0]:x}", ProtoKind.CONSTANT, {"value": key[0], "width": width}, (), width)
        return self._consts[key]

    def flag_const(self, value: bool) -> Port:
        return self.const(int(value), 1)

    def word(self, index: int) -> Port:
        """Packet bytes [4i, 4i+4) for 32-bit words, least significant byte first."""
        if not 0 <= index < self.num_words:
            raise ParameterError(f"word {index} outside a {self.prefix_len}-byte prefix")
        if index not in self._words:
            self._words[index] = self.slice(self.prefix, index * self.word_width, self.word_width, f"w{index}")
        return self._words[index]

    def length_word(self) -> Port:
        if self._length_word is None:
            self._length_word = self.extend(self.length, self.word_width)
        return self._length_word

    def slice(self, source: Port, offset: int, width: int, hint: str = "slice") -> Port:
        return self._add(hint, ProtoKind.SLICE, {"offset": offset, "width": width}, (source,), width)

    def extend(self, source: Port, width: int, signed: bool = False) -> Port:
        return self._add("ext", ProtoKind.EXTEND, {"width": width, "signed": signed}, (source,), width)

    def merge(self, parts: Sequence[Port]) -> Port:
        width = sum(self.width(p) for p in parts)
        return self._add("merge", ProtoKind.MERGE, {}, parts, width)

    # -- ALU operations

    def op(self, opcode: Opcode, a: Port, b: Port | None = None) -> Port:
        hint = opcode.lower()
        if b is None:
            return self._add(hint, ProtoKind.UNARY, {"op": opcode}, (a,), self.width(a))
        width = 1 if opcode in COMPARE_OPS else self.width(a)
        return self._add(hint, ProtoKind.BINARY, {"op": opcode}, (a, b), width)

    def _word_operand(self, value: Port | int) -> Port:
        return self.const(value) if isinstance(value, int) else value

    def and_(self, a: Port, b: Port | int) -> Port:
        return self.op(Opcode.AND, a, self._word_operand(b))

    def or_(self, a: Port, b: Port | int) -> Port:
        return self.op(Opcode.OR, a, self._word_operand(b))

    def add(self, a: Port, b: Port | int) -> Port:
        return self.op(Opcode.ADD, a, self._word_operand(b))

    def shr(self, a: Port, amount: int) -> Port:
        return self.op(Opcode.SHR, a, self.const(amount))

    def shl(self, a: Port, amount: int) -> Port:
        return self.op(Opcode.SHL, a, self.const(amount))

    def eq(self, a: Port, b: Port | int) -> Port:
        return self.op(Opcode.EQ, a, self._word_operand(b))

    def ltu(self, a: Port | int, b: Port | int) -> Port:
        return self.op(Opcode.LTU, self._word_operand(a), self._word_operand(b))

    def leu(self, a: Port | int, b: Port | int) -> Port:
        return self.op(Opcode.LEU, self._word_operand(a), self._word_operand(b))

    def mux(self, cond: Port, then: Port | int, otherwise: Port | int) -> Port:
        then, otherwise = self._word_operand(then), self._word_operand(otherwise)
        return self._add("mux", ProtoKind.CONDITIONAL, {}, (cond, then, otherwise), self.width(then))

    def lo(self, word: Port) -> Port:
        return self.and_(word, 0xFFFF)

    def hi(self, word: Port) -> Port:
        return self.shr(word, HALF)

    def field_eq(self, word: Port, field_mask: int, value: int) -> Port:
        """Flag: (word & mask) == value."""
        return self.eq(self.and_(word, field_mask), value)

    def all_of(self, flags: Sequence[Port]) -> Port:
        """Flag conjunction on word ALUs: count failed flags, test for zero."""
        if len(flags) == 1:
            return flags[0]
        misses = [self.mux(f, 0, 1) for f in flags]
        return self.eq(self.sum_tree(misses), 0)

    def sum_tree(self, terms: Sequence[Port]) -> Port:
        level = list(terms)
        while len(level) > 1:
            paired = [self.add(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
            if len(level) % 2:
                paired.append(level[-1])
            level = paired
        return level[0]

    def ones_complement(self, halves: Sequence[Port], base: int = 0) -> Port:
        """Internet checksum of 16-bit values held in low word halves.

        ``base`` is a precomputed partial sum of the constant fields. The
        result carries the inverted checksum in its low half.
        """
        terms = list(halves) + ([self.const(base)] if base else [])
        total = self.sum_tree(terms)
        for _ in range(2):
            total = self.add(self.lo(total), self.hi(total))
        return self.and_(self.op(Opcode.NOT, total), 0xFFFF)

    def put_high(self, low_value: Port) -> Port:
        return self.shl(low_value, HALF)

    # -- state

    def array(self, array_id: str, elem_width: int, num_elems: int) -> ArrayDecl:
        decl = ArrayDecl(array_id, elem_width, num_elems)
        self._arrays[array_id] = decl
        return decl

    def table(self, table_id: str, key_width: int, num_entries: int) -> TableDecl:
        decl = TableDecl(table_id, key_width, num_entries)
        self._tables[table_id] = decl
        return decl

    def index(self, word: Port, index_width: int) -> Port:
        return self.slice(word, 0, index_width, "idx")

    def read(self, array_id: str, index_word: Port) -> Port:
        decl = self._arrays[array_id]
        idx = self.index(index_word, decl.index_width)
        return self._add("read", ProtoKind.ARRAY_READ, {"array": array_id}, (idx,), decl.elem_width)

    def write(self, array_id: str, index_word: Port, value: Port, enable: Port | None = None) -> None:
        decl = self._arrays[array_id]
        idx = self.index(index_word, decl.index_width)
        inputs = (idx, value) if enable is None else (idx, value, enable)
        self._add("write", ProtoKind.ARRAY_WRITE, {"array": array_id}, inputs, None)

    def lookup(self, table_id: str, key: Port) -> Port:
        """Table lookup zero-extended to a word: valid bit at idx_width, index below."""
        decl = self._tables[table_id]
        raw = self._add("lookup", ProtoKind.TABLE_LOOKUP, {"table": table_id}, (key,), decl.result_width)
        return self.extend(raw, self.word_width)

    def insert(self, table_id: str, key: Port, enable: Port | None = None) -> Port:
        decl = self._tables[table_id]
        hint = self.index(self.const(0), decl.idx_width)
        inputs = (key, hint) if enable is None else (key, hint, enable)
        raw = self._add("insert", ProtoKind.TABLE_WRITE, {"table": table_id}, inputs, decl.result_width)
        return self.extend(raw, self.word_width)

    def hit(self, table_id: str, result_word: Port) -> Port:
        """Flag: a lookup result word carries the valid bit."""
        return self.leu(1 << self._tables[table_id].idx_width, result_word)

    # -- output

    def emit(
        self,
        halves: Mapping[int, Port] | None = None,
        cmd: Port | int = 0,
        length: Port | None = None,
    ) -> ProtocolProgram:
        """Finish the program.

        ``halves`` maps an output half index h to a word whose half at bit
        offset 16*(h % 2) supplies bytes [2h, 2h+2); unlisted halves pass the
        input through. ``cmd`` and ``length`` are words (default: forward, input length).
        """
        halves = dict(halves or {})
        parts = []
        for h in range(self.num_halves):
            source = halves.pop(h, None)
            if source is None:
                source = self.word(h * HALF // self.word_width)
            parts.append(self.slice(source, (h * HALF) % self.word_width, HALF, f"h{h}"))
        if halves:
            raise ParameterError(f"half indices {sorted(halves)} outside the prefix")
        prefix = self.merge(parts)
        cmd_value = self.slice(self._word_operand(cmd), 0, 2, "cmd")
        length_value = self.slice(length if length is not None else self.length_word(), 0, LENGTH_WIDTH, "len")
        self._add("packet_out", ProtoKind.PACKET_OUT, {"prefix_len": self.prefix_len}, (cmd_value, prefix, length_value), None)
        return ProtocolProgram.build(self._nodes, self._arrays.values(), self._tables.values())


def words_of(data: bytes) -> list[int]:
    """Little-endian 32-bit words of ``data`` (zero padded to a multiple of four)."""
    padded = data.ljust(-(-len(data) // 4) * 4, b"\0")
    return [int.from_bytes(padded[i : i + 4], "little") for i in range(0, len(padded), 4)]


def halves_of(data: bytes) -> list[int]:
    padded = data.ljust(-(-len(data) // 2) * 2, b"\0")
    return [int.from_bytes(padded[i : i + 2], "little") for i in range(0, len(padded), 2)]


def ones_sum(values: Iterable[int]) -> int:
    total = sum(values)
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total
