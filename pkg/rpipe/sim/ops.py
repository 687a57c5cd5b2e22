"""Bit-vector semantics of ALU opcodes and conversion nodes."""

from __future__ import annotations

from typing import Sequence

from rpipe.ir.nodes import Opcode, mask


def to_signed(value: int, width: int) -> int:
    return value - (1 << width) if value >> (width - 1) & 1 else value


def eval_op(opcode: Opcode, operands: Sequence[int], width: int) -> int:
    """Evaluate ``opcode`` on ``width``-bit operands (MUX: cond is 1 bit)."""
    m = mask(width)
    if opcode is Opcode.MUX:
        cond, t, f = operands
        if cond >> 1 or t > m or f > m:
            raise ValueError(f"MUX operands exceed their widths: {operands}")
        return t if cond else f
    for value in operands:
        if not 0 <= value <= m:
            raise ValueError(f"{opcode} operand {value:#x} exceeds {width} bits")
    a = operands[0]
    match opcode:
        case Opcode.NOT:
            return ~a & m
        case Opcode.NEG:
            return -a & m
    b = operands[1]
    match opcode:
        case Opcode.ADD:
            return (a + b) & m
        case Opcode.SUB:
            return (a - b) & m
        case Opcode.MUL:
            return (a * b) & m
        case Opcode.AND:
            return a & b
        case Opcode.OR:
            return a | b
        case Opcode.XOR:
            return a ^ b
        case Opcode.SHL:
            return 0 if b >= width else (a << b) & m
        case Opcode.SHR:
            return 0 if b >= width else a >> b
        case Opcode.EQ:
            return int(a == b)
        case Opcode.NEQ:
            return int(a != b)
        case Opcode.LTU:
            return int(a < b)
        case Opcode.LEU:
            return int(a <= b)
        case Opcode.LTS:
            return int(to_signed(a, width) < to_signed(b, width))
        case Opcode.LES:
            return int(to_signed(a, width) <= to_signed(b, width))
    raise ValueError(f"unknown opcode {opcode!r}")


def slice_bits(value: int, offset: int, width: int) -> int:
    return (value >> offset) & mask(width)


def merge_bits(values: Sequence[int], widths: Sequence[int]) -> int:
    """Concatenate with the first value in the least significant bits."""
    out, shift = 0, 0
    for value, width in zip(values, widths):
        out |= (value & mask(width)) << shift
        shift += width
    return out


def extend_bits(value: int, from_width: int, to_width: int, signed: bool) -> int:
    if signed and value >> (from_width - 1) & 1:
        return value | (mask(to_width) ^ mask(from_width))
    return value
