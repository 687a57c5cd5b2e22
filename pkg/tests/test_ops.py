import pytest
from hypothesis import given
from hypothesis import strategies as st

from rpipe.ir import Opcode
from rpipe.sim.ops import eval_op, extend_bits, merge_bits, slice_bits, to_signed

WIDTHS = st.sampled_from([1, 8, 16, 32])


@st.composite
def binary_case(draw):
    width = draw(WIDTHS)
    a = draw(st.integers(0, (1 << width) - 1))
    b = draw(st.integers(0, (1 << width) - 1))
    return width, a, b


def reference(op: Opcode, a: int, b: int, width: int) -> int:
    modulus = 1 << width
    signed_a, signed_b = to_signed(a, width), to_signed(b, width)
    return {
        Opcode.ADD: (a + b) % modulus,
        Opcode.SUB: (a - b) % modulus,
        Opcode.MUL: (a * b) % modulus,
        Opcode.AND: a & b,
        Opcode.OR: a | b,
        Opcode.XOR: a ^ b,
        Opcode.SHL: (a << b) % modulus if b < width else 0,
        Opcode.SHR: a >> b if b < width else 0,
        Opcode.EQ: int(a == b),
        Opcode.NEQ: int(a != b),
        Opcode.LTU: int(a < b),
        Opcode.LEU: int(a <= b),
        Opcode.LTS: int(signed_a < signed_b),
        Opcode.LES: int(signed_a <= signed_b),
    }[op]


BINARY_OPS = [op for op in Opcode if op not in (Opcode.NOT, Opcode.NEG, Opcode.MUX)]


@pytest.mark.parametrize("op", BINARY_OPS, ids=str)
@given(case=binary_case())
def test_binary_ops_match_reference(op, case):
    width, a, b = case
    assert eval_op(op, (a, b), width) == reference(op, a, b, width)


@given(case=binary_case())
def test_unary_ops(case):
    width, a, _ = case
    assert eval_op(Opcode.NOT, (a,), width) == (1 << width) - 1 - a
    assert (eval_op(Opcode.NEG, (a,), width) + a) % (1 << width) == 0


def test_shift_by_width_or_more_is_zero():
    assert eval_op(Opcode.SHL, (1, 32), 32) == 0
    assert eval_op(Opcode.SHR, (0xFFFFFFFF, 40), 32) == 0
    assert eval_op(Opcode.SHR, (0x80000000, 31), 32) == 1


def test_signed_compare():
    assert eval_op(Opcode.LTS, (0xFF, 0x01), 8) == 1
    assert eval_op(Opcode.LTU, (0xFF, 0x01), 8) == 0
    assert eval_op(Opcode.LES, (0x80, 0x80), 8) == 1


def test_mux():
    assert eval_op(Opcode.MUX, (1, 5, 9), 16) == 5
    assert eval_op(Opcode.MUX, (0, 5, 9), 16) == 9
    with pytest.raises(ValueError):
        eval_op(Opcode.MUX, (2, 5, 9), 16)


def test_oversize_operand_rejected():
    with pytest.raises(ValueError):
        eval_op(Opcode.ADD, (0x100, 1), 8)


@given(value=st.integers(0, 2**32 - 1), offset=st.integers(0, 24))
def test_slice_then_merge_recovers_word(value, offset):
    low = slice_bits(value, 0, offset) if offset else 0
    high = slice_bits(value, offset, 32 - offset)
    widths = [offset, 32 - offset] if offset else [32]
    parts = [low, high] if offset else [high]
    assert merge_bits(parts, widths) == value


def test_merge_puts_first_value_low():
    assert merge_bits([0xAB, 0xCD], [8, 8]) == 0xCDAB


def test_extend():
    assert extend_bits(0x80, 8, 16, signed=True) == 0xFF80
    assert extend_bits(0x80, 8, 16, signed=False) == 0x0080
    assert extend_bits(0x7F, 8, 32, signed=True) == 0x7F
