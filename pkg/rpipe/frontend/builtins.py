"""Bundled example protocol programs.

All programs parse a standard Ethernet/IPv4 frame with a 20-byte IP header
(TCP or UDP at byte 34) from an 80-byte prefix using 32-bit words. Wire
fields therefore appear byte-swapped inside words: the ethertype 0x0800 is
the half value 0x0008, TCP port 80 is 0x5000. State contents use the same
in-word byte order.

Packets that fail any header check (including packets shorter than the
headers, which read as zeros) are forwarded unmodified.
"""

from __future__ import annotations

from typing import Callable, Mapping

from rpipe.errors import UnknownBuiltinError
from rpipe.frontend.builder import HALF, ProgramBuilder, halves_of, ones_sum
from rpipe.ir.nodes import Port, ProtocolProgram

PREFIX_LEN = 80
TABLE_ENTRIES = 256

ETHERTYPE_IPV4 = 0x0008
PROTO_TCP = 0x06000000
PROTO_UDP = 0x11000000
MEMCACHED_PORT = 0xCB2B  # 11211 on the wire

# packet half indices (bytes 2h, 2h+1)
MAC_HALVES = (0, 1, 2, 3, 4, 5)
IP_SRC_HALVES = (13, 14)
IP_DST_HALVES = (15, 16)
SPORT_HALF = 17
DPORT_HALF = 18


def _ipv4_l4_checks(b: ProgramBuilder, proto: int) -> list[Port]:
    return [
        b.field_eq(b.word(3), 0xFFFF, ETHERTYPE_IPV4),
        b.field_eq(b.word(5), 0xFF000000, proto),
    ]


def _half_at(b: ProgramBuilder, src: int, dst: int) -> Port:
    """Word carrying packet half ``src`` at the position of output half ``dst``."""
    word = b.word(src * HALF // b.word_width)
    if src % 2 == dst % 2:
        return word
    return b.shr(word, HALF) if src % 2 else b.shl(word, HALF)


def _half_value(b: ProgramBuilder, h: int) -> Port:
    """Packet half ``h`` as a low-half word."""
    word = b.word(h * HALF // b.word_width)
    return b.hi(word) if h % 2 else b.lo(word)


def _const_half(b: ProgramBuilder, h: int, value: int) -> Port:
    return b.const(value << (HALF * (h % 2)))


def _swap_addresses(b: ProgramBuilder) -> dict[int, Port]:
    """Output halves answering the sender: MACs, IPs and L4 ports swapped."""
    out = {}
    for d, s in zip(MAC_HALVES, MAC_HALVES[3:] + MAC_HALVES[:3]):
        out[d] = _half_at(b, s, d)
    for d, s in zip(IP_SRC_HALVES + IP_DST_HALVES, IP_DST_HALVES + IP_SRC_HALVES):
        out[d] = _half_at(b, s, d)
    out[SPORT_HALF] = _half_at(b, DPORT_HALF, SPORT_HALF)
    out[DPORT_HALF] = _half_at(b, SPORT_HALF, DPORT_HALF)
    return out


def _guarded(b: ProgramBuilder, ok: Port, crafted: Mapping[int, Port]) -> dict[int, Port]:
    """Each crafted half when ``ok``, the input half otherwise."""
    return {h: b.mux(ok, word, b.word(h * HALF // b.word_width)) for h, word in sorted(crafted.items())}


def nat_program() -> ProtocolProgram:
    """Destination port translation for TCP with incremental checksum update.

    ``nat_table`` maps the destination port (low half of the key) to an
    entry; ``nat_port`` holds the new port in the low half and ``nat_csum``
    the checksum correction c replicated in both halves (c * 0x10001), so a
    single 32-bit ADD of the replicated old checksum performs the
    ones-complement addition in the high half.
    """
    b = ProgramBuilder("nat", PREFIX_LEN)
    table = b.table("nat_table", b.word_width, TABLE_ENTRIES)
    b.array("nat_port", b.word_width, TABLE_ENTRIES)
    b.array("nat_csum", b.word_width, TABLE_ENTRIES)
    w9, w12 = b.word(9), b.word(12)

    proto = b.and_(b.word(5), 0xFF000000)
    ethertype = b.and_(b.word(3), 0xFFFF)
    key = b.and_(w9, 0xFFFF)
    csum_high = b.and_(w12, 0xFFFF0000)
    csum_low = b.shr(w12, HALF)

    is_tcp = b.eq(proto, PROTO_TCP)
    is_ipv4 = b.eq(ethertype, ETHERTYPE_IPV4)
    csum_both = b.or_(csum_high, csum_low)
    entry = b.lookup("nat_table", key)

    # ok <=> is_ipv4 and is_tcp and valid(entry): a valid entry is >= 2^iw
    gated = b.mux(is_tcp, entry, 0)
    bound = b.mux(is_ipv4, (1 << table.idx_width) - 1, 0xFFFFFFFF)
    new_port = b.read("nat_port", entry)
    correction = b.read("nat_csum", entry)

    ok = b.ltu(bound, gated)
    new_csum = b.add(csum_both, correction)

    out_port = b.mux(ok, new_port, w9)
    out_csum = b.mux(ok, new_csum, w12)
    return b.emit({DPORT_HALF: out_port, 25: out_csum})


RST_LENGTH = 54
# version/IHL, total length 40, id 0, DF, ttl 64 / proto TCP
RST_IP_HALVES = {7: 0x0045, 8: 0x2800, 9: 0x0000, 10: 0x0040, 11: 0x0640}
# data offset 5 / flags RST, window 0, urgent 0, ack 0
RST_TCP_HALVES = {21: 0, 22: 0, 23: 0x0450, 24: 0, 26: 0}
TCP_PSEUDO = (0x0600, 0x1400)  # zero/proto, TCP length 20


def firewall_program() -> ProtocolProgram:
    """Reset blocked TCP flows.

    ``fw_table`` keys are (sport | dport << 16) in in-word byte order. A hit
    replaces the packet with a TCP RST sent back to the source: addresses and
    ports swapped, sequence number taken from the acknowledgment, both
    checksums computed from scratch.
    """
    b = ProgramBuilder("firewall", PREFIX_LEN)
    b.table("fw_table", b.word_width, TABLE_ENTRIES)
    key = b.or_(b.shr(b.word(8), HALF), b.shl(b.word(9), HALF))
    entry = b.lookup("fw_table", key)
    ok = b.all_of(_ipv4_l4_checks(b, PROTO_TCP) + [b.hit("fw_table", entry)])

    addresses = [_half_value(b, h) for h in IP_SRC_HALVES + IP_DST_HALVES]
    ip_csum = b.ones_complement(addresses, ones_sum(RST_IP_HALVES.values()))
    ack = [_half_value(b, 21), _half_value(b, 22)]
    ports = [_half_value(b, SPORT_HALF), _half_value(b, DPORT_HALF)]
    tcp_csum = b.ones_complement(
        addresses + ports + ack, ones_sum([*TCP_PSEUDO, *RST_TCP_HALVES.values()])
    )

    crafted = _swap_addresses(b)
    crafted.update({h: _const_half(b, h, v) for h, v in {**RST_IP_HALVES, **RST_TCP_HALVES}.items()})
    crafted[12] = ip_csum
    crafted[19] = _half_at(b, 21, 19)  # seq <- old ack
    crafted[20] = _half_at(b, 22, 20)
    crafted[25] = b.put_high(tcp_csum)

    return b.emit(
        _guarded(b, ok, crafted),
        cmd=b.mux(ok, 1, 0),
        length=b.mux(ok, RST_LENGTH, b.length_word()),
    )


MEMCACHED_REPLY_AT = 50
REPLY_TEMPLATE = b"VALUE \0\0\0\0 0 4\r\n\0\0\0\0\r\nEND\r\n"
REPLY_LENGTH = MEMCACHED_REPLY_AT + len(REPLY_TEMPLATE)
# total length, id 0, DF, ttl 64 / proto UDP
REPLY_IP_HALVES = {7: 0x0045, 8: (REPLY_LENGTH - 14) << 8, 9: 0x0000, 10: 0x0040, 11: 0x1140}
REPLY_UDP_HALVES = {19: (REPLY_LENGTH - 34) << 8, 20: 0}
KEY_HALVES = (28, 29)
VALUE_HALVES = (33, 34)


def _memcached_key(b: ProgramBuilder) -> Port:
    """Four key bytes following ``get `` at byte 54."""
    return b.or_(b.shr(b.word(13), HALF), b.shl(b.word(14), HALF))


def memcached_rx_program() -> ProtocolProgram:
    """Answer ``get`` requests for cached four-byte keys directly.

    ``mc_keys`` holds keys, ``mc_values`` the four value bytes of the
    matching entry. A hit turns the request into a reply carrying the value
    back to the client; a miss forwards the request to the server.
    """
    b = ProgramBuilder("memcached_rx", PREFIX_LEN)
    b.table("mc_keys", b.word_width, TABLE_ENTRIES)
    b.array("mc_values", b.word_width, TABLE_ENTRIES)
    key = _memcached_key(b)
    entry = b.lookup("mc_keys", key)
    value = b.read("mc_values", entry)
    checks = _ipv4_l4_checks(b, PROTO_UDP) + [
        b.field_eq(b.word(9), 0xFFFF, MEMCACHED_PORT),
        b.field_eq(b.word(12), 0xFFFF0000, int.from_bytes(b"ge", "little") << HALF),
        b.field_eq(b.word(13), 0xFFFF, int.from_bytes(b"t ", "little")),
        b.hit("mc_keys", entry),
    ]
    ok = b.all_of(checks)

    addresses = [_half_value(b, h) for h in IP_SRC_HALVES + IP_DST_HALVES]
    crafted = _swap_addresses(b)
    crafted.update({h: _const_half(b, h, v) for h, v in {**REPLY_IP_HALVES, **REPLY_UDP_HALVES}.items()})
    crafted[12] = b.ones_complement(addresses, ones_sum(REPLY_IP_HALVES.values()))
    first = MEMCACHED_REPLY_AT // 2
    for i, half in enumerate(halves_of(REPLY_TEMPLATE)):
        crafted[first + i] = _const_half(b, first + i, half)
    crafted[KEY_HALVES[0]] = key  # low half sits in an even slot
    crafted[KEY_HALVES[1]] = key
    crafted[VALUE_HALVES[0]] = b.shl(value, HALF)
    crafted[VALUE_HALVES[1]] = b.shr(value, HALF)

    return b.emit(
        _guarded(b, ok, crafted),
        cmd=b.mux(ok, 1, 0),
        length=b.mux(ok, REPLY_LENGTH, b.length_word()),
    )


def memcached_tx_program() -> ProtocolProgram:
    """Learn key/value pairs from ``VALUE`` responses leaving the server.

    Responses are forwarded unmodified; the key at byte 56 is inserted into
    ``mc_keys`` and the four value bytes at byte 66 stored in ``mc_values``
    under the allocated entry.
    """
    b = ProgramBuilder("memcached_tx", PREFIX_LEN)
    b.table("mc_keys", b.word_width, TABLE_ENTRIES)
    b.array("mc_values", b.word_width, TABLE_ENTRIES)
    value_tag = REPLY_TEMPLATE[:6]
    checks = _ipv4_l4_checks(b, PROTO_UDP) + [
        b.field_eq(b.word(8), 0xFFFF0000, MEMCACHED_PORT << HALF),
        b.field_eq(b.word(12), 0xFFFF0000, int.from_bytes(value_tag[:2], "little") << HALF),
        b.eq(b.word(13), int.from_bytes(value_tag[2:], "little")),
    ]
    is_response = b.all_of(checks)
    value = b.or_(b.shr(b.word(16), HALF), b.shl(b.word(17), HALF))
    entry = b.insert("mc_keys", b.word(14), enable=is_response)
    b.write("mc_values", entry, value, enable=b.hit("mc_keys", entry))
    return b.emit()


BUILTINS: dict[str, Callable[[], ProtocolProgram]] = {
    "nat": nat_program,
    "firewall": firewall_program,
    "memcached_rx": memcached_rx_program,
    "memcached_tx": memcached_tx_program,
}


def builtin_program(name: str) -> ProtocolProgram:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownBuiltinError(f"unknown builtin program {name!r}; choose from {', '.join(BUILTINS)}") from None
    return factory()


def passthrough_program(prefix_len: int = PREFIX_LEN) -> ProtocolProgram:
    """Forward every packet unchanged."""
    return ProgramBuilder("passthrough", prefix_len).emit()
