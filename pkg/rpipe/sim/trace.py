"""Packet traces: text trace files and seeded traffic generation."""

from __future__ import annotations

import random
from typing import Iterable, Sequence

from scapy.layers.inet import IP, TCP, UDP
from scapy.layers.l2 import Ether
from scapy.packet import Raw

from rpipe.errors import ArtifactSyntaxError
from rpipe.ir.serialize import decode_text

# small pools so generated traffic hits preloaded table entries
PORT_POOL = (53, 80, 443, 7777, 8080, 11211)
KEY_POOL = (b"k001", b"k002", b"abcd", b"zzzz")
ADDR_POOL = ("10.0.0.1", "10.0.0.2", "192.168.1.10", "172.16.5.4")
MAC_POOL = ("02:00:00:00:00:01", "02:00:00:00:00:02", "0a:1b:2c:3d:4e:5f")


def read_trace(text: bytes | str) -> list[bytes]:
    """One packet per line as hex; ``#`` starts a comment; blank lines are skipped."""
    packets = []
    for lineno, line in enumerate(decode_text(text).splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            packets.append(bytes.fromhex(body))
        except ValueError as exc:
            raise ArtifactSyntaxError(str(exc), lineno, 1) from None
    return packets


def write_trace(packets: Iterable[bytes], header: str | None = None) -> str:
    lines = [f"# {header}"] if header else []
    lines.extend(p.hex() for p in packets)
    return "\n".join(lines) + "\n"


def _payload(rng: random.Random, proto: int, keys: Sequence[bytes]) -> bytes:
    choice = rng.random()
    key = rng.choice(keys)
    # memcached UDP frame header: request id, sequence 0, one datagram, reserved
    frame = rng.randbytes(2) + b"\0\0\0\x01\0\0"
    if proto == 17 and choice < 0.3:
        return frame + b"get " + key + b"\r\n"
    if proto == 17 and choice < 0.5:
        value = rng.randbytes(4)
        return frame + b"VALUE " + key + b" 0 4\r\n" + value + b"\r\nEND\r\n"
    return rng.randbytes(rng.randrange(0, 48))


def shaped_packet(rng: random.Random, keys: Sequence[bytes] = KEY_POOL) -> bytes:
    """An Ethernet/IPv4 TCP or UDP packet drawn from the small field pools."""
    proto = rng.choice((6, 6, 17, 17, 1))
    sport, dport = rng.choice(PORT_POOL), rng.choice(PORT_POOL)
    eth = Ether(src=rng.choice(MAC_POOL), dst=rng.choice(MAC_POOL))
    ip = IP(src=rng.choice(ADDR_POOL), dst=rng.choice(ADDR_POOL), ttl=rng.randrange(1, 256), id=rng.randrange(1 << 16))
    if proto == 6:
        l4 = TCP(sport=sport, dport=dport, seq=rng.randrange(1 << 32), ack=rng.randrange(1 << 32), flags="PA")
    elif proto == 17:
        l4 = UDP(sport=sport, dport=dport)
    else:
        ip.proto = 1
        l4 = Raw(rng.randbytes(8))
    pkt = eth / ip / l4 / Raw(_payload(rng, proto, keys))
    return bytes(pkt)


def random_trace(seed: int, count: int, keys: Sequence[bytes] = KEY_POOL, shaped: float = 0.8) -> list[bytes]:
    """Deterministic mix of protocol-shaped packets and raw random bytes."""
    rng = random.Random(seed)
    packets = []
    for _ in range(count):
        if rng.random() < shaped:
            packets.append(shaped_packet(rng, keys))
        else:
            packets.append(rng.randbytes(rng.randrange(0, 129)))
    return packets
