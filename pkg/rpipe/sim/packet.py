"""Packets as seen by the parser and produced by the deparser.

Packet byte i occupies prefix bits [8i, 8i+8); the prefix value is the
little-endian integer of the first prefix_len bytes, zero padded.
"""

from __future__ import annotations

from dataclasses import dataclass

from rpipe.errors import PacketError
from rpipe.ir.nodes import DEFAULT_MTU, LENGTH_WIDTH, mask

CMD_FORWARD = 0
CMD_TRUNCATE = 1
CMD_DROP = 2


@dataclass(frozen=True)
class Packet:
    data: bytes
    mtu: int = DEFAULT_MTU

    def __post_init__(self) -> None:
        if len(self.data) > self.mtu:
            raise PacketError(f"packet of {len(self.data)} bytes exceeds MTU {self.mtu}")

    @property
    def length(self) -> int:
        return len(self.data)

    def prefix(self, prefix_len: int) -> int:
        return int.from_bytes(self.data[:prefix_len].ljust(prefix_len, b"\0"), "little")

    def length_field(self) -> int:
        return min(len(self.data), mask(LENGTH_WIDTH))


@dataclass(frozen=True)
class PacketResult:
    """Forward(data) when ``data`` is set, Drop otherwise."""

    data: bytes | None

    @property
    def dropped(self) -> bool:
        return self.data is None

    def describe(self) -> str:
        return "drop" if self.data is None else f"forward {self.data.hex()}"


def deparse(packet: Packet, prefix_len: int, cmd: int, prefix: int, length: int) -> PacketResult:
    if cmd >= CMD_DROP:
        return PacketResult(None)
    body = prefix.to_bytes(prefix_len, "little")
    if cmd == CMD_FORWARD:
        body += packet.data[prefix_len:]
    return PacketResult(body[:length])
