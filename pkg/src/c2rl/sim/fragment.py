"""Fragmentation of encoded lists into fixed-size broadcast packets.

Packet layout (128 bytes max for the default 1024-bit payload)::

    epoch u16 | index u16 | total u16 | checksum u16 | body (<= 120 bytes)

``checksum`` is the low 16 bits of CRC-32 over the first six header bytes
and the body.
"""

from __future__ import annotations

import struct
import zlib

PACKET_BITS = 1024
FRAGMENT_HEADER = struct.Struct(">HHHH")
MAX_FRAGMENTS = 0xFFFF


def body_capacity(packet_bits: int = PACKET_BITS) -> int:
    cap = packet_bits // 8 - FRAGMENT_HEADER.size
    if cap <= 0:
        raise ValueError(f"{packet_bits}-bit packets leave no room for a fragment body")
    return cap


def packet_count(size: int, packet_bits: int = PACKET_BITS) -> int:
    """Number of packets needed for ``size`` bytes; an empty list still takes one."""
    cap = body_capacity(packet_bits)
    return max(1, -(-size // cap))


def _checksum(head: bytes, body: bytes) -> int:
    return zlib.crc32(body, zlib.crc32(head)) & 0xFFFF


def fragment(data: bytes, epoch: int, packet_bits: int = PACKET_BITS) -> list[bytes]:
    cap = body_capacity(packet_bits)
    total = packet_count(len(data), packet_bits)
    if total > MAX_FRAGMENTS:
        raise ValueError(f"{len(data)} bytes need {total} fragments, more than {MAX_FRAGMENTS}")
    out = []
    for index in range(total):
        body = data[index * cap:(index + 1) * cap]
        head = struct.pack(">HHH", epoch & 0xFFFF, index, total)
        out.append(head + struct.pack(">H", _checksum(head, body)) + body)
    return out


def parse_packet(packet: bytes) -> tuple[int, int, int, bytes]:
    """Return ``(epoch, index, total, body)``; raises ValueError if corrupt."""
    if len(packet) < FRAGMENT_HEADER.size:
        raise ValueError("packet shorter than the fragment header")
    epoch, index, total, check = FRAGMENT_HEADER.unpack_from(packet)
    body = packet[FRAGMENT_HEADER.size:]
    if _checksum(packet[:6], body) != check:
        raise ValueError("fragment checksum mismatch")
    if total == 0 or index >= total:
        raise ValueError(f"fragment index {index} outside total {total}")
    return epoch, index, total, body


def _newer(a: int, b: int) -> bool:
    # serial-number comparison on the 16-bit epoch field
    return a != b and ((a - b) & 0xFFFF) < 0x8000


class Reassembler:
    """Collects fragments of the newest epoch heard and yields complete lists.

    Fragments of an older epoch are ignored; hearing a newer epoch drops
    the partial older one.
    """

    def __init__(self):
        self.epoch: int | None = None
        self.total = 0
        self._parts: dict[int, bytes] = {}
        self.complete = False
        self.dropped = 0

    def feed(self, packet: bytes) -> bytes | None:
        try:
            epoch, index, total, body = parse_packet(packet)
        except ValueError:
            self.dropped += 1
            return None
        if self.epoch is None or _newer(epoch, self.epoch):
            self.epoch, self.total, self._parts, self.complete = epoch, total, {}, False
        elif epoch != self.epoch or self.complete:
            return None
        if total != self.total:
            self.dropped += 1
            return None
        self._parts[index] = body
        if len(self._parts) == self.total:
            self.complete = True
            return b"".join(self._parts[i] for i in range(self.total))
        return None

    @property
    def missing(self) -> int:
        return self.total - len(self._parts)
