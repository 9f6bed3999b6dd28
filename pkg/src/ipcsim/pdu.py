"""PDU wire format.

Fixed 32-byte header followed by the payload::

    src_addr:u16 dst_addr:u16 src_cep:u16 dst_cep:u16
    qos_id:u8 kind:u8 flags:u8 reserved:u8
    seq:u64 sdu_id:u32 offset:u32 checksum:u32

The serialized size is what the medium charges for, so latency arithmetic is
``(len(payload) + 32) * 8`` bits per PDU at each rank.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

HEADER = struct.Struct(">HHHHBBBBQIII")
HEADER_BYTES = HEADER.size
assert HEADER_BYTES == 32

FLAG_FIRST = 0x01
FLAG_LAST = 0x02


class PduKind(enum.IntEnum):
    DATA = 1
    ACK = 2
    MGMT = 3


@dataclass
class Pdu:
    src_addr: int
    dst_addr: int
    src_cep: int
    dst_cep: int
    qos_id: int
    kind: PduKind
    seq: int = 0
    payload: bytes = b""
    sdu_id: int = 0
    offset: int = 0
    flags: int = FLAG_FIRST | FLAG_LAST
    checksum: int = 0
    # Simulation metadata, never on the wire.
    uid: int = field(default=0, compare=False, repr=False)
    rank: int = field(default=0, compare=False, repr=False)
    carried: object = field(default=None, compare=False, repr=False)
    recoverable: bool = field(default=False, compare=False, repr=False)

    @property
    def first(self) -> bool:
        return bool(self.flags & FLAG_FIRST)

    @property
    def last(self) -> bool:
        return bool(self.flags & FLAG_LAST)

    @property
    def size_bytes(self) -> int:
        return HEADER_BYTES + len(self.payload)

    @property
    def size_bits(self) -> int:
        return 8 * self.size_bytes

    def encode(self) -> bytes:
        head = HEADER.pack(self.src_addr, self.dst_addr, self.src_cep, self.dst_cep,
                           self.qos_id, int(self.kind), self.flags, 0,
                           self.seq, self.sdu_id, self.offset, self.checksum)
        return head + bytes(self.payload)

    @classmethod
    def decode(cls, data: bytes) -> "Pdu":
        if len(data) < HEADER_BYTES:
            raise ValueError(f"short PDU ({len(data)} bytes)")
        (src, dst, scep, dcep, qos, kind, flags, _res,
         seq, sdu_id, offset, checksum) = HEADER.unpack_from(data)
        return cls(src, dst, scep, dcep, qos, PduKind(kind), seq, bytes(data[HEADER_BYTES:]),
                   sdu_id, offset, flags, checksum)

    def copy(self, **changes) -> "Pdu":
        d = dict(self.__dict__)
        d.update(changes)
        return Pdu(**d)


@dataclass
class Sdu:
    data: bytes
    # Upper-rank PDU this SDU encapsulates, if any (simulation metadata).
    carried: object = None

    def __len__(self):
        return len(self.data)
