"""Binary encoding of standard CRLs and Bloom-compressed C2RLs.

Both formats share a 230-byte header, all integers big-endian::

    offset size  field
         0    1  version (always 1)
         1   96  signer info
        97   64  signature over every byte except this field
       161   69  unsigned metadata:
                   serial u64 | issue_time u64 | next_issue_time u64 |
                   entry_kind u8 | entry_count u32 | 40 reserved zero bytes
       230    -  entries

``entries`` of a standard CRL (kind 0) is ``entry_count`` records of a
10-byte certificate id and a u32 expiry, 14 bytes each.  ``entries`` of a
C2RL (kind 1) is a serialized :class:`~c2rl.bloom.BloomFilter` (u32 m, u16
k, ceil(m/8) bit bytes); ``entry_count`` there is the number of certificates
inserted into the filter.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from .bloom import PREAMBLE, BloomFilter
from .signing import SIGNATURE_LEN, SIGNER_INFO_LEN, Signer

VERSION = 1
HEADER_LEN = 230
CERT_ID_LEN = 10
ENTRY_LEN = 14
META_LEN = 69
KIND_STANDARD = 0
KIND_BLOOM = 1
MAX_EXPIRY = 0xFFFFFFFF

_SIG_START = 1 + SIGNER_INFO_LEN
_SIG_END = _SIG_START + SIGNATURE_LEN
_META = struct.Struct(">QQQBI40x")
_ENTRY = struct.Struct(">10sI")

assert _SIG_END + META_LEN == HEADER_LEN and _META.size == META_LEN


class CodecError(ValueError):
    pass


@dataclass(frozen=True)
class CrlEntry:
    cert_id: bytes
    expiry: int = MAX_EXPIRY

    def __post_init__(self):
        if len(self.cert_id) != CERT_ID_LEN:
            raise ValueError(f"certificate id must be {CERT_ID_LEN} bytes, got {len(self.cert_id)}")
        if not 0 <= self.expiry <= MAX_EXPIRY:
            raise ValueError(f"expiry {self.expiry} does not fit in u32")


@dataclass(frozen=True)
class CrlHeader:
    serial: int = 0
    issue_time: int = 0
    next_issue_time: int = 0
    signer: bytes = bytes(SIGNER_INFO_LEN)
    signature: bytes = bytes(SIGNATURE_LEN)
    version: int = VERSION

    def __post_init__(self):
        if self.version != VERSION:
            raise ValueError(f"unsupported CRL version {self.version}")
        if len(self.signer) != SIGNER_INFO_LEN or len(self.signature) != SIGNATURE_LEN:
            raise ValueError("signer must be 96 bytes and signature 64 bytes")


@dataclass(frozen=True)
class Crl:
    header: CrlHeader = field(default_factory=CrlHeader)
    entries: tuple[CrlEntry, ...] = ()


@dataclass(frozen=True)
class C2rl:
    header: CrlHeader
    filter: BloomFilter

    @property
    def k(self) -> int:
        return self.filter.k

    @property
    def m(self) -> int:
        return self.filter.m

    @property
    def epoch(self) -> int:
        return self.header.serial

    def contains(self, cert_id: bytes) -> bool:
        return self.filter.contains(cert_id)


def cert_id_from_hex(text: str) -> bytes:
    raw = bytes.fromhex(text.strip())
    if len(raw) != CERT_ID_LEN:
        raise ValueError(f"certificate id must be {2 * CERT_ID_LEN} hex chars, got {text!r}")
    return raw


# -- sizes ------------------------------------------------------------------

def crl_size(n: int) -> int:
    return HEADER_LEN + ENTRY_LEN * n


def c2rl_size(m: int) -> int:
    """Compressed size as used for gain figures: header plus filter bits."""
    return HEADER_LEN + (m + 7) // 8


def c2rl_wire_size(m: int) -> int:
    """Encoded size, which also carries the 6-byte (m, k) preamble."""
    return c2rl_size(m) + PREAMBLE.size


def compression_gain(n: int, m: int) -> float:
    return crl_size(n) / c2rl_size(m)


def compression_gain_wire(n: int, m: int) -> float:
    return crl_size(n) / c2rl_wire_size(m)


# -- encoding ---------------------------------------------------------------

def _encode_header(header: CrlHeader, kind: int, count: int) -> bytes:
    return b"".join((
        bytes((header.version,)),
        header.signer,
        header.signature,
        _META.pack(header.serial, header.issue_time, header.next_issue_time, kind, count),
    ))


def _decode_header(data: bytes) -> tuple[CrlHeader, int, int]:
    if len(data) < HEADER_LEN:
        raise CodecError(f"truncated header: {len(data)} of {HEADER_LEN} bytes")
    if data[0] != VERSION:
        raise CodecError(f"unsupported CRL version {data[0]}")
    meta = data[_SIG_END:HEADER_LEN]
    if any(meta[29:]):
        raise CodecError("reserved metadata bytes must be zero")
    serial, issue, nxt, kind, count = _META.unpack(meta)
    header = CrlHeader(
        serial=serial, issue_time=issue, next_issue_time=nxt,
        signer=bytes(data[1:_SIG_START]), signature=bytes(data[_SIG_START:_SIG_END]))
    return header, kind, count


def entry_kind(data: bytes) -> int:
    return _decode_header(data)[1]


def encode_crl(crl: Crl) -> bytes:
    parts = [_encode_header(crl.header, KIND_STANDARD, len(crl.entries))]
    parts.extend(_ENTRY.pack(e.cert_id, e.expiry) for e in crl.entries)
    return b"".join(parts)


def decode_crl(data: bytes) -> Crl:
    header, kind, count = _decode_header(data)
    if kind != KIND_STANDARD:
        raise CodecError(f"entry kind {kind} is not a standard CRL")
    body = memoryview(data)[HEADER_LEN:]
    if len(body) != ENTRY_LEN * count:
        raise CodecError(f"header declares {count} entries ({ENTRY_LEN * count} bytes), "
                         f"body has {len(body)} bytes")
    entries = tuple(CrlEntry(cid, exp) for cid, exp in _ENTRY.iter_unpack(body))
    return Crl(header, entries)


def encode_c2rl(c2rl: C2rl) -> bytes:
    return _encode_header(c2rl.header, KIND_BLOOM, c2rl.filter.insert_count) + c2rl.filter.to_bytes()


def decode_c2rl(data: bytes) -> C2rl:
    header, kind, count = _decode_header(data)
    if kind != KIND_BLOOM:
        raise CodecError(f"entry kind {kind} is not a C2RL")
    try:
        bf = BloomFilter.from_bytes(bytes(data[HEADER_LEN:]), insert_count=count)
    except ValueError as exc:
        raise CodecError(str(exc)) from exc
    return C2rl(header, bf)


def decode(data: bytes) -> Crl | C2rl:
    kind = entry_kind(data)
    if kind == KIND_STANDARD:
        return decode_crl(data)
    if kind == KIND_BLOOM:
        return decode_c2rl(data)
    raise CodecError(f"unknown entry kind {kind}")


# -- signatures -------------------------------------------------------------

def signed_message(data: bytes) -> bytes:
    """The bytes a signature covers: the encoding minus the signature field."""
    return bytes(data[:_SIG_START]) + bytes(data[_SIG_END:])


def sign_bytes(data: bytes, signer: Signer) -> bytes:
    """Stamp ``signer`` into an encoded list and (re)compute its signature.

    Re-signing by a relay (RCA to PCA to RSU) replaces only the signer and
    signature fields; the body is untouched.
    """
    if len(data) < HEADER_LEN:
        raise CodecError("cannot sign a truncated list")
    stamped = bytes(data[:1]) + signer.signer_info + bytes(SIGNATURE_LEN) + bytes(data[_SIG_END:])
    sig = signer.sign(signed_message(stamped))
    if len(sig) != SIGNATURE_LEN:
        raise ValueError(f"signer produced a {len(sig)}-byte signature")
    return stamped[:_SIG_START] + sig + stamped[_SIG_END:]


def verify_bytes(data: bytes, signer: Signer) -> bool:
    if len(data) < HEADER_LEN:
        return False
    if bytes(data[1:_SIG_START]) != signer.signer_info:
        return False
    return signer.verify(signed_message(data), bytes(data[_SIG_START:_SIG_END]))


def sign(obj: Crl | C2rl, signer: Signer) -> Crl | C2rl:
    """Return a copy of ``obj`` whose header carries ``signer``'s signature."""
    encoded = encode_crl(obj) if isinstance(obj, Crl) else encode_c2rl(obj)
    signed = sign_bytes(encoded, signer)
    header = replace(obj.header, signer=signed[1:_SIG_START], signature=signed[_SIG_START:_SIG_END])
    return replace(obj, header=header)


def verify(obj: Crl | C2rl, signer: Signer) -> bool:
    encoded = encode_crl(obj) if isinstance(obj, Crl) else encode_c2rl(obj)
    return verify_bytes(encoded, signer)
