"""Bloom filter with a pinned, reproducible hash family.

The ``i``-th hash function is 64-bit FNV-1a over ``seed.to_bytes(4, "big") +
element`` with ``seed = i`` for ``i = 0 .. k-1``.  The digest is reduced
modulo ``m``.  Any implementation following these two lines produces the same
bit array for the same insertion sequence, which is what lets a receiver
query a filter knowing only ``m`` and ``k``.

Serialized payload (embedded verbatim in a C2RL ``entries`` field)::

    m   u32 big-endian   filter length in bits
    k   u16 big-endian   number of hash functions
    ... ceil(m/8) bytes  bit j at byte j // 8, position j % 8 (LSB first);
                         pad bits of the last byte are zero
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

PREAMBLE = struct.Struct(">IH")
MAX_M = 0xFFFFFFFF
MAX_K = 0xFFFF


def fnv1a_64(data: bytes, hval: int = FNV64_OFFSET) -> int:
    for byte in data:
        hval ^= byte
        hval = (hval * FNV64_PRIME) & _MASK64
    return hval


def hash_index(element: bytes, seed: int, m: int) -> int:
    """Index in ``[0, m)`` of ``element`` under the hash function ``seed``."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return fnv1a_64(seed.to_bytes(4, "big") + element) % m


@lru_cache(maxsize=64)
def _seed_states(k: int) -> tuple[int, ...]:
    # FNV state after absorbing the 4 seed bytes; shared by every element.
    return tuple(fnv1a_64(seed.to_bytes(4, "big")) for seed in range(k))


def hash_indices_batch(rows: np.ndarray, k: int, m: int) -> np.ndarray:
    """Vectorized ``hash_index`` for equal-length elements.

    ``rows`` is a ``(N, L)`` uint8 array, one element per row.  Returns a
    ``(k, N)`` uint64 array whose entry ``[i, j]`` equals
    ``hash_index(bytes(rows[j]), i, m)``.
    """
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-D (N, L) uint8 array")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    cols = [rows[:, j].astype(np.uint64) for j in range(rows.shape[1])]
    prime = np.uint64(FNV64_PRIME)
    out = np.empty((k, rows.shape[0]), dtype=np.uint64)
    for i, state in enumerate(_seed_states(k)):
        h = np.full(rows.shape[0], state, dtype=np.uint64)
        for col in cols:
            h ^= col
            h *= prime  # wraps modulo 2**64
        out[i] = h % np.uint64(m)
    return out


def as_rows(elements: Sequence[bytes] | np.ndarray) -> np.ndarray | None:
    """Pack equal-length byte strings into an ``(N, L)`` array, else None."""
    if isinstance(elements, np.ndarray):
        return elements
    if not elements:
        return np.zeros((0, 0), dtype=np.uint8)
    width = len(elements[0])
    if any(len(e) != width for e in elements):
        return None
    return np.frombuffer(b"".join(elements), dtype=np.uint8).reshape(len(elements), width)


def _fp_base(m: float, kn: float) -> float:
    # 1 - (1 - 1/m)**kn without cancellation for large m.
    if kn == 0:
        return 0.0
    if m == 1:
        return 1.0
    return -math.expm1(kn * math.log1p(-1.0 / m))


def false_positive_prob(m: int, k: int, n: int) -> float:
    """Analytic false-positive probability ``[1 - (1 - 1/m)^(kn)]^k``."""
    if m < 1 or k < 1:
        raise ValueError(f"need m >= 1 and k >= 1, got m={m}, k={k}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return _fp_base(m, k * n) ** k


@dataclass(frozen=True)
class FilterParams:
    m: int
    k: int
    n: int = 0
    delta_hat: float | None = None

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise ValueError(f"need m >= 1 and k >= 1, got m={self.m}, k={self.k}")
        if self.m > MAX_M or self.k > MAX_K:
            raise ValueError("m must fit in 32 bits and k in 16 bits")

    @property
    def payload_bytes(self) -> int:
        return (self.m + 7) // 8


class BloomFilter:
    """An ``m``-bit Bloom filter queried with ``k`` seeded FNV-1a hashes.

    Build with :meth:`add` / :meth:`add_many`, then treat as read-only;
    concurrent queries need no locking once construction is over.
    """

    __slots__ = ("m", "k", "insert_count", "_bits")

    def __init__(self, m: int, k: int, bits: bytes | bytearray | None = None, insert_count: int = 0):
        if m < 1 or k < 1:
            raise ValueError(f"need m >= 1 and k >= 1, got m={m}, k={k}")
        if m > MAX_M or k > MAX_K:
            raise ValueError("m must fit in 32 bits and k in 16 bits")
        nbytes = (m + 7) // 8
        if bits is None:
            self._bits = bytearray(nbytes)
        else:
            if len(bits) != nbytes:
                raise ValueError(f"bit payload is {len(bits)} bytes, m={m} needs {nbytes}")
            if m % 8 and bits[-1] >> (m % 8):
                raise ValueError("pad bits beyond m must be zero")
            self._bits = bytearray(bits)
        self.m = m
        self.k = k
        self.insert_count = insert_count

    @classmethod
    def from_params(cls, params: FilterParams) -> "BloomFilter":
        return cls(params.m, params.k)

    def indices(self, element: bytes) -> list[int]:
        m = self.m
        return [fnv1a_64(element, state) % m for state in _seed_states(self.k)]

    def add(self, element: bytes) -> None:
        for idx in self.indices(element):
            self._bits[idx >> 3] |= 1 << (idx & 7)
        self.insert_count += 1

    def add_many(self, elements: Iterable[bytes] | np.ndarray) -> None:
        """Insert many elements; equal-length inputs take the vectorized path."""
        if not isinstance(elements, np.ndarray):
            elements = list(elements)
        rows = as_rows(elements)
        if rows is None:
            for e in elements:
                self.add(e)
            return
        if rows.shape[0] == 0:
            return
        idx = hash_indices_batch(rows, self.k, self.m).ravel()
        view = np.frombuffer(self._bits, dtype=np.uint8)
        np.bitwise_or.at(view, (idx >> np.uint64(3)).astype(np.intp),
                         np.left_shift(1, (idx & np.uint64(7)).astype(np.uint8)).astype(np.uint8))
        self.insert_count += rows.shape[0]

    def contains(self, element: bytes) -> bool:
        bits = self._bits
        return all(bits[idx >> 3] >> (idx & 7) & 1 for idx in self.indices(element))

    __contains__ = contains

    def contains_many(self, elements: Sequence[bytes] | np.ndarray) -> np.ndarray:
        """Boolean membership for each element (vectorized when equal-length)."""
        rows = as_rows(elements)
        if rows is None:
            return np.array([self.contains(e) for e in elements], dtype=bool)
        if rows.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        idx = hash_indices_batch(rows, self.k, self.m)
        view = np.frombuffer(bytes(self._bits), dtype=np.uint8)
        byte = view[(idx >> np.uint64(3)).astype(np.intp)]
        hit = (byte >> (idx & np.uint64(7)).astype(np.uint8)) & 1
        return hit.all(axis=0).astype(bool)

    def popcount(self) -> int:
        return int(np.unpackbits(np.frombuffer(bytes(self._bits), dtype=np.uint8)).sum())

    def bit(self, j: int) -> int:
        if not 0 <= j < self.m:
            raise IndexError(j)
        return self._bits[j >> 3] >> (j & 7) & 1

    @property
    def bits(self) -> bytes:
        return bytes(self._bits)

    @property
    def payload_bytes(self) -> int:
        return len(self._bits)

    def false_positive_prob(self, n: int | None = None) -> float:
        return false_positive_prob(self.m, self.k, self.insert_count if n is None else n)

    def to_bytes(self) -> bytes:
        return PREAMBLE.pack(self.m, self.k) + bytes(self._bits)

    @classmethod
    def from_bytes(cls, data: bytes, insert_count: int = 0) -> "BloomFilter":
        if len(data) < PREAMBLE.size:
            raise ValueError("filter payload shorter than its 6-byte preamble")
        m, k = PREAMBLE.unpack_from(data)
        if m == 0 or k == 0:
            raise ValueError(f"filter declares m={m}, k={k}; both must be >= 1")
        body = data[PREAMBLE.size:]
        if len(body) != (m + 7) // 8:
            raise ValueError(f"filter payload has {len(body)} bytes, m={m} needs {(m + 7) // 8}")
        return cls(m, k, body, insert_count)

    def __eq__(self, other):
        if not isinstance(other, BloomFilter):
            return NotImplemented
        return (self.m, self.k, self.insert_count, self._bits) == (
            other.m, other.k, other.insert_count, other._bits)

    def __repr__(self):
        return f"BloomFilter(m={self.m}, k={self.k}, insert_count={self.insert_count}, popcount={self.popcount()})"


def new_filter(params: FilterParams) -> BloomFilter:
    return BloomFilter.from_params(params)
