"""Pluggable signer contract for revocation lists.

A signer fills the 96-byte ``signer`` header field with its identity and
produces a 64-byte detached tag over the rest of the encoded list.  The
default :class:`HmacSigner` is a deterministic keyed tag (HMAC-SHA512) meant
for tests and local pipelines; an asymmetric scheme can be dropped in by
implementing the same three members.
"""

from __future__ import annotations

import hashlib
import hmac
from typing import Protocol

SIGNER_INFO_LEN = 96
SIGNATURE_LEN = 64
_NAME_LEN = SIGNER_INFO_LEN - 32

DEFAULT_TEST_KEY = b"c2rl-test-signer"


class Signer(Protocol):
    @property
    def signer_info(self) -> bytes: ...

    def sign(self, message: bytes) -> bytes: ...

    def verify(self, message: bytes, signature: bytes) -> bool: ...


class HmacSigner:
    """Keyed-tag signer; the key doubles as the verification key."""

    def __init__(self, key: bytes = DEFAULT_TEST_KEY, name: str = "RCA"):
        encoded = name.encode("utf-8")
        if len(encoded) > _NAME_LEN:
            raise ValueError(f"signer name longer than {_NAME_LEN} bytes")
        self._key = bytes(key)
        self.name = name
        # 32-byte key fingerprint followed by the zero-padded name
        self._info = hashlib.sha256(b"c2rl-signer:" + self._key).digest() + encoded.ljust(_NAME_LEN, b"\0")

    @property
    def signer_info(self) -> bytes:
        return self._info

    def sign(self, message: bytes) -> bytes:
        return hmac.new(self._key, message, hashlib.sha512).digest()

    def verify(self, message: bytes, signature: bytes) -> bool:
        if len(signature) != SIGNATURE_LEN:
            return False
        return hmac.compare_digest(self.sign(message), signature)

    def __repr__(self):
        return f"HmacSigner(name={self.name!r})"
