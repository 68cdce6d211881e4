"""Canonical binary encoding helpers.

Every artifact that gets hashed or measured (journals, receipts, guest
inputs, certificates) is serialized through these helpers so that equal
values always produce identical bytes: fixed-width little-endian integers,
u32 length prefixes for variable-size fields, and strict decoding that
rejects trailing or truncated data.
"""

from __future__ import annotations

import hashlib
import struct

DIGEST_SIZE = 32

U32_MAX = (1 << 32) - 1
U64_MAX = (1 << 64) - 1


class DecodeError(ValueError):
    """Raised when a byte string is not a valid canonical encoding."""


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class Writer:
    """Appends canonically encoded fields to a growing buffer."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def u8(self, value: int) -> "Writer":
        if not 0 <= value <= 0xFF:
            raise ValueError(f"u8 out of range: {value}")
        self._buf.append(value)
        return self

    def u32(self, value: int) -> "Writer":
        if not 0 <= value <= U32_MAX:
            raise ValueError(f"u32 out of range: {value}")
        self._buf += struct.pack("<I", value)
        return self

    def u64(self, value: int) -> "Writer":
        if not 0 <= value <= U64_MAX:
            raise ValueError(f"u64 out of range: {value}")
        self._buf += struct.pack("<Q", value)
        return self

    def boolean(self, value: bool) -> "Writer":
        return self.u8(1 if value else 0)

    def raw(self, data: bytes) -> "Writer":
        # Fixed-width field; caller guarantees the width.
        self._buf += data
        return self

    def digest(self, data: bytes) -> "Writer":
        if len(data) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(data)}")
        return self.raw(data)

    def bytes_(self, data: bytes) -> "Writer":
        self.u32(len(data))
        return self.raw(data)

    def string(self, value: str) -> "Writer":
        return self.bytes_(value.encode("utf-8"))

    def finish(self) -> bytes:
        return bytes(self._buf)


class Reader:
    """Strict counterpart of Writer: every read is bounds-checked."""

    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise DecodeError("truncated input")
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def boolean(self) -> bool:
        value = self.u8()
        if value not in (0, 1):
            raise DecodeError(f"invalid boolean byte: {value}")
        return value == 1

    def digest(self) -> bytes:
        return self._take(DIGEST_SIZE)

    def bytes_(self) -> bytes:
        return self._take(self.u32())

    def string(self) -> str:
        try:
            return self.bytes_().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("invalid utf-8 in string field") from exc

    def expect_eof(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(f"{len(self._data) - self._pos} trailing bytes")
