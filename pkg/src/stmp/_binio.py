"""Little-endian binary readers/writers for the on-disk formats."""

import struct

import numpy as np

from .errors import FormatError


class Reader:
    """Sequential reader over a byte buffer that reports offsets on failure."""

    def __init__(self, data: bytes, source: str = "<bytes>"):
        self.data = data
        self.source = source
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        end = self.offset + count
        if end > len(self.data):
            raise FormatError(
                f"{self.source}: truncated while reading {what} at offset "
                f"{self.offset} (need {count} bytes, have {len(self.data) - self.offset})"
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def magic(self, expected: bytes) -> None:
        got = self.take(len(expected), "magic")
        if got != expected:
            raise FormatError(
                f"{self.source}: bad magic at offset 0: expected {expected!r}, got {got!r}"
            )

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def f32_array(self, count: int, what: str) -> np.ndarray:
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype="<f4", count=count).astype(np.float32)

    def expect_end(self) -> None:
        if self.offset != len(self.data):
            raise FormatError(
                f"{self.source}: {len(self.data) - self.offset} unexpected "
                f"trailing bytes at offset {self.offset}"
            )


def u8(value: int) -> bytes:
    return struct.pack("<B", value)


def u32(value: int) -> bytes:
    return struct.pack("<I", value)


def u64(value: int) -> bytes:
    return struct.pack("<Q", value)


def f32_bytes(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype="<f4").tobytes()
