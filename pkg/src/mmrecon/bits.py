"""Packed bit vectors over GF(2).

Bit i of a block lives in byte i >> 3 at position i & 7 (little-endian bit
order), matching the wire format used for syndrome transmission. Trailing
padding bits in the last byte are always zero.
"""

from __future__ import annotations

import numpy as np

__all__ = ["BitBlock"]


class BitBlock:
    """Immutable fixed-length bit vector packed into a uint8 array."""

    __slots__ = ("data", "length")

    def __init__(self, data: np.ndarray, length: int):
        if length <= 0:
            raise ValueError(f"BitBlock length must be positive, got {length}")
        data = np.ascontiguousarray(data, dtype=np.uint8)
        if data.shape != ((length + 7) // 8,):
            raise ValueError(
                f"packed buffer has {data.shape[0]} bytes, "
                f"expected {(length + 7) // 8} for {length} bits"
            )
        pad = 8 * data.shape[0] - length
        if pad and (data[-1] >> (8 - pad)):
            raise ValueError("nonzero padding bits in last byte")
        data.setflags(write=False)
        self.data = data
        self.length = length

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "BitBlock":
        """Pack an array of 0/1 values."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 1:
            raise ValueError("expected a 1-D bit array")
        return cls(np.packbits(bits, bitorder="little"), bits.shape[0])

    @classmethod
    def from_bytes(cls, raw: bytes, length: int) -> "BitBlock":
        return cls(np.frombuffer(raw, dtype=np.uint8).copy(), length)

    @classmethod
    def zeros(cls, length: int) -> "BitBlock":
        return cls(np.zeros((length + 7) // 8, dtype=np.uint8), length)

    def to_bits(self) -> np.ndarray:
        """Unpack to an array of 0/1 uint8 values."""
        return np.unpackbits(self.data, count=self.length, bitorder="little")

    def to_bytes(self) -> bytes:
        return self.data.tobytes()

    def weight(self) -> int:
        """Number of set bits."""
        return int(np.unpackbits(self.data).sum())

    def __xor__(self, other: "BitBlock") -> "BitBlock":
        if self.length != other.length:
            raise ValueError(
                f"length mismatch: {self.length} vs {other.length}"
            )
        return BitBlock(np.bitwise_xor(self.data, other.data), self.length)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitBlock):
            return NotImplemented
        return self.length == other.length and np.array_equal(self.data, other.data)

    def __hash__(self) -> int:
        return hash((self.length, self.data.tobytes()))

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (int(self.data[i >> 3]) >> (i & 7)) & 1

    def __repr__(self) -> str:
        return f"BitBlock(length={self.length}, weight={self.weight()})"
