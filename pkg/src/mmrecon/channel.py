"""Binary symmetric channel simulation, key handling, and code metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bits import BitBlock

__all__ = [
    "ChannelModel",
    "FrameSet",
    "binary_entropy",
    "efficiency",
    "generate_key",
    "bsc_corrupt",
    "split_key",
    "join_frames",
    "rng_stream",
]

#: default sifted-key geometry: 2^20 bits as 16 blocks of 2^16
DEFAULT_KEY_BITS = 1 << 20
DEFAULT_BLOCK_BITS = 1 << 16


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator for the given (seed, path) coordinates.

    Philox keyed by the full path, so every (frame, purpose) pair gets an
    independent stream whose output does not depend on scheduling order.
    """
    return np.random.Generator(np.random.Philox(key=np.random.SeedSequence((seed,) + path).generate_state(2, np.uint64)))


@dataclass(frozen=True)
class ChannelModel:
    """Memoryless BSC with crossover probability e."""

    e: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.e < 0.5:
            raise ValueError(f"crossover probability must be in (0, 0.5), got {self.e}")


@dataclass(frozen=True)
class FrameSet:
    """A key split into equal-length blocks, order preserving."""

    blocks: tuple[BitBlock, ...]

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("empty frame set")
        n = self.blocks[0].length
        if any(b.length != n for b in self.blocks):
            raise ValueError("blocks have differing lengths")

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def block_length(self) -> int:
        return self.blocks[0].length

    @property
    def total_length(self) -> int:
        return self.k * self.block_length


def binary_entropy(e: float) -> float:
    """Shannon binary entropy in bits, with h(0) = h(1) = 0."""
    if not 0.0 <= e <= 1.0:
        raise ValueError(f"probability outside [0, 1]: {e}")
    if e == 0.0 or e == 1.0:
        return 0.0
    return -e * math.log2(e) - (1.0 - e) * math.log2(1.0 - e)


def efficiency(m: int, n: int, e: float) -> float:
    """Reconciliation efficiency f = m / (n * h(e)).

    Values f <= 1 are below the Shannon limit and mark an operating point
    the code cannot actually reach; callers treat them as infeasible.
    """
    if not 0.0 < e < 0.5:
        raise ValueError(f"crossover probability must be in (0, 0.5), got {e}")
    if not 0 < m < n:
        raise ValueError(f"need 0 < m < n, got m={m}, n={n}")
    return m / (n * binary_entropy(e))


def generate_key(length: int, seed: int) -> BitBlock:
    """Uniform random key, deterministic per seed."""
    if length <= 0:
        raise ValueError(f"length must be positive, got {length}")
    rng = rng_stream(seed)
    return BitBlock.from_bits(rng.integers(0, 2, size=length, dtype=np.uint8))


def bsc_corrupt(key: BitBlock, channel: ChannelModel) -> tuple[BitBlock, BitBlock]:
    """Flip each bit independently with probability e.

    Returns (noisy, error_pattern) with noisy = key XOR error_pattern.
    """
    rng = rng_stream(channel.seed)
    flips = (rng.random(key.length) < channel.e).astype(np.uint8)
    pattern = BitBlock.from_bits(flips)
    return key ^ pattern, pattern


def split_key(key: BitBlock, n: int) -> FrameSet:
    """Split into blocks of length n; key length must divide evenly."""
    if n <= 0:
        raise ValueError(f"block length must be positive, got {n}")
    if key.length % n:
        raise ValueError(f"key length {key.length} not divisible by block length {n}")
    bits = key.to_bits()
    k = key.length // n
    return FrameSet(tuple(BitBlock.from_bits(bits[i * n:(i + 1) * n]) for i in range(k)))


def join_frames(frames: FrameSet) -> BitBlock:
    """Concatenate blocks back into one key; inverse of split_key."""
    return BitBlock.from_bits(np.concatenate([b.to_bits() for b in frames.blocks]))
