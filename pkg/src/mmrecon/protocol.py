"""Wire protocol for syndrome exchange.

Frame layout (all integers little-endian):

    u32  length of the rest of the frame (kind through payload)
    u8   kind
    u64  session_id
    u32  block_index
    ...  payload (kind-specific)

Syndromes travel packed little-endian bit order, u segments of ceil(m/8)
bytes in matrix order. When tags are enabled the SYNDROMES payload ends
with 8 bytes of tag seed and the 8-byte tag itself; only the tag value
counts as disclosed information (the seed is independent of the key).
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .bits import BitBlock

__all__ = [
    "PROTOCOL_VERSION",
    "MAX_FRAME_BYTES",
    "MessageKind",
    "ProtocolMessage",
    "ProtocolError",
    "encode_message",
    "decode_message",
    "block_tag",
    "whole_key_digest",
]

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 16 * 1024 * 1024
_HEADER = struct.Struct("<BQI")
_PARAMS = struct.Struct("<IIIHHd")
_RESULT = struct.Struct("<BIIQ")

#: RESULT status byte values
RESULT_FAILED = 0
RESULT_SUCCESS = 1
RESULT_TAG_MISMATCH = 2


class MessageKind(enum.IntEnum):
    HELLO = 1
    PARAMS = 2
    SYNDROMES = 3
    RESULT = 4
    VERIFY = 5
    CLOSE = 6
    ERROR = 7


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolMessage:
    kind: MessageKind
    session_id: int
    block_index: int
    payload: bytes = b""


def encode_message(msg: ProtocolMessage) -> bytes:
    body = _HEADER.pack(int(msg.kind), msg.session_id, msg.block_index) + msg.payload
    if len(body) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame body {len(body)} exceeds cap {MAX_FRAME_BYTES}")
    return struct.pack("<I", len(body)) + body


def decode_message(frame: bytes) -> ProtocolMessage:
    """Inverse of encode_message on one complete frame."""
    if len(frame) < 4:
        raise ProtocolError("truncated frame: missing length prefix")
    (length,) = struct.unpack_from("<I", frame)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"declared length {length} exceeds cap {MAX_FRAME_BYTES}")
    if len(frame) != 4 + length:
        raise ProtocolError(f"frame is {len(frame)} bytes, declared {4 + length}")
    if length < _HEADER.size:
        raise ProtocolError(f"frame body {length} shorter than header {_HEADER.size}")
    kind_raw, session_id, block_index = _HEADER.unpack_from(frame, 4)
    try:
        kind = MessageKind(kind_raw)
    except ValueError:
        raise ProtocolError(f"unknown message kind {kind_raw}") from None
    return ProtocolMessage(kind, session_id, block_index, frame[4 + _HEADER.size:])


# ---------------------------------------------------------------------------
# payload codecs
# ---------------------------------------------------------------------------

def pack_hello(version: int = PROTOCOL_VERSION) -> bytes:
    return struct.pack("<H", version)


def unpack_hello(payload: bytes) -> int:
    if len(payload) != 2:
        raise ProtocolError(f"HELLO payload must be 2 bytes, got {len(payload)}")
    return struct.unpack("<H", payload)[0]


def pack_params(n: int, m: int, k: int, u: int, tag_width: int, e: float, hashes: list[str]) -> bytes:
    if len(hashes) != u:
        raise ProtocolError(f"{len(hashes)} hashes for u={u}")
    blob = _PARAMS.pack(n, m, k, u, tag_width, e)
    for hx in hashes:
        raw = bytes.fromhex(hx)
        if len(raw) != 32:
            raise ProtocolError("ensemble hash must be 32 bytes")
        blob += raw
    return blob


def unpack_params(payload: bytes):
    if len(payload) < _PARAMS.size:
        raise ProtocolError("PARAMS payload too short")
    n, m, k, u, tag_width, e = _PARAMS.unpack_from(payload)
    rest = payload[_PARAMS.size:]
    if len(rest) != 32 * u:
        raise ProtocolError(f"PARAMS carries {len(rest)} hash bytes, expected {32 * u}")
    hashes = [rest[i * 32:(i + 1) * 32].hex() for i in range(u)]
    return n, m, k, u, tag_width, e, hashes


def pack_syndromes(syndromes: list[BitBlock], tag_seed: bytes, tag: bytes) -> bytes:
    blob = b"".join(z.to_bytes() for z in syndromes)
    if tag_seed or tag:
        if len(tag_seed) != 8 or len(tag) != 8:
            raise ProtocolError("tag seed and tag must be 8 bytes each")
        blob += tag_seed + tag
    return blob


def unpack_syndromes(payload: bytes, u: int, m: int, tag_width: int):
    seg = (m + 7) // 8
    tag_bytes = 16 if tag_width else 0
    if len(payload) != u * seg + tag_bytes:
        raise ProtocolError(
            f"SYNDROMES payload is {len(payload)} bytes, expected {u * seg + tag_bytes}"
        )
    try:
        syndromes = [
            BitBlock.from_bytes(payload[l * seg:(l + 1) * seg], m) for l in range(u)
        ]
    except ValueError as exc:
        raise ProtocolError(f"bad syndrome segment: {exc}") from exc
    if tag_bytes:
        return syndromes, payload[-16:-8], payload[-8:]
    return syndromes, b"", b""


def pack_result(status: int, iterations: int, mismatches: int, elapsed_us: int) -> bytes:
    return _RESULT.pack(status, iterations, mismatches, elapsed_us)


def unpack_result(payload: bytes):
    if len(payload) != _RESULT.size:
        raise ProtocolError(f"RESULT payload must be {_RESULT.size} bytes, got {len(payload)}")
    return _RESULT.unpack(payload)


def pack_verify(digest: bytes, successes: int) -> bytes:
    if len(digest) != 8:
        raise ProtocolError("VERIFY digest must be 8 bytes")
    return digest + struct.pack("<I", successes)


def unpack_verify(payload: bytes):
    if len(payload) != 12:
        raise ProtocolError(f"VERIFY payload must be 12 bytes, got {len(payload)}")
    return payload[:8], struct.unpack("<I", payload[8:])[0]


def pack_error(reason: str) -> bytes:
    return reason.encode("utf-8")


def unpack_error(payload: bytes) -> str:
    return payload.decode("utf-8", errors="replace")


# ---------------------------------------------------------------------------
# verification tags
# ---------------------------------------------------------------------------

def block_tag(block: BitBlock, seed: bytes) -> bytes:
    """64-bit keyed verification tag of one key block.

    Keyed BLAKE2b; a fresh random seed per block makes silent agreement
    on differing blocks a ~2^-64 event.
    """
    h = hashlib.blake2b(digest_size=8, key=seed)
    h.update(struct.pack("<Q", block.length))
    h.update(block.to_bytes())
    return h.digest()


def whole_key_digest(blocks: list[BitBlock], succeeded: list[bool]) -> bytes:
    """Session-end digest over the successfully reconciled blocks."""
    flags = np.array([1 if s else 0 for s in succeeded], dtype=np.uint8)
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<I", len(blocks)))
    h.update(np.packbits(flags, bitorder="little").tobytes())
    for block, ok in zip(blocks, succeeded):
        if ok:
            h.update(block.to_bytes())
    return h.digest()
