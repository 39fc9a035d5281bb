"""Byte-stream transports and message framing.

Two bindings ship: an in-process queue pair (loopback without sockets)
and a TCP-style stream socket wrapper. Both expose the same blocking
interface, so the session layer cannot tell them apart.
"""

from __future__ import annotations

import queue
import socket

from .protocol import MAX_FRAME_BYTES, ProtocolError, ProtocolMessage, decode_message, encode_message

__all__ = [
    "TransportClosed",
    "InProcessTransport",
    "SocketTransport",
    "read_message",
    "write_message",
]


class TransportClosed(ConnectionError):
    """Stream ended mid-frame or the peer went away."""


class InProcessTransport:
    """One end of a queue-backed duplex byte stream."""

    def __init__(self, inbox: queue.SimpleQueue, outbox: queue.SimpleQueue, timeout: float = 60.0):
        self._inbox = inbox
        self._outbox = outbox
        self._buffer = bytearray()
        self._eof = False
        self._timeout = timeout

    @classmethod
    def pair(cls, timeout: float = 60.0) -> tuple["InProcessTransport", "InProcessTransport"]:
        a_to_b: queue.SimpleQueue = queue.SimpleQueue()
        b_to_a: queue.SimpleQueue = queue.SimpleQueue()
        return cls(b_to_a, a_to_b, timeout), cls(a_to_b, b_to_a, timeout)

    def send_bytes(self, data: bytes) -> None:
        self._outbox.put(bytes(data))

    def recv_exact(self, n: int) -> bytes:
        while len(self._buffer) < n and not self._eof:
            try:
                chunk = self._inbox.get(timeout=self._timeout)
            except queue.Empty:
                raise TransportClosed("in-process peer stalled") from None
            if chunk is None:
                self._eof = True
                break
            self._buffer.extend(chunk)
        if len(self._buffer) >= n:
            out = bytes(self._buffer[:n])
            del self._buffer[:n]
            return out
        if not self._buffer:
            return b""  # clean end of stream at a frame boundary
        raise TransportClosed("stream ended mid-read")

    def close(self) -> None:
        self._outbox.put(None)


class SocketTransport:
    """Stream socket wrapper with exact reads."""

    def __init__(self, sock: socket.socket):
        self._sock = sock

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 60.0) -> "SocketTransport":
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.settimeout(timeout)
        return cls(sock)

    def send_bytes(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise TransportClosed(f"send failed: {exc}") from exc

    def recv_exact(self, n: int) -> bytes:
        chunks = []
        got = 0
        while got < n:
            try:
                chunk = self._sock.recv(n - got)
            except OSError as exc:
                raise TransportClosed(f"recv failed: {exc}") from exc
            if not chunk:
                if got == 0:
                    return b""
                raise TransportClosed("stream ended mid-read")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def write_message(transport, msg: ProtocolMessage) -> None:
    transport.send_bytes(encode_message(msg))


def read_message(transport) -> ProtocolMessage | None:
    """Next message, or None on clean end of stream."""
    prefix = transport.recv_exact(4)
    if prefix == b"":
        return None
    length = int.from_bytes(prefix, "little")
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"declared length {length} exceeds cap {MAX_FRAME_BYTES}")
    body = transport.recv_exact(length)
    if len(body) != length:
        raise ProtocolError("truncated frame")
    return decode_message(prefix + body)
