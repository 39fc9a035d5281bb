"""Alice/Bob reconciliation sessions over an abstract transport.

The protocol is one-way syndrome reconciliation: Alice streams one
SYNDROMES message per block (all u syndromes plus an optional 64-bit
verification tag), Bob decodes blocks concurrently and answers with one
RESULT each, then a session-end VERIFY digest over the successfully
reconciled blocks, and both sides exchange CLOSE. Nothing but syndromes
and tags ever crosses the wire, so the disclosure per block is exactly
u*m + tag_width bits regardless of iteration count.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bits import BitBlock
from .channel import binary_entropy, rng_stream, split_key
from .decoder import DecoderConfig, DecoderWorkspace, compute_syndrome, decode
from .matrix import MatrixEnsemble
from . import protocol
from .protocol import (
    MessageKind,
    ProtocolError,
    ProtocolMessage,
    RESULT_FAILED,
    RESULT_SUCCESS,
    RESULT_TAG_MISMATCH,
)
from .transport import InProcessTransport, TransportClosed, read_message, write_message

__all__ = [
    "SessionConfig",
    "BlockReport",
    "SessionReport",
    "DisclosureSummary",
    "SessionAborted",
    "alice_run",
    "bob_run",
    "disclosed_information",
    "run_local_session",
]


class SessionAborted(RuntimeError):
    """Session ended before completing; carries whatever was learned."""

    def __init__(self, reason: str, partial_report: "SessionReport | None" = None):
        super().__init__(reason)
        self.partial_report = partial_report


@dataclass(frozen=True)
class SessionConfig:
    ensemble: MatrixEnsemble
    k: int
    e: float
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    tag_width: int = 64
    session_id: int = 0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.e < 0.5:
            raise ValueError(f"e must be in (0, 0.5), got {self.e}")
        if self.tag_width not in (0, 64):
            raise ValueError(f"tag_width must be 0 or 64, got {self.tag_width}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    @property
    def n(self) -> int:
        return self.ensemble.n

    @property
    def total_key_bits(self) -> int:
        return self.k * self.ensemble.n

    @property
    def disclosed_bits_per_block(self) -> int:
        return self.ensemble.u * self.ensemble.m + self.tag_width


@dataclass
class BlockReport:
    index: int
    converged: bool
    verified: bool | None
    iterations: int
    disclosed_bits: int
    f_actual: float
    residual_errors: int | None = None
    elapsed_s: float | None = None

    @property
    def succeeded(self) -> bool:
        if not self.converged:
            return False
        return self.verified is not False


@dataclass
class SessionReport:
    session_id: int
    n: int
    m: int
    u: int
    k: int
    e: float
    tag_width: int
    blocks: list[BlockReport] = field(default_factory=list)
    wall_time_s: float = 0.0
    verify_ok: bool | None = None
    completed: bool = False

    @property
    def success_rate(self) -> float:
        if not self.blocks:
            return 0.0
        return sum(b.succeeded for b in self.blocks) / len(self.blocks)

    @property
    def mean_iterations(self) -> float:
        if not self.blocks:
            return 0.0
        return sum(b.iterations for b in self.blocks) / len(self.blocks)

    @property
    def throughput_mbps(self) -> float:
        if self.wall_time_s <= 0:
            return 0.0
        good_bits = sum(self.n for b in self.blocks if b.succeeded)
        return good_bits / self.wall_time_s / 1e6

    def deterministic_signature(self) -> tuple:
        """Everything except wall-clock measurements, for transport
        transparency comparisons."""
        return (
            self.session_id,
            self.n,
            self.m,
            self.u,
            self.k,
            self.e,
            self.tag_width,
            self.verify_ok,
            self.completed,
            tuple(
                (b.index, b.converged, b.verified, b.iterations, b.disclosed_bits)
                for b in self.blocks
            ),
        )


@dataclass(frozen=True)
class DisclosureSummary:
    total_bits: int
    bits_per_block: int
    f_conservative: float | None
    f_single_matrix: float | None


def disclosed_information(report: SessionReport) -> DisclosureSummary:
    """Disclosure accounting under both conventions.

    ``f_conservative`` counts every transmitted bit (u*m syndromes plus the
    tag) against the Shannon minimum; ``f_single_matrix`` keeps the
    single-matrix m in the numerator. Both are None when no block
    succeeded (efficiency of a failed session is undefined).
    """
    per_block = report.u * report.m + report.tag_width
    total = per_block * report.k
    if not any(b.succeeded for b in report.blocks):
        return DisclosureSummary(total, per_block, None, None)
    denom = report.n * binary_entropy(report.e)
    return DisclosureSummary(
        total_bits=total,
        bits_per_block=per_block,
        f_conservative=per_block / denom,
        f_single_matrix=report.m / denom,
    )


def _new_report(config: SessionConfig) -> SessionReport:
    return SessionReport(
        session_id=config.session_id,
        n=config.ensemble.n,
        m=config.ensemble.m,
        u=config.ensemble.u,
        k=config.k,
        e=config.e,
        tag_width=config.tag_width,
    )


def _expect(msg: ProtocolMessage | None, kind: MessageKind, report: SessionReport | None = None) -> ProtocolMessage:
    if msg is None:
        raise SessionAborted("transport closed mid-session", report)
    if msg.kind == MessageKind.ERROR:
        raise SessionAborted(f"peer error: {protocol.unpack_error(msg.payload)}", report)
    if msg.kind != kind:
        raise SessionAborted(f"expected {kind.name}, got {msg.kind.name}", report)
    return msg


def _block_f_actual(config: SessionConfig) -> float:
    return config.disclosed_bits_per_block / (config.ensemble.n * binary_entropy(config.e))


# ---------------------------------------------------------------------------
# Alice
# ---------------------------------------------------------------------------

def alice_run(key: BitBlock, config: SessionConfig, transport) -> SessionReport:
    """Send syndromes for every block of ``key`` and collect outcomes."""
    ens = config.ensemble
    if key.length != config.total_key_bits:
        raise ValueError(f"key length {key.length} != k*n = {config.total_key_bits}")
    report = _new_report(config)
    started = time.perf_counter()
    frames = split_key(key, ens.n)
    f_act = _block_f_actual(config)

    try:
        sid = config.session_id
        write_message(transport, ProtocolMessage(MessageKind.HELLO, sid, 0, protocol.pack_hello()))
        hello = _expect(read_message(transport), MessageKind.HELLO, report)
        peer_version = protocol.unpack_hello(hello.payload)
        if peer_version != protocol.PROTOCOL_VERSION:
            write_message(
                transport,
                ProtocolMessage(MessageKind.ERROR, sid, 0, protocol.pack_error(
                    f"protocol version mismatch: ours {protocol.PROTOCOL_VERSION}, peer {peer_version}"
                )),
            )
            raise SessionAborted(f"protocol version mismatch ({peer_version})", report)

        params = protocol.pack_params(
            ens.n, ens.m, config.k, ens.u, config.tag_width, config.e, ens.content_hashes()
        )
        write_message(transport, ProtocolMessage(MessageKind.PARAMS, sid, 0, params))
        _expect(read_message(transport), MessageKind.PARAMS, report)

        tag_seeds: list[bytes] = []
        for idx, block in enumerate(frames.blocks):
            syndromes = [compute_syndrome(h, block) for h in ens.matrices]
            if config.tag_width:
                seed = rng_stream(config.seed, idx, 7).bytes(8)
                tag = protocol.block_tag(block, seed)
            else:
                seed, tag = b"", b""
            tag_seeds.append(seed)
            write_message(
                transport,
                ProtocolMessage(
                    MessageKind.SYNDROMES, sid, idx,
                    protocol.pack_syndromes(syndromes, seed, tag),
                ),
            )

        outcomes: dict[int, BlockReport] = {}
        for _ in range(config.k):
            msg = _expect(read_message(transport), MessageKind.RESULT, report)
            if not 0 <= msg.block_index < config.k or msg.block_index in outcomes:
                raise SessionAborted(f"bogus RESULT block index {msg.block_index}", report)
            status, iterations, _mismatches, elapsed_us = protocol.unpack_result(msg.payload)
            outcomes[msg.block_index] = BlockReport(
                index=msg.block_index,
                converged=status != RESULT_FAILED,
                verified=(None if not config.tag_width else status == RESULT_SUCCESS),
                iterations=iterations,
                disclosed_bits=config.disclosed_bits_per_block,
                f_actual=f_act,
                elapsed_s=elapsed_us / 1e6,
            )
        report.blocks = [outcomes[i] for i in range(config.k)]

        verify = _expect(read_message(transport), MessageKind.VERIFY, report)
        digest, successes = protocol.unpack_verify(verify.payload)
        succeeded = [b.succeeded for b in report.blocks]
        expected = protocol.whole_key_digest(list(frames.blocks), succeeded)
        report.verify_ok = digest == expected and successes == sum(succeeded)

        write_message(transport, ProtocolMessage(MessageKind.CLOSE, sid, 0))
        _expect(read_message(transport), MessageKind.CLOSE, report)
        report.completed = True
        return report
    except (TransportClosed, ProtocolError) as exc:
        raise SessionAborted(str(exc), report) from exc
    finally:
        report.wall_time_s = time.perf_counter() - started


# ---------------------------------------------------------------------------
# Bob
# ---------------------------------------------------------------------------

def _decode_block(ens, block, syndromes, tag_seed, tag, config):
    t0 = time.perf_counter()
    result = decode(ens, block, syndromes, config.e, config.decoder)
    elapsed = time.perf_counter() - t0
    if not result.converged:
        status = RESULT_FAILED
        verified = None if not config.tag_width else False
    elif config.tag_width:
        ok = protocol.block_tag(result.corrected, tag_seed) == tag
        status = RESULT_SUCCESS if ok else RESULT_TAG_MISMATCH
        verified = ok
    else:
        status = RESULT_SUCCESS
        verified = None
    return result, status, verified, elapsed


def bob_run(noisy_key: BitBlock, config: SessionConfig, transport) -> tuple[BitBlock, SessionReport]:
    """Decode every block against the received syndromes.

    Returns the concatenated per-block decisions (failed blocks keep their
    last hard decision and are marked unsuccessful in the report).
    """
    ens = config.ensemble
    if noisy_key.length != config.total_key_bits:
        raise ValueError(f"key length {noisy_key.length} != k*n = {config.total_key_bits}")
    report = _new_report(config)
    started = time.perf_counter()
    frames = split_key(noisy_key, ens.n)
    f_act = _block_f_actual(config)
    sid = config.session_id

    try:
        hello = _expect(read_message(transport), MessageKind.HELLO, report)
        version = protocol.unpack_hello(hello.payload)
        if version != protocol.PROTOCOL_VERSION:
            write_message(
                transport,
                ProtocolMessage(MessageKind.ERROR, sid, 0, protocol.pack_error(
                    f"protocol version mismatch: ours {protocol.PROTOCOL_VERSION}, peer {version}"
                )),
            )
            raise SessionAborted(f"protocol version mismatch ({version})", report)
        write_message(transport, ProtocolMessage(MessageKind.HELLO, sid, 0, protocol.pack_hello()))

        params = _expect(read_message(transport), MessageKind.PARAMS, report)
        n, m, k, u, tag_width, e, hashes = protocol.unpack_params(params.payload)
        ours = (ens.n, ens.m, config.k, ens.u, config.tag_width)
        if (n, m, k, u, tag_width) != ours or hashes != ens.content_hashes():
            write_message(
                transport,
                ProtocolMessage(MessageKind.ERROR, sid, 0, protocol.pack_error(
                    "session parameters disagree (geometry or ensemble hashes)"
                )),
            )
            raise SessionAborted("session parameters disagree", report)
        if abs(e - config.e) > 1e-12:
            write_message(
                transport,
                ProtocolMessage(MessageKind.ERROR, sid, 0, protocol.pack_error(
                    f"crossover probability disagrees: ours {config.e}, peer {e}"
                )),
            )
            raise SessionAborted("crossover probability disagrees", report)
        write_message(transport, ProtocolMessage(MessageKind.PARAMS, sid, 0, params.payload))

        jobs = []
        for _ in range(config.k):
            msg = _expect(read_message(transport), MessageKind.SYNDROMES, report)
            if not 0 <= msg.block_index < config.k:
                raise SessionAborted(f"bogus SYNDROMES block index {msg.block_index}", report)
            syndromes, tag_seed, tag = protocol.unpack_syndromes(
                msg.payload, ens.u, ens.m, config.tag_width
            )
            jobs.append((msg.block_index, syndromes, tag_seed, tag))

        corrected: dict[int, BitBlock] = {}
        blocks: dict[int, BlockReport] = {}
        write_lock = threading.Lock()

        def run_job(job):
            idx, syndromes, tag_seed, tag = job
            result, status, verified, elapsed = _decode_block(
                ens, frames.blocks[idx], syndromes, tag_seed, tag, config
            )
            with write_lock:
                corrected[idx] = result.corrected
                blocks[idx] = BlockReport(
                    index=idx,
                    converged=result.converged,
                    verified=verified,
                    iterations=result.iterations_used,
                    disclosed_bits=config.disclosed_bits_per_block,
                    f_actual=f_act,
                    elapsed_s=elapsed,
                )
                write_message(
                    transport,
                    ProtocolMessage(
                        MessageKind.RESULT, sid, idx,
                        protocol.pack_result(
                            status,
                            result.iterations_used,
                            result.residual_syndrome_mismatches,
                            int(elapsed * 1e6),
                        ),
                    ),
                )

        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                list(pool.map(run_job, jobs))
        else:
            for job in jobs:
                run_job(job)

        report.blocks = [blocks[i] for i in range(config.k)]
        out_blocks = [corrected[i] for i in range(config.k)]
        succeeded = [b.succeeded for b in report.blocks]
        digest = protocol.whole_key_digest(out_blocks, succeeded)
        write_message(
            transport,
            ProtocolMessage(MessageKind.VERIFY, sid, config.k,
                            protocol.pack_verify(digest, sum(succeeded))),
        )

        _expect(read_message(transport), MessageKind.CLOSE, report)
        write_message(transport, ProtocolMessage(MessageKind.CLOSE, sid, 0))
        report.completed = True

        bits = BitBlock.from_bits(np.concatenate([b.to_bits() for b in out_blocks]))
        return bits, report
    except (TransportClosed, ProtocolError) as exc:
        raise SessionAborted(str(exc), report) from exc
    finally:
        report.wall_time_s = time.perf_counter() - started


# ---------------------------------------------------------------------------
# local harness
# ---------------------------------------------------------------------------

def run_local_session(
    alice_key: BitBlock,
    bob_key: BitBlock,
    config: SessionConfig,
    transport: str = "inproc",
):
    """Run both sides locally and fill simulation-only truth fields.

    ``transport`` is "inproc" (queue pair) or "tcp" (loopback socket).
    Returns (alice_report, bob_report, corrected_key).
    """
    import socket

    from .transport import SocketTransport

    if transport == "inproc":
        a_end, b_end = InProcessTransport.pair()
    elif transport == "tcp":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.bind(("127.0.0.1", 0))
        listener.listen(1)
        port = listener.getsockname()[1]
        client = socket.create_connection(("127.0.0.1", port), timeout=30)
        server_sock, _ = listener.accept()
        listener.close()
        client.settimeout(60)
        server_sock.settimeout(60)
        a_end, b_end = SocketTransport(client), SocketTransport(server_sock)
    else:
        raise ValueError(f"unknown transport {transport!r}")

    bob_out: dict = {}

    def bob_side():
        try:
            bob_out["result"] = bob_run(bob_key, config, b_end)
        except BaseException as exc:  # surfaced in the main thread
            bob_out["error"] = exc

    thread = threading.Thread(target=bob_side, name="bob", daemon=True)
    thread.start()
    try:
        alice_report = alice_run(alice_key, config, a_end)
    finally:
        thread.join(timeout=120)
    if "error" in bob_out:
        raise bob_out["error"]
    corrected, bob_report = bob_out["result"]

    # simulation-only truth: count residual bit errors per block
    truth = split_key(alice_key, config.ensemble.n)
    got = split_key(corrected, config.ensemble.n)
    for rep in bob_report.blocks:
        rep.residual_errors = (truth.blocks[rep.index] ^ got.blocks[rep.index]).weight()
    for rep in alice_report.blocks:
        rep.residual_errors = bob_report.blocks[rep.index].residual_errors
    return alice_report, bob_report, corrected
