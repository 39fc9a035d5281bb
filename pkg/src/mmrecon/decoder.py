"""Multi-matrix belief-propagation syndrome decoder.

One key block is decoded against u parity-check matrices simultaneously.
Each sweep updates every matrix's check-to-variable messages, then every
variable-to-check message, then takes the joint soft decision summing all
matrices' contributions on top of the channel prior. Decoding stops as
soon as the hard decision satisfies all u syndromes, or at the iteration
limit.

LLR convention: positive favors bit 0. LLR vectors are plain float64
arrays.

Two combining modes exist. In ``joint-graph`` mode (default) the
variable-to-check extrinsic sum spans every matrix's incoming messages,
which is exactly belief propagation on the vertically stacked (u*m) x n
matrix. In ``isolated-per-matrix`` mode each matrix's messages evolve
independently and only the final decision is joint.

Within a sweep, all check-node updates are mutually independent, as are
all variable-node updates (two-phase flooding schedule), so node updates
may be distributed over any number of workers without changing results.
Across frames, workspaces are private to one frame at a time while the
ensemble is shared read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bits import BitBlock
from .matrix import MatrixEnsemble, ParityCheckMatrix

__all__ = [
    "DecoderConfig",
    "DecoderWorkspace",
    "DecodeResult",
    "compute_syndrome",
    "init_priors",
    "c2v_update",
    "v2c_update",
    "soft_decision",
    "decode",
    "reset",
]

COMBINING_MODES = ("joint-graph", "isolated-per-matrix")


@dataclass(frozen=True)
class DecoderConfig:
    max_iterations: int = 60
    llr_clamp: float = 30.0
    damping: float = 0.0
    combining_mode: str = "joint-graph"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.llr_clamp > 0:
            raise ValueError(f"llr_clamp must be positive, got {self.llr_clamp}")
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError(f"damping must be in [0, 1], got {self.damping}")
        if self.combining_mode not in COMBINING_MODES:
            raise ValueError(f"combining_mode must be one of {COMBINING_MODES}")


@dataclass(frozen=True)
class DecodeResult:
    corrected: BitBlock
    converged: bool
    iterations_used: int
    residual_syndrome_mismatches: int
    decision_history: np.ndarray | None = None


class DecoderWorkspace:
    """Per-frame message buffers for one ensemble.

    Edge numbering is check-major across matrices (matrix 0's checks
    first), i.e. the layout of the vertically stacked matrix. ``v2c`` and
    ``c2v`` hold one float64 per edge; matrix l owns the slice
    ``edge_off[l]:edge_off[l+1]``.
    """

    def __init__(self, ensemble: MatrixEnsemble, config: DecoderConfig | None = None):
        self.ensemble = ensemble
        self.config = config or DecoderConfig()
        n, m, u = ensemble.n, ensemble.m, ensemble.u

        counts = [h.edge_count for h in ensemble.matrices]
        self.edge_off = np.zeros(u + 1, dtype=np.int64)
        np.cumsum(counts, out=self.edge_off[1:])
        total = int(self.edge_off[-1])

        self.chk_ptr = np.zeros(u * m + 1, dtype=np.int64)
        self.chk_var = np.empty(total, dtype=np.int32)
        for l, h in enumerate(ensemble.matrices):
            off = self.edge_off[l]
            self.chk_ptr[l * m + 1:(l + 1) * m + 1] = off + h.chk_ptr[1:]
            self.chk_var[off:off + h.edge_count] = h.chk_var

        # variable-side view: incident edge ids in ascending (stacked) order
        order = np.argsort(self.chk_var, kind="stable")
        col_deg = np.bincount(self.chk_var, minlength=n)
        self.var_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(col_deg, out=self.var_ptr[1:])
        self.var_edge = order.astype(np.int64)

        for a in (self.edge_off, self.chk_ptr, self.chk_var, self.var_ptr, self.var_edge):
            a.setflags(write=False)

        self.v2c = np.zeros(total, dtype=np.float64)
        self.c2v = np.zeros(total, dtype=np.float64)
        self.priors = np.zeros(n, dtype=np.float64)
        self.posterior = np.zeros(n, dtype=np.float64)
        self.hard = np.zeros(n, dtype=np.uint8)
        self._scratch = np.zeros(int(max(np.diff(self.chk_ptr).max(), 1)), dtype=np.float64)
        self.iteration = 0

    def reset(self) -> None:
        """Zero all messages and the iteration counter; keep capacity."""
        self.v2c[:] = 0.0
        self.c2v[:] = 0.0
        self.priors[:] = 0.0
        self.posterior[:] = 0.0
        self.hard[:] = 0
        self.iteration = 0

    def matrix_slice(self, l: int) -> slice:
        return slice(int(self.edge_off[l]), int(self.edge_off[l + 1]))


def compute_syndrome(matrix: ParityCheckMatrix, key: BitBlock) -> BitBlock:
    """z_j = XOR of key bits over check j's adjacency."""
    if key.length != matrix.n:
        raise ValueError(f"key length {key.length} != n={matrix.n}")
    bits = key.to_bits()
    syn = np.empty(matrix.m, dtype=np.uint8)
    _kernels.syndrome_pass(bits, matrix.chk_ptr, matrix.chk_var, syn, 0, matrix.m, 0)
    return BitBlock.from_bits(syn)


def init_priors(noisy_key: BitBlock, e: float) -> np.ndarray:
    """Branch-free BSC prior: (1 - 2*y_i) * ln((1-e)/e)."""
    if not 0.0 < e < 0.5:
        raise ValueError(f"crossover probability must be in (0, 0.5), got {e}")
    bits = noisy_key.to_bits().astype(np.float64)
    return (1.0 - 2.0 * bits) * math.log((1.0 - e) / e)


def c2v_update(workspace: DecoderWorkspace, matrix_index: int, syndrome: BitBlock) -> None:
    """Recompute matrix ``matrix_index``'s check-to-variable messages."""
    m = workspace.ensemble.m
    if syndrome.length != m:
        raise ValueError(f"syndrome length {syndrome.length} != m={m}")
    syn = syndrome.to_bits()
    _kernels.c2v_pass(
        workspace.v2c,
        workspace.c2v,
        workspace.chk_ptr,
        syn,
        matrix_index * m,
        (matrix_index + 1) * m,
        matrix_index * m,
        workspace.config.llr_clamp,
        workspace._scratch,
    )


def v2c_update(workspace: DecoderWorkspace, matrix_index: int) -> None:
    """Recompute matrix ``matrix_index``'s variable-to-check messages."""
    cfg = workspace.config
    _kernels.v2c_pass(
        workspace.v2c,
        workspace.c2v,
        workspace.var_ptr,
        workspace.var_edge,
        workspace.priors,
        workspace.edge_off[matrix_index],
        workspace.edge_off[matrix_index + 1],
        cfg.combining_mode == "joint-graph",
        cfg.damping,
        cfg.llr_clamp,
    )


def soft_decision(workspace: DecoderWorkspace) -> np.ndarray:
    """Posterior LLR per variable: prior + all matrices' c2v sums."""
    _kernels.posterior_pass(
        workspace.c2v,
        workspace.var_ptr,
        workspace.var_edge,
        workspace.priors,
        workspace.posterior,
    )
    return workspace.posterior


def reset(workspace: DecoderWorkspace) -> None:
    workspace.reset()


def decode(
    ensemble: MatrixEnsemble,
    noisy_key: BitBlock,
    syndromes: list[BitBlock],
    e: float,
    config: DecoderConfig | None = None,
    workspace: DecoderWorkspace | None = None,
    track_decisions: bool = False,
) -> DecodeResult:
    """Correct ``noisy_key`` toward the key behind ``syndromes``.

    Deterministic given inputs. The syndrome check on the uncorrected key
    counts as iteration 0; a zero-error frame therefore reports
    ``iterations_used == 0``.
    """
    config = config or DecoderConfig()
    n, m, u = ensemble.n, ensemble.m, ensemble.u
    if noisy_key.length != n:
        raise ValueError(f"key length {noisy_key.length} != n={n}")
    if len(syndromes) != u:
        raise ValueError(f"{len(syndromes)} syndromes for u={u} matrices")
    for l, z in enumerate(syndromes):
        if z.length != m:
            raise ValueError(f"syndrome {l} length {z.length} != m={m}")
    if workspace is None:
        workspace = DecoderWorkspace(ensemble, config)
    elif workspace.ensemble is not ensemble and workspace.ensemble != ensemble:
        raise ValueError("workspace was built for a different ensemble")
    workspace.config = config

    workspace.reset()
    workspace.priors[:] = init_priors(noisy_key, e)
    syn = np.concatenate([z.to_bits() for z in syndromes])

    if track_decisions:
        history = np.zeros((config.max_iterations + 1, n), dtype=np.uint8)
    else:
        history = np.zeros((1, 1), dtype=np.uint8)

    converged, iters, mismatches = _kernels.decode_loop(
        workspace.chk_ptr,
        workspace.chk_var,
        workspace.var_ptr,
        workspace.var_edge,
        workspace.edge_off,
        m,
        syn,
        workspace.priors,
        workspace.v2c,
        workspace.c2v,
        workspace.posterior,
        workspace.hard,
        workspace._scratch,
        config.max_iterations,
        config.llr_clamp,
        config.damping,
        config.combining_mode == "joint-graph",
        history,
        track_decisions,
    )
    workspace.iteration = iters
    return DecodeResult(
        corrected=BitBlock.from_bits(workspace.hard),
        converged=bool(converged),
        iterations_used=int(iters),
        residual_syndrome_mismatches=int(mismatches),
        decision_history=history[: iters + 1] if track_decisions else None,
    )
