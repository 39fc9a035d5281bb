"""Benchmark harness: error-rate x matrix-count x code-rate sweeps.

Frames are embarrassingly parallel: each gets its own counter-derived RNG
streams (shared across u values of one grid point, so matrix-count
comparisons are paired) and a private decoder workspace per worker
thread. Aggregates therefore do not depend on the worker count.

Throughput counts successfully reconciled sifted bits only: frames that
converged and carried no residual bit errors.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Mapping

import numpy as np

from .alist import load_alist, save_alist
from .bits import BitBlock
from .channel import binary_entropy, efficiency, rng_stream
from .decoder import DecoderConfig, DecoderWorkspace, compute_syndrome, decode
from .matrix import DegreeProfile, MatrixEnsemble, build_ensemble

__all__ = [
    "SweepSpec",
    "SweepRow",
    "ThroughputPoint",
    "run_sweep",
    "measure_throughput",
    "gen_matrix_cmd",
    "load_ensemble_dir",
    "write_csv",
    "read_csv",
    "CSV_COLUMNS",
]

log = logging.getLogger("mmrecon.bench")

CSV_COLUMNS = (
    "e", "u", "R", "f", "frames", "success_rate", "mean_iterations",
    "throughput_mbps", "mean_time_ms", "residual_error_rate",
)

CSV_DOC_LINES = (
    "# mmrecon bench sweep, format v1",
    "# throughput_mbps counts successfully reconciled sifted bits only"
    " (converged frames with zero residual errors)",
    "# residual_error_rate = converged frames with residual bit errors / converged frames",
    "# frames=0 marks a grid point skipped as infeasible (f <= 1 at the requested e)",
)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition; code rates come in via prebuilt ensembles."""

    e_values: tuple[float, ...]
    u_values: tuple[int, ...]
    ensembles: Mapping[float, MatrixEnsemble]  # nominal R -> ensemble
    frames: int
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    workers: int = 1
    seed: int = 0
    warmup: int = 5
    k: int = 16

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError(f"frames per point must be >= 1, got {self.frames}")
        if not self.e_values:
            raise ValueError("no error rates given")
        if not self.u_values or min(self.u_values) < 1:
            raise ValueError("u values must be >= 1")
        if not self.ensembles:
            raise ValueError("no ensembles given")
        for r, ens in self.ensembles.items():
            if max(self.u_values) > ens.u:
                raise ValueError(
                    f"ensemble for R={r} has u={ens.u}, sweep needs {max(self.u_values)}"
                )


@dataclass(frozen=True)
class SweepRow:
    e: float
    u: int
    R: float
    f: float
    frames: int
    success_rate: float
    mean_iterations: float
    throughput_mbps: float
    mean_time_ms: float
    residual_error_rate: float


@dataclass(frozen=True)
class ThroughputPoint:
    mbps: float
    mean_time_ms: float
    mean_iteration_time_ms: float
    mean_iterations: float
    iterations_std: float
    success_rate: float
    residual_error_rate: float
    frames: int
    wall_time_s: float


def _frame_inputs(ensemble: MatrixEnsemble, u: int, e: float, seed: int, path: tuple[int, ...]):
    n = ensemble.n
    key_bits = rng_stream(seed, *path, 0).integers(0, 2, size=n, dtype=np.uint8)
    flips = (rng_stream(seed, *path, 1).random(n) < e).astype(np.uint8)
    key = BitBlock.from_bits(key_bits)
    noisy = BitBlock.from_bits(key_bits ^ flips)
    syndromes = [compute_syndrome(ensemble.matrices[l], key) for l in range(u)]
    return key, noisy, syndromes


def measure_throughput(
    ensemble: MatrixEnsemble,
    u: int,
    e: float,
    frames: int,
    decoder: DecoderConfig | None = None,
    workers: int = 1,
    seed: int = 0,
    warmup: int = 5,
    point_path: tuple[int, ...] = (),
    calibrate: bool = False,
    prior_e: float | None = None,
) -> ThroughputPoint:
    """Run one grid point: warmup frames, then timed measured frames.

    ``calibrate=True`` replaces the decoder with a no-op so the harness
    overhead (key generation, syndromes, dispatch) can be bounded.
    ``prior_e`` lets the decoder assume a misestimated crossover
    probability while the channel keeps the true ``e`` (sensitivity
    sweeps).
    """
    decoder = decoder or DecoderConfig()
    assumed_e = e if prior_e is None else prior_e
    sub = ensemble.prefix(u)
    tls = threading.local()

    def run_frame(idx_and_path):
        idx, path = idx_and_path
        key, noisy, syndromes = _frame_inputs(ensemble, u, e, seed, path + (idx,))
        ws = getattr(tls, "ws", None)
        if ws is None or ws.ensemble is not sub:
            ws = tls.ws = DecoderWorkspace(sub, decoder)
        t0 = time.perf_counter()
        if calibrate:
            converged, iterations, corrected = True, 0, noisy
        else:
            res = decode(sub, noisy, syndromes, assumed_e, decoder, workspace=ws)
            converged, iterations, corrected = res.converged, res.iterations_used, res.corrected
        dt = time.perf_counter() - t0
        residual = (corrected ^ key).weight() if converged else 0
        return converged, iterations, residual, dt

    def run_batch(jobs):
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(run_frame, jobs))
        return [run_frame(j) for j in jobs]

    run_batch([(i, point_path + (99,)) for i in range(warmup)])

    jobs = [(i, point_path) for i in range(frames)]
    wall0 = time.perf_counter()
    results = run_batch(jobs)
    wall = time.perf_counter() - wall0

    conv = [r for r in results if r[0]]
    good = [r for r in conv if r[2] == 0]
    good_bits = len(good) * ensemble.n
    iters = np.array([r[1] for r in results], dtype=np.float64)
    total_iters = int(iters.sum())
    decode_time = sum(r[3] for r in results)
    return ThroughputPoint(
        mbps=good_bits / wall / 1e6 if wall > 0 else 0.0,
        mean_time_ms=1e3 * decode_time / frames,
        mean_iteration_time_ms=1e3 * decode_time / total_iters if total_iters else 0.0,
        mean_iterations=float(iters.mean()),
        iterations_std=float(iters.std()),
        success_rate=len(conv) / frames,
        residual_error_rate=(len(conv) - len(good)) / len(conv) if conv else 0.0,
        frames=frames,
        wall_time_s=wall,
    )


def run_sweep(spec: SweepSpec, csv_sink: IO[str] | None = None) -> list[SweepRow]:
    """Run the full grid; emit CSV if a sink is given."""
    rows: list[SweepRow] = []
    for r_nominal in sorted(spec.ensembles):
        ensemble = spec.ensembles[r_nominal]
        for u in spec.u_values:
            for e in spec.e_values:
                f = efficiency(ensemble.m, ensemble.n, e)
                if f <= 1.0:
                    log.warning(
                        "skipping infeasible point R=%s u=%d e=%.4f (f=%.4f <= 1)",
                        r_nominal, u, e, f,
                    )
                    rows.append(SweepRow(e, u, r_nominal, f, 0, 0.0, 0.0, 0.0, 0.0, 0.0))
                    continue
                point_path = (int(round(r_nominal * 1e6)), int(round(e * 1e6)))
                point = measure_throughput(
                    ensemble, u, e,
                    frames=spec.frames,
                    decoder=spec.decoder,
                    workers=spec.workers,
                    seed=spec.seed,
                    warmup=spec.warmup,
                    point_path=point_path,
                )
                rows.append(SweepRow(
                    e=e, u=u, R=r_nominal, f=f, frames=point.frames,
                    success_rate=point.success_rate,
                    mean_iterations=point.mean_iterations,
                    throughput_mbps=point.mbps,
                    mean_time_ms=point.mean_time_ms,
                    residual_error_rate=point.residual_error_rate,
                ))
    if csv_sink is not None:
        write_csv(rows, csv_sink)
    return rows


def write_csv(rows: list[SweepRow], sink: IO[str]) -> None:
    for line in CSV_DOC_LINES:
        sink.write(line + "\n")
    writer = csv.writer(sink)
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([
            repr(row.e), row.u, repr(row.R), repr(row.f), row.frames,
            repr(row.success_rate), repr(row.mean_iterations),
            repr(row.throughput_mbps), repr(row.mean_time_ms),
            repr(row.residual_error_rate),
        ])


def read_csv(source: IO[str]) -> list[SweepRow]:
    lines = [ln for ln in source if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV columns {header}")
    out = []
    for rec in reader:
        if not rec:
            continue
        out.append(SweepRow(
            e=float(rec[0]), u=int(rec[1]), R=float(rec[2]), f=float(rec[3]),
            frames=int(rec[4]), success_rate=float(rec[5]),
            mean_iterations=float(rec[6]), throughput_mbps=float(rec[7]),
            mean_time_ms=float(rec[8]), residual_error_rate=float(rec[9]),
        ))
    return out


# ---------------------------------------------------------------------------
# matrix generation command
# ---------------------------------------------------------------------------

def gen_matrix_cmd(
    n: int,
    m: int,
    profile: DegreeProfile,
    u: int,
    seed: int,
    out_dir: str | Path,
    compute_girth: bool | None = None,
    workers: int | None = None,
) -> dict:
    """Build an ensemble, write alist files plus a hash manifest.

    The manifest carries no timestamps, so reruns with the same seed are
    byte-identical. Girth is measured by default up to n=2^15 (it is an
    O(n*E) scan).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not out.is_dir():
        raise OSError(f"not a directory: {out}")
    ensemble = build_ensemble(n, m, profile, u, seed, workers=workers)
    if compute_girth is None:
        compute_girth = n <= (1 << 15)
    entries = []
    for l, matrix in enumerate(ensemble.matrices):
        name = f"peg_n{n}_m{m}_u{l}.alist"
        path = out / name
        with open(path, "wb") as fh:
            save_alist(matrix, fh)
        entry = {
            "name": name,
            "seed": seed + l,
            "sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
            "edges": matrix.edge_count,
        }
        if compute_girth:
            entry["girth"] = matrix.girth()
        entries.append(entry)
    manifest = {
        "format_version": MANIFEST_VERSION,
        "n": n,
        "m": m,
        "u": u,
        "base_seed": seed,
        "code_rate": 1.0 - m / n,
        "profile": {
            "column_degree": profile.column_degree,
            "column_degrees": list(profile.column_degrees) if profile.column_degrees else None,
        },
        "files": entries,
    }
    with open(out / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_ensemble_dir(path: str | Path) -> MatrixEnsemble:
    """Load an ensemble written by gen_matrix_cmd, verifying file hashes."""
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {root}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {manifest.get('format_version')}")
    matrices = []
    for entry in manifest["files"]:
        fpath = root / entry["name"]
        raw = fpath.read_bytes()
        digest = hashlib.sha256(raw).hexdigest()
        if digest != entry["sha256"]:
            raise ValueError(f"{fpath} content hash mismatch (file changed since generation)")
        matrices.append(load_alist(io.BytesIO(raw)))
    return MatrixEnsemble(tuple(matrices))
