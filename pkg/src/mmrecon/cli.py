"""mmrecon command line: matrix generation, simulation, benchmarks, sessions.

Config files are flat ``key = value`` text; '#' starts a comment. Keys
match the long flag names without the leading dashes (either '-' or '_'
spelling). Flags given on the command line override file values.

serve/connect run in seeded simulation mode: both sides derive Alice's
key from ``key-seed`` and Bob's noisy copy from ``channel-seed``, so only
syndromes and tags ever cross the wire, as in a real deployment.
"""

from __future__ import annotations

import argparse
import socket
import sys
import time
from pathlib import Path

import numpy as np

from .bench import (
    SweepSpec,
    gen_matrix_cmd,
    load_ensemble_dir,
    measure_throughput,
    run_sweep,
    write_csv,
)
from .bits import BitBlock
from .channel import ChannelModel, binary_entropy, bsc_corrupt, efficiency, generate_key
from .decoder import DecoderConfig
from .matrix import DegreeProfile, build_ensemble
from .session import SessionConfig, alice_run, bob_run, disclosed_information
from .transport import SocketTransport

__all__ = ["main"]


class CliError(SystemExit):
    def __init__(self, message: str):
        print(f"mmrecon: error: {message}", file=sys.stderr)
        super().__init__(2)


def parse_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merged(args: argparse.Namespace, key: str, default=None, cast=str):
    """Flag value if given, else config-file value, else default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    config = getattr(args, "_config_values", {})
    if key in config:
        try:
            return cast(config[key])
        except ValueError:
            raise CliError(f"config key {key}: cannot parse {config[key]!r}") from None
    return default


def _parse_float_list(text: str) -> tuple[float, ...]:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        count = int(round((stop - start) / step)) + 1
        return tuple(round(start + i * step, 10) for i in range(count))
    return tuple(float(p) for p in text.split(","))


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(","))


def _decoder_config(args) -> DecoderConfig:
    return DecoderConfig(
        max_iterations=_merged(args, "max_iterations", 60, int),
        llr_clamp=_merged(args, "llr_clamp", 30.0, float),
        damping=_merged(args, "damping", 0.0, float),
        combining_mode=_merged(args, "combining_mode", "joint-graph"),
    )


def _load_or_build_ensemble(args, u: int):
    matrix_dir = _merged(args, "matrix_dir")
    if matrix_dir:
        ensemble = load_ensemble_dir(matrix_dir)
        if ensemble.u < u:
            raise CliError(f"{matrix_dir} holds u={ensemble.u} matrices, need {u}")
        return ensemble
    n = _merged(args, "n", None, int)
    m = _merged(args, "m", None, int)
    if n is None or m is None:
        raise CliError("give either --matrix-dir or both --n and --m")
    degree = _merged(args, "col_degree", 3, int)
    seed = _merged(args, "matrix_seed", 1, int)
    return build_ensemble(n, m, DegreeProfile.regular(degree), u, seed, workers=2)


def _session_config(args) -> SessionConfig:
    u = _merged(args, "u", 3, int)
    ensemble = _load_or_build_ensemble(args, u)
    return SessionConfig(
        ensemble=ensemble.prefix(u),
        k=_merged(args, "k", 16, int),
        e=_merged(args, "e", 0.02, float),
        decoder=_decoder_config(args),
        tag_width=_merged(args, "tag_width", 64, int),
        session_id=_merged(args, "session_id", 0, int),
        seed=_merged(args, "seed", 0, int),
        workers=_merged(args, "workers", 2, int),
    )


def _print_report(report, role: str) -> None:
    print(f"[{role}] session {report.session_id}: n={report.n} m={report.m} "
          f"u={report.u} k={report.k} e={report.e}")
    for b in report.blocks:
        state = "ok" if b.succeeded else ("undetected-error" if b.converged else "failed")
        extra = "" if b.residual_errors is None else f" residual={b.residual_errors}"
        print(f"  block {b.index}: {state} iterations={b.iterations} "
              f"disclosed={b.disclosed_bits}{extra}")
    print(f"[{role}] success_rate={report.success_rate:.4f} "
          f"mean_iterations={report.mean_iterations:.2f} "
          f"throughput={report.throughput_mbps:.3f} Mbps "
          f"wall={report.wall_time_s:.3f}s verify_ok={report.verify_ok}")
    summary = disclosed_information(report)
    if summary.f_conservative is not None:
        print(f"[{role}] disclosed {summary.bits_per_block} bits/block: "
              f"f_conservative={summary.f_conservative:.4f} "
              f"f_single_matrix={summary.f_single_matrix:.4f}")


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host:
        raise CliError(f"address must be host:port, got {text!r}")
    return host, int(port)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen_matrix(args) -> int:
    profile = DegreeProfile.regular(_merged(args, "col_degree", 3, int))
    n = _merged(args, "n", None, int)
    m = _merged(args, "m", None, int)
    if n is None or m is None:
        raise CliError("gen-matrix needs --n and --m")
    manifest = gen_matrix_cmd(
        n=n,
        m=m,
        profile=profile,
        u=_merged(args, "u", 3, int),
        seed=_merged(args, "seed", 1, int),
        out_dir=args.out_dir,
        compute_girth=args.girth,
        workers=2,
    )
    print(f"wrote {len(manifest['files'])} matrices to {args.out_dir} "
          f"(R={manifest['code_rate']:.4f})")
    for entry in manifest["files"]:
        girth = entry.get("girth")
        girth_txt = f" girth={girth}" if girth is not None else ""
        print(f"  {entry['name']} seed={entry['seed']} edges={entry['edges']}"
              f"{girth_txt} sha256={entry['sha256'][:16]}...")
    return 0


def cmd_simulate(args) -> int:
    u = _merged(args, "u", 3, int)
    ensemble = _load_or_build_ensemble(args, u)
    e = _merged(args, "e", 0.05, float)
    frames = _merged(args, "frames", 20, int)
    seed = _merged(args, "seed", 0, int)
    f = efficiency(ensemble.m, ensemble.n, e)
    print(f"point: n={ensemble.n} m={ensemble.m} u={u} e={e} "
          f"R={1 - ensemble.m / ensemble.n:.4f} f={f:.4f}")
    if f <= 1.0:
        print("warning: f <= 1, operating point below the Shannon limit")
    prior_e = _merged(args, "prior_e", None, float)
    if prior_e is not None and prior_e != e:
        print(f"prior sensitivity: decoder assumes e={prior_e}, channel uses e={e}")
    point = measure_throughput(
        ensemble, u, e,
        frames=frames,
        decoder=_decoder_config(args),
        workers=_merged(args, "workers", 1, int),
        seed=seed,
        warmup=_merged(args, "warmup", 5, int),
        prior_e=prior_e,
    )
    print(f"frames={point.frames} success_rate={point.success_rate:.4f} "
          f"mean_iterations={point.mean_iterations:.2f}")
    print(f"throughput={point.mbps:.3f} Mbps mean_time={point.mean_time_ms:.3f} ms "
          f"mean_iteration_time={point.mean_iteration_time_ms:.3f} ms "
          f"residual_error_rate={point.residual_error_rate:.6f}")
    return 0


def cmd_bench(args) -> int:
    dirs = args.matrix_dir or []
    config_dirs = _merged(args, "matrix_dirs")
    if not dirs and config_dirs:
        dirs = config_dirs.split(",")
    if not dirs:
        raise CliError("bench needs at least one --matrix-dir")
    ensembles = {}
    for d in dirs:
        ens = load_ensemble_dir(d)
        ensembles[round(1.0 - ens.m / ens.n, 6)] = ens
    spec = SweepSpec(
        e_values=_parse_float_list(_merged(args, "e_values", "0.03:0.10:0.01")),
        u_values=_parse_int_list(_merged(args, "u_values", "1,2,3")),
        ensembles=ensembles,
        frames=_merged(args, "frames", 200, int),
        decoder=_decoder_config(args),
        workers=_merged(args, "workers", 2, int),
        seed=_merged(args, "seed", 0, int),
        warmup=_merged(args, "warmup", 5, int),
    )
    out = _merged(args, "out")
    started = time.perf_counter()
    if out:
        with open(out, "w", newline="") as fh:
            rows = run_sweep(spec, fh)
        print(f"{len(rows)} rows -> {out} ({time.perf_counter() - started:.1f}s)")
    else:
        rows = run_sweep(spec, sys.stdout)
    return 0


def cmd_serve(args) -> int:
    config = _session_config(args)
    host, port = _parse_addr(_merged(args, "listen", "127.0.0.1:7045"))
    key = generate_key(config.total_key_bits, _merged(args, "key_seed", 100, int))
    noisy, _ = bsc_corrupt(key, ChannelModel(config.e, _merged(args, "channel_seed", 200, int)))
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen(1)
    print(f"[bob] listening on {host}:{listener.getsockname()[1]}")
    conn, peer = listener.accept()
    listener.close()
    conn.settimeout(300)
    print(f"[bob] session from {peer[0]}:{peer[1]}")
    corrected, report = bob_run(noisy, config, SocketTransport(conn))
    _print_report(report, "bob")
    out_file = _merged(args, "corrected_out")
    if out_file:
        Path(out_file).write_bytes(corrected.to_bytes())
        print(f"[bob] corrected key -> {out_file}")
    return 0 if report.completed else 1


def cmd_connect(args) -> int:
    config = _session_config(args)
    host, port = _parse_addr(args.address)
    key = generate_key(config.total_key_bits, _merged(args, "key_seed", 100, int))
    transport = SocketTransport.connect(host, port, timeout=300)
    report = alice_run(key, config, transport)
    _print_report(report, "alice")
    return 0 if report.completed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmrecon",
        description="Multi-matrix LDPC reconciliation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value config file; flags override")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--workers", type=int, help="worker threads")
        p.add_argument("--max-iterations", type=int, dest="max_iterations")
        p.add_argument("--llr-clamp", type=float, dest="llr_clamp")
        p.add_argument("--damping", type=float)
        p.add_argument("--combining-mode", dest="combining_mode",
                       choices=("joint-graph", "isolated-per-matrix"))

    p = sub.add_parser("gen-matrix", help="build PEG matrices and a manifest")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--u", type=int, help="matrices in the ensemble (default 3)")
    p.add_argument("--col-degree", type=int, dest="col_degree")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--girth", action="store_true", default=None)
    p.add_argument("--no-girth", action="store_false", dest="girth")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen_matrix)

    p = sub.add_parser("simulate", help="run one grid point, verbose")
    add_common(p)
    p.add_argument("--matrix-dir", dest="matrix_dir")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--col-degree", type=int, dest="col_degree")
    p.add_argument("--matrix-seed", type=int, dest="matrix_seed")
    p.add_argument("--u", type=int)
    p.add_argument("--e", type=float)
    p.add_argument("--prior-e", type=float, dest="prior_e",
                   help="decode with a misestimated e (sensitivity check)")
    p.add_argument("--frames", type=int)
    p.add_argument("--warmup", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="sweep e x u x R, emit CSV")
    add_common(p)
    p.add_argument("--matrix-dir", action="append", dest="matrix_dir",
                   help="ensemble directory (repeat for multiple code rates)")
    p.add_argument("--e-values", dest="e_values",
                   help="comma list or start:stop:step (default 0.03:0.10:0.01)")
    p.add_argument("--u-values", dest="u_values", help="comma list (default 1,2,3)")
    p.add_argument("--frames", type=int, help="frames per grid point (default 200)")
    p.add_argument("--warmup", type=int)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_bench)

    def add_session(p):
        add_common(p)
        p.add_argument("--matrix-dir", dest="matrix_dir")
        p.add_argument("--n", type=int)
        p.add_argument("--m", type=int)
        p.add_argument("--col-degree", type=int, dest="col_degree")
        p.add_argument("--matrix-seed", type=int, dest="matrix_seed")
        p.add_argument("--u", type=int)
        p.add_argument("--k", type=int, help="blocks per session (default 16)")
        p.add_argument("--e", type=float)
        p.add_argument("--tag-width", type=int, dest="tag_width", choices=(0, 64))
        p.add_argument("--session-id", type=int, dest="session_id")
        p.add_argument("--key-seed", type=int, dest="key_seed",
                       help="shared seed for the simulated sifted key")
        p.add_argument("--channel-seed", type=int, dest="channel_seed",
                       help="seed for bob's simulated BSC noise")

    p = sub.add_parser("serve", help="run bob: accept one session (simulation mode)")
    add_session(p)
    p.add_argument("--listen", help="host:port (default 127.0.0.1:7045)")
    p.add_argument("--corrected-out", dest="corrected_out",
                   help="write the corrected key bytes here")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("connect", help="run alice against a serving bob")
    add_session(p)
    p.add_argument("address", help="host:port of the serving bob")
    p.set_defaults(func=cmd_connect)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config_path = getattr(args, "config", None)
    args._config_values = parse_config_file(config_path) if config_path else {}
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
