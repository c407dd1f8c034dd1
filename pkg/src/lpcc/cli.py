"""Batch command-line interface.

Subcommands: gen, compress, decompress, evaluate, inspect. Exit codes:
0 success, 2 input/usage error, 3 internal error. Failures print one
machine-readable JSON line to stderr. LPCC_THREADS bounds the worker pool
used for multi-frame inputs; output order always matches input order.

Timings are printed for information only; they are hardware-dependent and
never part of any contract.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .codecs import CodecId, codec_from_name
from .container import (
    UNCOMPRESSED_BPP,
    frame_bpp,
    iter_frames,
    read_frame,
    write_frame,
)
from .errors import LpccError, PcdError
from .ingest import load_pcd, load_scene, save_pcd, synth_scan
from .metrics import evaluate_clouds
from .pipeline import (
    CodecChoices,
    compress_cloud,
    decompress_frame,
    normalized_range_plane,
    preprocess,
    read_plane_file,
    write_plane_file,
)
from .sensor import default_calib_path, load_config


def _workers() -> int:
    env = os.environ.get("LPCC_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _calib(args) -> "SensorConfig":  # noqa: F821
    return load_config(args.calib)


def _add_calib(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--calib",
        default=str(default_calib_path()),
        help="sensor calibration document (default: shipped synthetic VLP-32)",
    )


def _numbered(path: Path, i: int, n: int) -> Path:
    if n == 1:
        return path
    if "{i}" in path.name:
        return path.with_name(path.name.replace("{i}", f"{i:03d}"))
    return path.with_name(f"{path.stem}_{i:03d}{path.suffix}")


# --- subcommands -------------------------------------------------------------


def _cmd_gen(args) -> int:
    config = _calib(args)
    scene = load_scene(args.scene)
    out = Path(args.output)
    for k in range(args.frames):
        seed = (args.seed if args.seed is not None else scene.seed) + k
        spec_k = scene if seed == scene.seed else _reseed(scene, seed)
        cloud = synth_scan(spec_k, config, frame_id=f"synth-{seed}")
        dst = _numbered(out, k, args.frames)
        save_pcd(cloud, dst, binary=not args.ascii, width=config.cols,
                 height=config.rows)
        print(f"{dst}: {cloud.n_valid}/{cloud.n_points} returns, seed {seed}")
    return 0


def _reseed(scene, seed: int):
    from dataclasses import replace

    return replace(scene, seed=seed)


def _choices(args) -> CodecChoices:
    return CodecChoices(
        range_codec=codec_from_name(args.range_codec),
        azimuth_codec=codec_from_name(args.azimuth_codec),
        intensity_codec=codec_from_name(args.intensity_codec),
        quality=args.quality,
    )


def _cmd_compress(args) -> int:
    config = _calib(args)
    choices = _choices(args)
    rnn_payload = Path(args.rnn_bitstream).read_bytes() if args.rnn_bitstream else None

    def one(path: str) -> bytes:
        cloud = load_pcd(path)
        if not cloud.is_ordered_for(config):
            raise PcdError(
                f"{path}: {cloud.n_points} points do not fill the "
                f"{config.rows}x{config.cols} grid"
            )
        t0 = time.perf_counter()
        frame = compress_cloud(
            cloud, config, choices,
            rnn_payload=rnn_payload, rnn_iterations=args.rnn_iterations,
        )
        data = write_frame(frame)
        dt = (time.perf_counter() - t0) * 1e3
        bpp = frame_bpp(frame, cloud.n_valid) if cloud.n_valid else float("nan")
        for kind, cw in frame.plane_entries:
            print(f"  {kind.name.lower():9s} {cw.codec.name:13s} {len(cw.payload)} B")
        print(
            f"{path}: {len(data)} B, {bpp:.2f} bpp "
            f"({bpp / UNCOMPRESSED_BPP * 100:.1f}% of {UNCOMPRESSED_BPP:.0f} bpp raw), "
            f"{dt:.0f} ms"
        )
        if args.dump_planes:
            _dump_planes(cloud, config, Path(args.dump_planes), Path(path).stem)
        return data

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        blobs = list(pool.map(one, args.inputs))
    Path(args.output).write_bytes(b"".join(blobs))
    return 0


def _dump_planes(cloud, config, out_dir: Path, stem: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    planes, nan, norm = preprocess(cloud, config)
    norm_plane = normalized_range_plane(planes, norm, config.max_range)
    (out_dir / f"{stem}.range_norm.lpln").write_bytes(
        write_plane_file(norm_plane, norm.mu, norm.theta)
    )
    (out_dir / f"{stem}.azimuth.lpln").write_bytes(write_plane_file(planes.azimuth_q))
    (out_dir / f"{stem}.intensity.lpln").write_bytes(write_plane_file(planes.intensity))
    print(f"  planes dumped to {out_dir}/{stem}.*.lpln")


def _cmd_decompress(args) -> int:
    config = _calib(args)
    rnn_plane = None
    if args.rnn_plane:
        rnn_plane, _, _ = read_plane_file(Path(args.rnn_plane).read_bytes())
        rnn_plane = rnn_plane.astype(np.float64)
    data = Path(args.input).read_bytes()
    frames = list(iter_frames(data, config))
    out = Path(args.output)

    def one(k_frame):
        k, frame = k_frame
        t0 = time.perf_counter()
        cloud = decompress_frame(frame, config, rnn_plane=rnn_plane,
                                 frame_id=f"{Path(args.input).stem}-{k}")
        dt = (time.perf_counter() - t0) * 1e3
        dst = _numbered(out, k, len(frames))
        save_pcd(cloud, dst, binary=not args.ascii)
        print(f"{dst}: {cloud.n_points} points, {dt:.0f} ms")

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        list(pool.map(one, enumerate(frames)))
    return 0


def _cmd_evaluate(args) -> int:
    original = load_pcd(args.original)
    reconstructed = load_pcd(args.reconstructed)
    payload = Path(args.payload).read_bytes()
    read_frame(payload)  # must be a single well-formed frame
    report = evaluate_clouds(
        original, reconstructed, len(payload), frame_id=Path(args.original).stem
    )
    line = report.csv_row()
    print(report.CSV_HEADER)
    print(line)
    if args.report:
        path = Path(args.report)
        if path.exists() and path.stat().st_size:
            with path.open("a") as fh:
                fh.write(line + "\n")
        else:
            path.write_text(report.CSV_HEADER + "\n" + line + "\n")
    return 0


def _cmd_inspect(args) -> int:
    data = Path(args.input).read_bytes()
    for k, frame in enumerate(iter_frames(data)):
        nan = frame.nan_index()
        n_valid = frame.rows * frame.cols - len(nan)
        print(f"frame {k}:")
        print(f"  grid {frame.rows}x{frame.cols}, d_max {frame.d_max} m")
        print(f"  sensor_digest {frame.sensor_digest.hex()}")
        print(f"  norm mu {frame.norm.mu:.4f} m, theta {frame.norm.theta:.4f} m")
        print(f"  nan entries {len(nan)} ({len(frame.nan_payload)} B sidecar)")
        for kind, cw in frame.plane_entries:
            q = f", quality {cw.quality:g}" if cw.quality is not None else ""
            print(f"  {kind.name.lower():9s} {cw.codec.name:13s} {len(cw.payload)} B{q}")
        size = len(write_frame(frame))
        if n_valid:
            print(f"  total {size} B, {size * 8 / n_valid:.2f} bpp over {n_valid} points")
        else:
            print(f"  total {size} B, no valid points")
    return 0


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lpcc",
        description="LiDAR scan <-> raster-plane compression pipeline",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate synthetic scans as PCD")
    _add_calib(g)
    g.add_argument("--scene", required=True, help="scene description file")
    g.add_argument("--seed", type=int, default=None, help="override the scene's seed")
    g.add_argument("--frames", type=int, default=1)
    g.add_argument("--ascii", action="store_true", help="write ASCII PCD")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=_cmd_gen)

    c = sub.add_parser("compress", help="PCD -> .lpcc container")
    _add_calib(c)
    c.add_argument("inputs", nargs="+", help="ordered PCD file(s)")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--range-codec", default="lossy_wavelet",
                   help="raw|lossless|lossy_wavelet|external_rnn")
    c.add_argument("--azimuth-codec", default="lossy_wavelet")
    c.add_argument("--intensity-codec", default="lossless")
    c.add_argument("--quality", type=float, default=10.0,
                   help="target compression ratio for lossy_wavelet planes")
    c.add_argument("--rnn-bitstream", default=None,
                   help="bitstream produced by the external neural codec")
    c.add_argument("--rnn-iterations", type=int, default=8,
                   help="iteration count recorded for an external_rnn plane")
    c.add_argument("--dump-planes", default=None, metavar="DIR",
                   help="also write preprocessed planes as .lpln exchange files")
    c.set_defaults(func=_cmd_compress)

    d = sub.add_parser("decompress", help=".lpcc container -> PCD")
    _add_calib(d)
    d.add_argument("input")
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--rnn-plane", default=None,
                   help=".lpln file holding the externally decoded range plane")
    d.add_argument("--ascii", action="store_true")
    d.set_defaults(func=_cmd_decompress)

    e = sub.add_parser("evaluate", help="fidelity metrics for a frame triple")
    e.add_argument("--original", required=True)
    e.add_argument("--reconstructed", required=True)
    e.add_argument("--payload", required=True, help=".lpcc file of this frame")
    e.add_argument("--report", default=None, help="append the CSV record here")
    e.set_defaults(func=_cmd_evaluate)

    i = sub.add_parser("inspect", help="describe a .lpcc file")
    i.add_argument("input")
    i.set_defaults(func=_cmd_inspect)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LpccError, OSError, ValueError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 2
    except Exception as exc:  # pragma: no cover - genuine bugs
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 3


if __name__ == "__main__":
    sys.exit(main())
