"""rnncodec: train / encode / decode for the progressive range-plane codec.

encode reads a normalized range plane from a .lpln exchange file and writes
a .rnnb bitstream; decode inverts it, echoing the normalization params so
the compression CLI can denormalize. Exit codes: 0 ok, 2 input error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .codec import RnnBitstream, BitstreamError, decode, encode
from .model import ModelConfig, RnnCodecModel
from .planes import load_plane, save_plane, synthetic_plane
from .train import TrainConfig, train


def _cmd_train(args) -> int:
    if args.data:
        planes = []
        for path in sorted(Path(args.data).glob("*.lpln")):
            plane, _, _ = load_plane(path)
            planes.append(plane.astype("float32"))
        if not planes:
            raise FileNotFoundError(f"no .lpln planes under {args.data}")
    else:
        planes = [
            synthetic_plane(args.seed + k, width=args.plane_width)
            for k in range(args.planes)
        ]
    model = RnnCodecModel(
        ModelConfig(bits_channels=args.bits_channels, seed=args.seed)
    )
    t0 = time.perf_counter()
    model, history = train(
        planes,
        TrainConfig(epochs=args.epochs, iterations=args.iterations, seed=args.seed),
        model=model,
    )
    model.save(args.out)
    dt = time.perf_counter() - t0
    print(
        f"{args.out}: loss {history['initial']:.4f} -> {history['final']:.4f} "
        f"({args.epochs} epochs, {dt:.0f} s), m={model.cfg.bits_per_patch_iteration}"
    )
    return 0


def _cmd_encode(args) -> int:
    model = RnnCodecModel.load(args.model)
    plane, mu, theta = load_plane(args.plane)
    t0 = time.perf_counter()
    stream = encode(plane.astype("float32"), model, args.iterations, mu=mu,
                    theta=theta)
    data = stream.to_bytes()
    Path(args.out).write_bytes(data)
    print(
        f"{args.out}: {len(data)} B ({stream.n_patches} patches x "
        f"{stream.iterations} iters x {stream.bits_per_patch_iteration} bits), "
        f"{1e3 * (time.perf_counter() - t0):.0f} ms"
    )
    return 0


def _cmd_decode(args) -> int:
    model = RnnCodecModel.load(args.model)
    stream = RnnBitstream.from_bytes(Path(args.bits).read_bytes())
    if args.iterations:
        stream = stream.prefix(args.iterations)
    t0 = time.perf_counter()
    plane = decode(stream, model)
    save_plane(plane, args.out, mu=stream.mu, theta=stream.theta)
    print(
        f"{args.out}: {plane.shape[1]}x{plane.shape[0]} plane from "
        f"{stream.iterations} iterations, {1e3 * (time.perf_counter() - t0):.0f} ms"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rnncodec", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model checkpoint")
    t.add_argument("--out", required=True, help="checkpoint directory")
    t.add_argument("--data", default=None,
                   help="directory of .lpln planes (default: synthetic set)")
    t.add_argument("--planes", type=int, default=8,
                   help="synthetic plane count when --data is not given")
    t.add_argument("--plane-width", type=int, default=512)
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--iterations", type=int, default=8)
    t.add_argument("--bits-channels", type=int, default=8,
                   help="m = 16 * this many channels")
    t.add_argument("--seed", type=int, default=7)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("encode", help=".lpln plane -> .rnnb bitstream")
    e.add_argument("--model", required=True)
    e.add_argument("--plane", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("-n", "--iterations", type=int, default=8)
    e.set_defaults(func=_cmd_encode)

    d = sub.add_parser("decode", help=".rnnb bitstream -> .lpln plane")
    d.add_argument("--model", required=True)
    d.add_argument("--bits", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("-n", "--iterations", type=int, default=None,
                   help="decode only the first n iterations")
    d.set_defaults(func=_cmd_decode)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BitstreamError, ValueError, OSError) as exc:
        print(f"rnncodec: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
