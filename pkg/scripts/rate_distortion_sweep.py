#!/usr/bin/env python3
"""Rate/distortion sweep: bpp vs SNNRMSE / SNNRMSE_I over codec settings.

Sweeps the wavelet target ratio for the range plane (azimuth fixed at
ratio 10, intensity lossless) and emits one CSV record per operating point,
the shape of data needed for distortion-vs-footprint curves. Points with an
external neural bitstream can be appended by running the compression CLI
with --range-codec external_rnn and `evaluate`.
"""

import argparse
import sys
import time

from lpcc import (
    CodecId,
    frame_bpp,
    synth_scan,
    synthetic_vlp32,
    write_frame,
)
from lpcc.ingest import random_room_scene
from lpcc.metrics import evaluate_clouds
from lpcc.pipeline import CodecChoices, compress_cloud, decompress_frame


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--ratios", type=float, nargs="+",
                    default=[2, 4, 6, 8, 12, 16, 24, 32])
    ap.add_argument("--scans", type=int, default=3)
    args = ap.parse_args()

    cfg = synthetic_vlp32()
    clouds = [
        synth_scan(random_room_scene(seed=args.seed + k), cfg, frame_id=f"s{k}")
        for k in range(args.scans)
    ]

    print("range_ratio,frame_id,snnrmse,snnrmse_i,bpp,encode_ms,decode_ms")
    for ratio in args.ratios:
        choices = CodecChoices(
            range_codec=CodecId.LOSSY_WAVELET,
            azimuth_codec=CodecId.LOSSY_WAVELET,
            intensity_codec=CodecId.LOSSLESS,
            quality=float(ratio),
        )
        for cloud in clouds:
            t0 = time.perf_counter()
            frame = compress_cloud(cloud, cfg, choices)
            data = write_frame(frame)
            t1 = time.perf_counter()
            rec = decompress_frame(frame, cfg)
            t2 = time.perf_counter()
            rep = evaluate_clouds(cloud, rec, len(data))
            print(
                f"{ratio:g},{rep.frame_id},{rep.snnrmse:.6f},{rep.snnrmse_i:.4f},"
                f"{frame_bpp(frame, cloud.n_valid):.3f},"
                f"{1e3 * (t1 - t0):.0f},{1e3 * (t2 - t1):.0f}"
            )
        sys.stdout.flush()


if __name__ == "__main__":
    main()
