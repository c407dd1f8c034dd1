"""Secondary acceptance: training sanity, progressive property, and
end-to-end integration with the compression pipeline through its CLI.

Run with `pytest tests/test_acceptance.py -v -s` for one PASS line per
criterion.
"""

import functools
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from rnn_codec import decode, encode, iteration_residuals
from rnn_codec.codec import from_patches, pad_plane, run_coder, to_patches

from conftest import TRAIN_CFG


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\nACCEPTANCE FAIL: {name}")
                raise
            print(f"\nACCEPTANCE PASS: {name}")

        return wrapper

    return deco


@criterion("training sanity: loss halves within 50 epochs, residuals non-increasing")
def test_training_sanity(trained, train_planes):
    model, hist = trained
    assert TRAIN_CFG.epochs <= 50
    assert hist["final"] <= 0.5 * hist["initial"], hist
    res = iteration_residuals(model, train_planes, TRAIN_CFG.iterations)
    assert all(res[t + 1] <= res[t] for t in range(len(res) - 1)), res


@criterion("progressive property: prefix decode bit-exact, L1(n=8) <= L1(n=1)")
def test_progressive_property(trained, heldout_planes):
    import torch

    model, _ = trained
    plane = heldout_planes[0]
    stream = encode(plane, model, 8)
    padded = pad_plane(torch.as_tensor(plane))
    x = to_patches(padded)
    model.eval()
    with torch.no_grad():
        _, recons = run_coder(model, x, 8)
    h, w = padded.shape
    for k in (1, 2, 5, 8):
        internal = from_patches(recons[k - 1][:, 0], h, w)[
            : plane.shape[0], : plane.shape[1]
        ].numpy()
        assert np.array_equal(decode(stream.prefix(k), model), internal)

    l1_1 = l1_8 = 0.0
    for p in heldout_planes:
        s = encode(p, model, 8)
        l1_1 += float(np.abs(decode(s.prefix(1), model) - p).mean())
        l1_8 += float(np.abs(decode(s, model) - p).mean())
    assert l1_8 <= l1_1, (l1_8, l1_1)


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", *args], capture_output=True, text=True
    )
    assert proc.returncode == 0, f"{args}: {proc.stderr}"
    return proc.stdout


@criterion("end-to-end: EXTERNAL_RNN container decodes, finite SNNRMSE, bpp < RAW")
def test_end_to_end_integration(trained, tmp_path):
    if shutil.which(sys.executable) is None:  # pragma: no cover
        pytest.skip("no python executable")
    try:
        import lpcc  # noqa: F401
    except ImportError:
        pytest.skip("compression pipeline package not installed")
    from lpcc.sensor import default_calib_path

    model, _ = trained
    ckpt = tmp_path / "ckpt"
    model.save(ckpt)
    scene = default_calib_path().parent / "scenes" / "room.scene"

    scan = tmp_path / "scan.pcd"
    run_cli("lpcc.cli", "gen", "--scene", str(scene), "--seed", "21", "-o", str(scan))

    # planes out of the encoder side
    run_cli("lpcc.cli", "compress", str(scan), "-o", str(tmp_path / "tmp.lpcc"),
            "--dump-planes", str(tmp_path / "planes"))
    norm_plane = tmp_path / "planes" / "scan.range_norm.lpln"
    assert norm_plane.exists()

    # neural bitstream -> container
    bits = tmp_path / "scan.rnnb"
    run_cli("rnn_codec.cli", "encode", "--model", str(ckpt), "--plane",
            str(norm_plane), "--out", str(bits), "-n", "8")
    rnn_lpcc = tmp_path / "rnn.lpcc"
    run_cli("lpcc.cli", "compress", str(scan), "-o", str(rnn_lpcc),
            "--range-codec", "external_rnn", "--rnn-bitstream", str(bits),
            "--rnn-iterations", "8")

    # decode side
    decoded = tmp_path / "decoded.lpln"
    run_cli("rnn_codec.cli", "decode", "--model", str(ckpt), "--bits", str(bits),
            "--out", str(decoded))
    rec = tmp_path / "rec.pcd"
    run_cli("lpcc.cli", "decompress", str(rnn_lpcc), "-o", str(rec),
            "--rnn-plane", str(decoded))

    # RAW baseline for the footprint comparison
    raw_lpcc = tmp_path / "raw.lpcc"
    run_cli("lpcc.cli", "compress", str(scan), "-o", str(raw_lpcc),
            "--range-codec", "raw", "--azimuth-codec", "raw",
            "--intensity-codec", "raw")

    out = run_cli("lpcc.cli", "evaluate", "--original", str(scan),
                  "--reconstructed", str(rec), "--payload", str(rnn_lpcc))
    record = out.strip().splitlines()[-1].split(",")
    snnrmse, bpp = float(record[1]), float(record[3])
    raw_bpp = (
        raw_lpcc.stat().st_size * 8
        / int(record[4])
    )
    print(f"\n  rnn pipeline: snnrmse {snnrmse:.4f} m, {bpp:.2f} bpp "
          f"(raw planes: {raw_bpp:.2f} bpp)")
    assert np.isfinite(snnrmse)
    assert bpp < raw_bpp
