"""Plane <-> progressive bitstream (.rnnb).

A plane is replicate-padded to multiples of 32, tiled into 32x32 patches
(row-major), and coded for n iterations. Bits are packed 8 per byte with
-1 -> 0 and +1 -> 1, **iteration-major**: the stream for k < n iterations
is a byte prefix of the stream for n, so truncating at an iteration
boundary decodes to the intermediate reconstruction x_hat_k.

Stream size is patches * iterations * m bits regardless of content.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .model import PATCH, RnnCodecModel

MAGIC = b"RNNB"
VERSION = 1
_HEADER = struct.Struct("<4sB8sHHHHBIff")
# magic version digest orig_w orig_h padded_w padded_h iterations m mu theta


class BitstreamError(ValueError):
    pass


@dataclass(frozen=True)
class RnnBitstream:
    manifest_digest: bytes
    orig_width: int
    orig_height: int
    padded_width: int
    padded_height: int
    iterations: int
    bits_per_patch_iteration: int
    mu: float
    theta: float
    payload: bytes

    @property
    def n_patches(self) -> int:
        return (self.padded_width // PATCH) * (self.padded_height // PATCH)

    @property
    def block_bytes(self) -> int:
        """Packed bytes per iteration."""
        return math.ceil(self.n_patches * self.bits_per_patch_iteration / 8)

    def to_bytes(self) -> bytes:
        return (
            _HEADER.pack(
                MAGIC,
                VERSION,
                self.manifest_digest,
                self.orig_width,
                self.orig_height,
                self.padded_width,
                self.padded_height,
                self.iterations,
                self.bits_per_patch_iteration,
                self.mu,
                self.theta,
            )
            + self.payload
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "RnnBitstream":
        if len(data) < _HEADER.size:
            raise BitstreamError("bitstream shorter than its header")
        magic, ver, digest, ow, oh, pw, ph, n, m, mu, theta = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise BitstreamError(f"bad magic {magic!r}")
        if ver != VERSION:
            raise BitstreamError(f"unsupported bitstream version {ver}")
        if pw % PATCH or ph % PATCH or pw < ow or ph < oh or n < 1:
            raise BitstreamError("inconsistent geometry header")
        stream = cls(
            manifest_digest=digest,
            orig_width=ow,
            orig_height=oh,
            padded_width=pw,
            padded_height=ph,
            iterations=n,
            bits_per_patch_iteration=m,
            mu=mu,
            theta=theta,
            payload=data[_HEADER.size :],
        )
        if len(stream.payload) != n * stream.block_bytes:
            raise BitstreamError(
                f"payload is {len(stream.payload)} bytes; {n} iterations need "
                f"{n * stream.block_bytes} (truncate only on iteration boundaries)"
            )
        return stream

    def prefix(self, k: int) -> "RnnBitstream":
        """The first k iterations as a standalone stream."""
        if not 1 <= k <= self.iterations:
            raise BitstreamError(f"prefix length {k} not in 1..{self.iterations}")
        return RnnBitstream(
            manifest_digest=self.manifest_digest,
            orig_width=self.orig_width,
            orig_height=self.orig_height,
            padded_width=self.padded_width,
            padded_height=self.padded_height,
            iterations=k,
            bits_per_patch_iteration=self.bits_per_patch_iteration,
            mu=self.mu,
            theta=self.theta,
            payload=self.payload[: k * self.block_bytes],
        )


# --- tiling ----------------------------------------------------------------------


def pad_plane(plane: torch.Tensor) -> torch.Tensor:
    h, w = plane.shape
    ph = (PATCH - h % PATCH) % PATCH
    pw = (PATCH - w % PATCH) % PATCH
    return F.pad(plane[None, None], (0, pw, 0, ph), mode="replicate")[0, 0]


def to_patches(padded: torch.Tensor) -> torch.Tensor:
    """(H, W) -> (n_patches, 1, PATCH, PATCH), patches in row-major order."""
    h, w = padded.shape
    x = padded.view(h // PATCH, PATCH, w // PATCH, PATCH)
    return x.permute(0, 2, 1, 3).reshape(-1, 1, PATCH, PATCH)


def from_patches(patches: torch.Tensor, padded_h: int, padded_w: int) -> torch.Tensor:
    x = patches.reshape(padded_h // PATCH, padded_w // PATCH, PATCH, PATCH)
    return x.permute(0, 2, 1, 3).reshape(padded_h, padded_w)


def _pack_iteration(bits: torch.Tensor) -> bytes:
    """(N, C, s, s) of +/-1 -> packed bytes, -1 |-> 0."""
    flat = (bits.detach().reshape(-1) > 0).numpy()
    return np.packbits(flat).tobytes()


def _unpack_iteration(block: bytes, n: int, c: int, s: int) -> torch.Tensor:
    flat = np.unpackbits(np.frombuffer(block, dtype=np.uint8))[: n * c * s * s]
    signs = flat.astype(np.float32) * 2 - 1
    return torch.from_numpy(signs).reshape(n, c, s, s)


# --- coding ----------------------------------------------------------------------


def run_coder(
    model: RnnCodecModel, x: torch.Tensor, iterations: int
) -> tuple[list[torch.Tensor], list[torch.Tensor]]:
    """Full additive recurrence on a patch batch.

    Returns (bits, reconstructions) per iteration; differentiable when the
    model is in training mode.
    """
    enc_state = dec_state = None
    xhat = torch.zeros_like(x)
    bits, recons = [], []
    r = x  # r_0 = x
    for t in range(iterations):
        e, enc_state = model.encoder(r, enc_state, t)
        b = model.binarizer(e)
        d, dec_state = model.decoder(b, dec_state, t)
        xhat = xhat + d
        r = x - xhat
        bits.append(b)
        recons.append(xhat)
    return bits, recons


def run_decoder(model: RnnCodecModel, bits: list[torch.Tensor]) -> torch.Tensor:
    """Additive reconstruction from per-iteration bit tensors."""
    dec_state = None
    xhat = None
    for t, b in enumerate(bits):
        d, dec_state = model.decoder(b, dec_state, t)
        xhat = d if xhat is None else xhat + d
    return xhat


def encode(
    plane: np.ndarray,
    model: RnnCodecModel,
    iterations: int,
    mu: float = 0.0,
    theta: float = 1.0,
) -> RnnBitstream:
    """Normalized plane (float) -> progressive bitstream."""
    if not 1 <= iterations <= model.cfg.iterations_budget:
        raise BitstreamError(
            f"iterations {iterations} not in 1..{model.cfg.iterations_budget}"
        )
    plane_t = torch.as_tensor(np.ascontiguousarray(plane), dtype=torch.float32)
    if plane_t.ndim != 2:
        raise BitstreamError(f"plane must be 2-D, got shape {tuple(plane_t.shape)}")
    h, w = plane_t.shape
    padded = pad_plane(plane_t)
    x = to_patches(padded)
    model.eval()
    with torch.no_grad():
        bits, _ = run_coder(model, x, iterations)
    return RnnBitstream(
        manifest_digest=model.digest(),
        orig_width=w,
        orig_height=h,
        padded_width=padded.shape[1],
        padded_height=padded.shape[0],
        iterations=iterations,
        bits_per_patch_iteration=model.cfg.bits_per_patch_iteration,
        mu=mu,
        theta=theta,
        payload=b"".join(_pack_iteration(b) for b in bits),
    )


def decode(stream: RnnBitstream, model: RnnCodecModel) -> np.ndarray:
    """Bitstream -> normalized plane at the original dimensions."""
    if stream.manifest_digest != model.digest():
        raise BitstreamError(
            "bitstream was produced by a different model "
            f"({stream.manifest_digest.hex()} != {model.digest().hex()})"
        )
    if stream.bits_per_patch_iteration != model.cfg.bits_per_patch_iteration:
        raise BitstreamError("bits-per-patch mismatch with model config")
    n, c, s = stream.n_patches, model.cfg.bits_channels, PATCH // 8
    blocks = [
        stream.payload[t * stream.block_bytes : (t + 1) * stream.block_bytes]
        for t in range(stream.iterations)
    ]
    bits = [_unpack_iteration(b, n, c, s) for b in blocks]
    model.eval()
    with torch.no_grad():
        xhat = run_decoder(model, bits)
    padded = from_patches(xhat[:, 0], stream.padded_height, stream.padded_width)
    return padded[: stream.orig_height, : stream.orig_width].numpy().copy()
