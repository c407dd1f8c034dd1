"""Recurrent encoder / binarizer / additive decoder.

One iteration encodes the current residual into m sign bits and adds the
decoder's prediction onto the running reconstruction:

    b_t     = B(E_t(r_{t-1}))          b_t in {-1, +1}^m
    x_hat_t = D_t(b_t) + x_hat_{t-1}
    r_t     = x - x_hat_t,   r_0 = x,   x_hat_0 = 0

E and D are stacks of convolutional GRU cells whose hidden states carry
context across iterations. The binarizer emits exactly +/-1 at inference;
training uses the stochastic straight-through surrogate, so real values
never reach a bitstream.

A model is identified by its manifest (architecture + weights fingerprint);
bitstreams embed the manifest digest and refuse to decode elsewhere.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

PATCH = 32  # input tiles are PATCH x PATCH; encoder downsamples 8x


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs recorded in the manifest. Desk-scale defaults."""

    enc_channels: tuple[int, int, int] = (32, 48, 64)
    dec_channels: tuple[int, int, int] = (128, 64, 32)  # each divisible by 4
    bits_channels: int = 8  # m = bits_channels * 16 bits per patch-iteration
    iterations_budget: int = 16
    seed: int = 7

    @property
    def bits_per_patch_iteration(self) -> int:
        return self.bits_channels * (PATCH // 8) * (PATCH // 8)


class ConvGRU(nn.Module):
    """Convolutional GRU; stride applies to the input path only."""

    def __init__(self, in_ch: int, hidden: int, stride: int = 1):
        super().__init__()
        self.hidden = hidden
        self.conv_x = nn.Conv2d(in_ch, 3 * hidden, 3, stride=stride, padding=1)
        self.conv_h = nn.Conv2d(hidden, 3 * hidden, 3, padding=1)

    def forward(self, x: torch.Tensor, h: torch.Tensor | None) -> torch.Tensor:
        gx = self.conv_x(x)
        if h is None:
            h = gx.new_zeros(gx.shape[0], self.hidden, gx.shape[2], gx.shape[3])
        gh = self.conv_h(h)
        xz, xr, xn = gx.chunk(3, dim=1)
        hz, hr, hn = gh.chunk(3, dim=1)
        z = torch.sigmoid(xz + hz)
        r = torch.sigmoid(xr + hr)
        n = torch.tanh(xn + r * hn)
        return (1 - z) * h + z * n


class Encoder(nn.Module):
    """Downsampling ConvGRU stack with a learned per-iteration input scale.

    Residuals shrink roughly geometrically across iterations; scaling the
    t-th input up (init 2^t) keeps late residuals inside the working range
    of the tanh features, so their sign bits stay informative instead of
    degenerating into noise.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c1, c2, c3 = cfg.enc_channels
        self.conv = nn.Conv2d(1, c1, 3, stride=2, padding=1)  # 32 -> 16
        self.gru1 = ConvGRU(c1, c2, stride=2)  # 16 -> 8
        self.gru2 = ConvGRU(c2, c3, stride=2)  # 8 -> 4
        self.in_scale = nn.Parameter(
            torch.tensor([min(2.0**t, 64.0) for t in range(cfg.iterations_budget)])
        )

    def forward(self, x, state, t: int = 0):
        h1, h2 = state if state is not None else (None, None)
        e = torch.tanh(self.conv(x * self.in_scale[t]))
        h1 = self.gru1(e, h1)
        h2 = self.gru2(h1, h2)
        return h2, (h1, h2)


class Binarizer(nn.Module):
    """tanh projection to m channels, quantized to exactly +/-1.

    Inference: deterministic sign (0 maps to +1). Training: stochastic
    rounding with a straight-through gradient.
    """

    def __init__(self, in_ch: int, bits_ch: int):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, bits_ch, 1)

    def forward(self, e: torch.Tensor) -> torch.Tensor:
        p = torch.tanh(self.conv(e))
        if self.training:
            u = torch.rand_like(p)
            hard = torch.where(u < (1 + p) / 2, 1.0, -1.0)
            # straight-through: forward ~hard, gradient d/dp = 1
            return p + (hard - p).detach()
        return torch.where(p >= 0, 1.0, -1.0)


class Decoder(nn.Module):
    """Additive decoder with a learned per-iteration output gain.

    Early iterations need large corrections and late ones tiny; with one
    shared output conv that conflict is resolved only through the GRU
    states, which desk-scale training leaves imperfect. A scalar gain per
    iteration (init 2^-t, mirroring the encoder's input scale) puts each
    correction on the right magnitude immediately and makes "add almost
    nothing" independently reachable late in the recurrence.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d1, d2, d3 = cfg.dec_channels
        if any(c % 4 for c in (d1, d2, d3)):
            raise ValueError("dec_channels must be divisible by 4 (pixel shuffle)")
        self.conv_in = nn.Conv2d(cfg.bits_channels, d1, 1)
        self.gru1 = ConvGRU(d1, d1)  # 4x4
        self.gru2 = ConvGRU(d1 // 4, d2)  # 8x8
        self.gru3 = ConvGRU(d2 // 4, d3)  # 16x16
        self.conv_out = nn.Conv2d(d3 // 4, 1, 3, padding=1)  # 32x32
        self.shuffle = nn.PixelShuffle(2)
        self.gain = nn.Parameter(
            torch.tensor([max(2.0**-t, 1 / 64.0) for t in range(cfg.iterations_budget)])
        )

    def forward(self, b, state, t: int = 0):
        h1, h2, h3 = state if state is not None else (None, None, None)
        y = torch.tanh(self.conv_in(b))
        h1 = self.gru1(y, h1)
        h2 = self.gru2(self.shuffle(h1), h2)
        h3 = self.gru3(self.shuffle(h2), h3)
        return self.gain[t] * self.conv_out(self.shuffle(h3)), (h1, h2, h3)


class RnnCodecModel(nn.Module):
    def __init__(self, cfg: ModelConfig | None = None):
        super().__init__()
        self.cfg = cfg or ModelConfig()
        torch.manual_seed(self.cfg.seed)  # reproducible initialization
        self.encoder = Encoder(self.cfg)
        self.binarizer = Binarizer(self.cfg.enc_channels[-1], self.cfg.bits_channels)
        self.decoder = Decoder(self.cfg)

    # --- identity ------------------------------------------------------------

    def weights_fingerprint(self) -> str:
        h = hashlib.sha256()
        for key in sorted(self.state_dict()):
            h.update(key.encode())
            h.update(self.state_dict()[key].numpy().tobytes())
        return h.hexdigest()[:16]

    def manifest(self) -> dict:
        m = asdict(self.cfg)
        m["cell"] = "convgru"
        m["patch"] = PATCH
        m["bits_per_patch_iteration"] = self.cfg.bits_per_patch_iteration
        m["weights"] = self.weights_fingerprint()
        return m

    def digest(self) -> bytes:
        blob = json.dumps(self.manifest(), sort_keys=True).encode()
        return hashlib.sha256(blob).digest()[:8]

    # --- persistence -----------------------------------------------------------

    def save(self, ckpt_dir: str | Path) -> None:
        ckpt = Path(ckpt_dir)
        ckpt.mkdir(parents=True, exist_ok=True)
        (ckpt / "manifest.json").write_text(
            json.dumps(self.manifest(), sort_keys=True, indent=1)
        )
        torch.save(self.state_dict(), ckpt / "weights.pt")

    @classmethod
    def load(cls, ckpt_dir: str | Path) -> "RnnCodecModel":
        ckpt = Path(ckpt_dir)
        manifest = json.loads((ckpt / "manifest.json").read_text())
        cfg = ModelConfig(
            enc_channels=tuple(manifest["enc_channels"]),
            dec_channels=tuple(manifest["dec_channels"]),
            bits_channels=manifest["bits_channels"],
            iterations_budget=manifest["iterations_budget"],
            seed=manifest["seed"],
        )
        model = cls(cfg)
        model.load_state_dict(
            torch.load(ckpt / "weights.pt", weights_only=True)
        )
        model.eval()
        if model.weights_fingerprint() != manifest["weights"]:
            raise ValueError("checkpoint weights do not match their manifest")
        return model
