"""End-to-end frame pipeline and the raw plane exchange format.

Encoding runs project -> shift -> denoise -> per-plane codecs -> container;
decoding inverts it. Planes inside a container are always stored aligned
(shifted) and denoised; the decoder re-derives the row shifts from its own
calibration, which the frame digest pins.

The .lpln exchange file carries one plane (u8/u16/f32, big-endian pixels)
plus normalization params; it is how the external neural codec receives
normalized range planes and returns decoded ones.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .codecs import CodecId, PlaneCodeword, decode_plane, encode_plane
from .container import CompressedFrame, PlaneKind, encode_nan_index
from .errors import CodecError, ExternalPayloadError, PcdError, ProjectionError
from .projection import (
    NormalizationParams,
    PointCloud,
    ScanPlanes,
    denoise,
    denormalize_range,
    estimate_normalization,
    normalize_range,
    project,
    reconstruct,
    shift_planes,
)
from .sensor import SensorConfig


@dataclass(frozen=True)
class CodecChoices:
    """Per-plane codec selection; quality applies to LOSSY_WAVELET planes."""

    range_codec: CodecId = CodecId.LOSSY_WAVELET
    azimuth_codec: CodecId = CodecId.LOSSY_WAVELET
    intensity_codec: CodecId = CodecId.LOSSLESS
    quality: float = 10.0  # target compression ratio

    def __post_init__(self) -> None:
        for name in ("azimuth_codec", "intensity_codec"):
            if getattr(self, name) == CodecId.EXTERNAL_RNN:
                raise CodecError("EXTERNAL_RNN is supported for the range plane only")


ALL_LOSSLESS = CodecChoices(
    range_codec=CodecId.LOSSLESS,
    azimuth_codec=CodecId.LOSSLESS,
    intensity_codec=CodecId.LOSSLESS,
)
ALL_RAW = CodecChoices(
    range_codec=CodecId.RAW, azimuth_codec=CodecId.RAW, intensity_codec=CodecId.RAW
)


def preprocess(cloud: PointCloud, config: SensorConfig):
    """project + shift + denoise; returns (planes, nan, norm)."""
    planes, nan = project(cloud, config)
    planes, nan = shift_planes(planes, nan, config)
    planes = denoise(planes, nan)
    if cloud.n_valid:
        norm = estimate_normalization([cloud])
    else:
        norm = NormalizationParams(mu=0.0, theta=config.max_range)
    return planes, nan, norm


def compress_cloud(
    cloud: PointCloud,
    config: SensorConfig,
    choices: CodecChoices = CodecChoices(),
    rnn_payload: bytes | None = None,
    rnn_iterations: int = 8,
) -> CompressedFrame:
    """Compress one ordered cloud into a container frame."""
    planes, nan, norm = preprocess(cloud, config)

    def enc(plane, codec):
        if codec == CodecId.EXTERNAL_RNN:
            if rnn_payload is None:
                raise ExternalPayloadError(
                    "range codec EXTERNAL_RNN needs a bitstream from the "
                    "external neural tool (compress --rnn-bitstream)"
                )
            return encode_plane(
                plane, codec, quality=float(rnn_iterations),
                external_payload=rnn_payload,
            )
        q = choices.quality if codec == CodecId.LOSSY_WAVELET else None
        return encode_plane(plane, codec, quality=q)

    return CompressedFrame(
        sensor_digest=config.digest(),
        rows=config.rows,
        cols=config.cols,
        d_max=config.max_range,
        norm=norm,
        nan_payload=encode_nan_index(nan),
        plane_entries=(
            (PlaneKind.RANGE, enc(planes.range_q, choices.range_codec)),
            (PlaneKind.AZIMUTH, enc(planes.azimuth_q, choices.azimuth_codec)),
            (PlaneKind.INTENSITY, enc(planes.intensity, choices.intensity_codec)),
        ),
    )


def decompress_frame(
    frame: CompressedFrame,
    config: SensorConfig,
    rnn_plane: np.ndarray | None = None,
    frame_id: str = "0",
) -> PointCloud:
    """Decode planes, un-shift, reconstruct.

    ``rnn_plane`` supplies the externally decoded normalized range plane
    (float), denormalized here with the frame's own header params.
    """
    if frame.sensor_digest != config.digest():
        raise ProjectionError("frame digest does not match decoder calibration")

    def dec(kind: PlaneKind):
        cw = frame.codeword(kind)
        if cw.codec == CodecId.EXTERNAL_RNN:
            if rnn_plane is None:
                raise ExternalPayloadError(
                    f"{kind.name} plane is EXTERNAL_RNN; supply the decoded "
                    "plane file (decompress --rnn-plane)"
                )
            if rnn_plane.shape != (frame.rows, frame.cols):
                raise CodecError(
                    f"decoded RNN plane is {rnn_plane.shape}, frame grid is "
                    f"({frame.rows}, {frame.cols})"
                )
            return denormalize_range(rnn_plane, frame.norm, frame.d_max)
        return decode_plane(cw)

    planes = ScanPlanes(
        range_q=dec(PlaneKind.RANGE),
        azimuth_q=dec(PlaneKind.AZIMUTH),
        intensity=dec(PlaneKind.INTENSITY),
        shifted=True,
        denoised=True,
    )
    nan = frame.nan_index()
    planes, nan = shift_planes(planes, nan, config, inverse=True)
    return reconstruct(planes, nan, config, frame_id=frame_id)


def roundtrip_reference(cloud: PointCloud, config: SensorConfig) -> PointCloud:
    """reconstruct(project(cloud)) — the quantization-only reference output."""
    planes, nan = project(cloud, config)
    return reconstruct(planes, nan, config, frame_id=cloud.frame_id)


def normalized_range_plane(
    planes: ScanPlanes, norm: NormalizationParams, d_max: float
) -> np.ndarray:
    return normalize_range(planes.range_q, norm, d_max).astype(np.float32)


# --- .lpln plane exchange files -----------------------------------------------

_LPLN_MAGIC = b"LPLN"
_LPLN_HEADER = struct.Struct("<4sBBHHff")  # magic ver dtype width height mu theta
_LPLN_DTYPES = {0: ">u1", 1: ">u2", 2: ">f4"}
_LPLN_CODES = {np.uint8: 0, np.uint16: 1, np.float32: 2}


def write_plane_file(
    plane: np.ndarray, mu: float = 0.0, theta: float = 1.0
) -> bytes:
    """Serialize one plane with its normalization params (big-endian pixels)."""
    plane = np.asarray(plane)
    code = _LPLN_CODES.get(plane.dtype.type)
    if plane.ndim != 2 or code is None:
        raise PcdError(f"plane must be 2-D u8/u16/f32, got {plane.dtype} {plane.shape}")
    h, w = plane.shape
    header = _LPLN_HEADER.pack(_LPLN_MAGIC, 1, code, w, h, mu, theta)
    return header + plane.astype(_LPLN_DTYPES[code]).tobytes()


def read_plane_file(data: bytes) -> tuple[np.ndarray, float, float]:
    """Parse a .lpln file -> (plane, mu, theta)."""
    if len(data) < _LPLN_HEADER.size:
        raise PcdError("plane file shorter than its header")
    magic, ver, code, w, h, mu, theta = _LPLN_HEADER.unpack_from(data)
    if magic != _LPLN_MAGIC:
        raise PcdError(f"bad plane-file magic {magic!r}")
    if ver != 1 or code not in _LPLN_DTYPES:
        raise PcdError(f"unsupported plane-file version/dtype {ver}/{code}")
    dt = np.dtype(_LPLN_DTYPES[code])
    need = _LPLN_HEADER.size + w * h * dt.itemsize
    if len(data) != need:
        raise PcdError(f"plane file is {len(data)} bytes, expected {need}")
    plane = (
        np.frombuffer(data, dtype=dt, offset=_LPLN_HEADER.size)
        .reshape(h, w)
        .astype(dt.newbyteorder("="))
    )
    return plane, float(mu), float(theta)
