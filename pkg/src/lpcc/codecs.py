"""Raster plane codecs behind one encode/decode interface.

Four codecs share stable numeric ids: RAW (big-endian row-major pixels),
LOSSLESS (PNG), LOSSY_WAVELET (JPEG 2000 with a target compression ratio),
and EXTERNAL_RNN (opaque bitstream produced and consumed by the external
neural tool; wrapped here, never computed here). Payloads of LOSSLESS and
LOSSY_WAVELET are standard PNG / JPEG 2000 codestreams decodable by
third-party tools.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from PIL import Image

from .errors import CodecError, ExternalPayloadError, UnknownCodecError


class CodecId(IntEnum):
    RAW = 0
    LOSSLESS = 1
    LOSSY_WAVELET = 2
    EXTERNAL_RNN = 3


LOSSY_CODECS = frozenset({CodecId.LOSSY_WAVELET, CodecId.EXTERNAL_RNN})

_DTYPES = {8: np.uint8, 16: np.uint16}


def codec_from_name(name: str) -> CodecId:
    try:
        return CodecId[name.strip().upper()]
    except KeyError:
        raise UnknownCodecError(f"unknown codec name {name!r}") from None


@dataclass(frozen=True)
class PlaneCodeword:
    """One compressed plane: codec id, geometry, and the payload bytes.

    quality is present iff the codec is lossy: the target compression ratio
    for LOSSY_WAVELET, the iteration count for EXTERNAL_RNN.
    """

    codec: CodecId
    bit_depth: int
    width: int
    height: int
    quality: float | None
    payload: bytes

    def __post_init__(self) -> None:
        if self.codec not in CodecId.__members__.values():
            raise UnknownCodecError(f"unknown codec id {self.codec!r}")
        object.__setattr__(self, "codec", CodecId(self.codec))
        if self.bit_depth not in _DTYPES:
            raise CodecError(f"bit depth must be 8 or 16, got {self.bit_depth}")
        if self.width < 1 or self.height < 1:
            raise CodecError("plane dimensions must be positive")
        if (self.quality is not None) != (self.codec in LOSSY_CODECS):
            raise CodecError(
                f"quality must be present iff codec is lossy ({self.codec.name})"
            )
        if self.quality is not None:
            object.__setattr__(self, "quality", float(np.float32(self.quality)))
        if not isinstance(self.payload, (bytes, bytearray)):
            raise CodecError("payload must be bytes")
        object.__setattr__(self, "payload", bytes(self.payload))


def _check_plane(plane: np.ndarray) -> tuple[np.ndarray, int]:
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise CodecError(f"plane must be 2-D, got shape {plane.shape}")
    if plane.dtype == np.uint8:
        return plane, 8
    if plane.dtype == np.uint16:
        return np.ascontiguousarray(plane, dtype="=u2"), 16
    raise CodecError(f"unsupported plane dtype {plane.dtype} (need u8 or u16)")


def encode_plane(
    plane: np.ndarray,
    codec: CodecId,
    quality: float | None = None,
    external_payload: bytes | None = None,
) -> PlaneCodeword:
    """Compress one plane. LOSSY_WAVELET requires ``quality`` (ratio >= 1);
    EXTERNAL_RNN requires the externally produced ``external_payload`` plus
    ``quality`` carrying its iteration count."""
    plane, depth = _check_plane(plane)
    h, w = plane.shape
    codec = CodecId(codec)

    if codec == CodecId.RAW:
        payload = plane.astype(">u2" if depth == 16 else "u1").tobytes()
    elif codec == CodecId.LOSSLESS:
        buf = io.BytesIO()
        Image.fromarray(plane).save(buf, format="PNG", optimize=True)
        payload = buf.getvalue()
    elif codec == CodecId.LOSSY_WAVELET:
        if quality is None:
            raise CodecError("LOSSY_WAVELET needs a quality (target ratio)")
        if quality < 1:
            raise CodecError(f"target compression ratio must be >= 1, got {quality}")
        buf = io.BytesIO()
        Image.fromarray(plane).save(
            buf,
            format="JPEG2000",
            quality_mode="rates",
            quality_layers=[float(quality)],
            irreversible=True,
        )
        payload = buf.getvalue()
    else:  # EXTERNAL_RNN
        if external_payload is None:
            raise ExternalPayloadError(
                "EXTERNAL_RNN payloads are produced by the external neural "
                "tool; pass its bitstream as external_payload"
            )
        if quality is None:
            raise CodecError("EXTERNAL_RNN needs quality = iteration count")
        payload = bytes(external_payload)

    return PlaneCodeword(
        codec=codec, bit_depth=depth, width=w, height=h, quality=quality,
        payload=payload,
    )


def decode_plane(cw: PlaneCodeword) -> np.ndarray:
    """Decompress a codeword back to its (height, width) grid.

    RAW and LOSSLESS round-trip bit-exactly. EXTERNAL_RNN cannot be decoded
    in-process and raises; the caller must obtain the decoded plane from the
    external tool.
    """
    dtype = _DTYPES[cw.bit_depth]
    if cw.codec == CodecId.RAW:
        expected = cw.width * cw.height * (cw.bit_depth // 8)
        if len(cw.payload) != expected:
            raise CodecError(
                f"RAW payload is {len(cw.payload)} bytes, expected {expected}"
            )
        return (
            np.frombuffer(cw.payload, dtype=">u2" if cw.bit_depth == 16 else "u1")
            .reshape(cw.height, cw.width)
            .astype(dtype)
        )
    if cw.codec in (CodecId.LOSSLESS, CodecId.LOSSY_WAVELET):
        try:
            img = Image.open(io.BytesIO(cw.payload))
            arr = np.asarray(img)
        except Exception as exc:
            raise CodecError(f"corrupt {cw.codec.name} payload: {exc}") from exc
        if arr.shape != (cw.height, cw.width):
            raise CodecError(
                f"decoded dimensions {arr.shape} do not match declared "
                f"({cw.height}, {cw.width})"
            )
        if arr.dtype != dtype:
            raise CodecError(
                f"decoded dtype {arr.dtype} does not match bit depth {cw.bit_depth}"
            )
        return arr
    if cw.codec == CodecId.EXTERNAL_RNN:
        raise ExternalPayloadError(
            "EXTERNAL_RNN payloads decode through the external neural tool"
        )
    raise UnknownCodecError(f"unknown codec id {cw.codec!r}")
