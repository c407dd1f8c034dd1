"""Bit-exact frame container (.lpcc).

A frame serializes to: magic "LPCC", version, an 8-byte sensor calibration
digest, grid dims, max range, normalization params, the DEFLATE-compressed
NaN sidecar, then exactly three plane codewords (range, azimuth,
intensity). All scalars little-endian, all variable parts length-prefixed,
so frames are self-delimiting and concatenate into multi-frame streams.
Full byte-layout table in docs/formats.md.

There is no checksum (future work); corruption detection covers structure
only: magic, version, ids, dims, lengths, truncation, digest.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .codecs import LOSSY_CODECS, CodecId, PlaneCodeword
from .errors import (
    BadMagicError,
    ContainerError,
    CorruptFrameError,
    DigestMismatchError,
    ProjectionError,
    UnsupportedVersionError,
)
from .projection import NanIndex, NormalizationParams
from .sensor import SensorConfig

MAGIC = b"LPCC"
VERSION = 1

# Raw sensor-stream footprint in bits per point, the baseline every
# compression ratio is reported against.
UNCOMPRESSED_BPP = 196.0


class PlaneKind(IntEnum):
    RANGE = 0
    AZIMUTH = 1
    INTENSITY = 2


_PLANE_DEPTH = {PlaneKind.RANGE: 16, PlaneKind.AZIMUTH: 16, PlaneKind.INTENSITY: 8}


@dataclass(frozen=True)
class CompressedFrame:
    """One compressed scan; plane entries are canonicalized to kind order."""

    sensor_digest: bytes
    rows: int
    cols: int
    d_max: float
    norm: NormalizationParams
    nan_payload: bytes
    plane_entries: tuple[tuple[PlaneKind, PlaneCodeword], ...]

    def __post_init__(self) -> None:
        if len(self.sensor_digest) != 8:
            raise ContainerError("sensor_digest must be 8 bytes")
        if not (1 <= self.rows <= 0xFF and 1 <= self.cols <= 0xFFFF):
            raise ContainerError(f"bad grid dims {self.rows}x{self.cols}")
        object.__setattr__(self, "d_max", float(np.float32(self.d_max)))
        if not self.d_max > 0:
            raise ContainerError("d_max must be > 0")
        if self.norm.mu > self.d_max:
            raise ContainerError("normalization mu exceeds d_max")
        kinds = sorted(k for k, _ in self.plane_entries)
        if kinds != [PlaneKind.RANGE, PlaneKind.AZIMUTH, PlaneKind.INTENSITY]:
            raise ContainerError("need exactly one entry per plane kind")
        entries = tuple(sorted(self.plane_entries, key=lambda e: e[0]))
        for kind, cw in entries:
            if cw.bit_depth != _PLANE_DEPTH[kind]:
                raise ContainerError(
                    f"{kind.name} plane must be {_PLANE_DEPTH[kind]}-bit"
                )
            if (cw.width, cw.height) != (self.cols, self.rows):
                raise ContainerError(
                    f"{kind.name} codeword is {cw.width}x{cw.height}, "
                    f"frame grid is {self.cols}x{self.rows}"
                )
        object.__setattr__(self, "plane_entries", entries)
        # must decode cleanly and lie inside the grid
        decode_nan_index(self.nan_payload, self.rows, self.cols)

    def codeword(self, kind: PlaneKind) -> PlaneCodeword:
        return self.plane_entries[kind][1]

    def nan_index(self) -> NanIndex:
        return decode_nan_index(self.nan_payload, self.rows, self.cols)


# --- NaN sidecar -----------------------------------------------------------
#
# count:u32, then one DEFLATE block over (row bytes ++ zigzag-varint column
# deltas). Entries are (row, col)-sorted, so rows are long runs and column
# deltas are small — a few kilobytes at realistic dropout rates.


def _zigzag(n: int) -> int:
    return (n << 1) if n >= 0 else ((-n << 1) - 1)


def _unzigzag(z: int) -> int:
    return (z >> 1) if (z & 1) == 0 else -((z + 1) >> 1)


def _write_varint(out: bytearray, v: int) -> None:
    while v >= 0x80:
        out.append((v & 0x7F) | 0x80)
        v >>= 7
    out.append(v)


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    v = 0
    shift = 0
    while True:
        if pos >= len(data) or shift > 63:
            raise CorruptFrameError("truncated varint in NaN sidecar")
        b = data[pos]
        pos += 1
        v |= (b & 0x7F) << shift
        if not b & 0x80:
            return v, pos
        shift += 7


def encode_nan_index(nan: NanIndex) -> bytes:
    body = bytearray(nan.rows.tobytes())
    prev = 0
    for c in nan.cols.tolist():
        _write_varint(body, _zigzag(c - prev))
        prev = c
    return struct.pack("<I", len(nan)) + zlib.compress(bytes(body), level=9)


def decode_nan_index(payload: bytes, rows: int, cols: int) -> NanIndex:
    if len(payload) < 4:
        raise CorruptFrameError("NaN sidecar shorter than its count field")
    (count,) = struct.unpack_from("<I", payload)
    if count > rows * cols:
        raise CorruptFrameError(f"NaN sidecar count {count} exceeds grid size")
    try:
        body = zlib.decompress(payload[4:])
    except zlib.error as exc:
        raise CorruptFrameError(f"NaN sidecar DEFLATE block corrupt: {exc}") from exc
    if len(body) < count:
        raise CorruptFrameError("NaN sidecar row list truncated")
    r = np.frombuffer(body[:count], dtype=np.uint8)
    c = np.empty(count, dtype=np.uint16)
    pos = count
    prev = 0
    for i in range(count):
        z, pos = _read_varint(body, pos)
        prev += _unzigzag(z)
        if not 0 <= prev <= 0xFFFF:
            raise CorruptFrameError("NaN sidecar column delta out of range")
        c[i] = prev
    if pos != len(body):
        raise CorruptFrameError("NaN sidecar has trailing bytes")
    try:
        nan = NanIndex(r, c)
        nan.check_bounds(rows, cols)
    except (ValueError, ProjectionError) as exc:
        raise CorruptFrameError(f"NaN sidecar invalid: {exc}") from exc
    return nan


# --- frame (de)serialization -------------------------------------------------

_HEADER = struct.Struct("<4sB8sHHfff")  # magic, version, digest, rows, cols, d_max, mu, theta


def write_frame(frame: CompressedFrame) -> bytes:
    """Serialize; identical frames produce identical bytes."""
    out = bytearray(
        _HEADER.pack(
            MAGIC,
            VERSION,
            frame.sensor_digest,
            frame.rows,
            frame.cols,
            frame.d_max,
            frame.norm.mu,
            frame.norm.theta,
        )
    )
    out += struct.pack("<I", len(frame.nan_payload))
    out += frame.nan_payload
    for kind, cw in frame.plane_entries:
        out += struct.pack("<BBBHH", kind, cw.codec, cw.bit_depth, cw.width, cw.height)
        if cw.quality is None:
            out += b"\x00"
        else:
            out += b"\x01" + struct.pack("<f", cw.quality)
        out += struct.pack("<I", len(cw.payload))
        out += cw.payload
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.pos = offset

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptFrameError(
                f"frame truncated: needed {n} bytes at offset {self.pos}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))


def _read_one(r: _Reader, config: SensorConfig | None) -> CompressedFrame:
    magic, version, digest, rows, cols, d_max, mu, theta = r.unpack(_HEADER)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported container version {version}")
    if config is not None and digest != config.digest():
        raise DigestMismatchError(
            "frame was produced with a different sensor calibration"
        )
    (nan_len,) = struct.unpack("<I", r.take(4))
    nan_payload = r.take(nan_len)

    entries = []
    for _ in range(3):
        kind_v, codec_v, depth, width, height = struct.unpack("<BBBHH", r.take(7))
        try:
            kind = PlaneKind(kind_v)
            codec = CodecId(codec_v)
        except ValueError as exc:
            raise CorruptFrameError(str(exc)) from exc
        (qflag,) = r.take(1)
        if qflag not in (0, 1):
            raise CorruptFrameError(f"bad quality flag {qflag}")
        quality = struct.unpack("<f", r.take(4))[0] if qflag else None
        if (quality is not None) != (codec in LOSSY_CODECS):
            raise CorruptFrameError(
                f"quality flag inconsistent with codec {codec.name}"
            )
        (plen,) = struct.unpack("<I", r.take(4))
        payload = r.take(plen)
        try:
            cw = PlaneCodeword(codec, depth, width, height, quality, payload)
        except Exception as exc:
            raise CorruptFrameError(f"bad codeword: {exc}") from exc
        entries.append((kind, cw))

    try:
        return CompressedFrame(
            sensor_digest=digest,
            rows=rows,
            cols=cols,
            d_max=d_max,
            norm=NormalizationParams(mu, theta),
            nan_payload=nan_payload,
            plane_entries=tuple(entries),
        )
    except (ContainerError, ValueError) as exc:
        if isinstance(exc, CorruptFrameError):
            raise
        raise CorruptFrameError(f"frame fails validation: {exc}") from exc


def read_frame(data: bytes, config: SensorConfig | None = None) -> CompressedFrame:
    """Parse exactly one frame; trailing bytes are an error (use iter_frames
    for concatenated streams). Passing the decoder's SensorConfig enforces
    the calibration digest."""
    r = _Reader(data)
    frame = _read_one(r, config)
    if r.pos != len(data):
        raise CorruptFrameError(f"{len(data) - r.pos} trailing bytes after frame")
    return frame


def iter_frames(data: bytes, config: SensorConfig | None = None):
    """Yield every frame of a concatenated .lpcc stream."""
    r = _Reader(data)
    while r.pos < len(data):
        yield _read_one(r, config)


def frame_bpp(frame: CompressedFrame, point_count: int) -> float:
    """Serialized size in bits per (valid) point, header and sidecar included."""
    if point_count <= 0:
        raise ValueError("point_count must be > 0")
    return len(write_frame(frame)) * 8 / point_count


def compression_ratio(bpp: float) -> float:
    """Fraction of the uncompressed 196 bits-per-point baseline."""
    return bpp / UNCOMPRESSED_BPP
