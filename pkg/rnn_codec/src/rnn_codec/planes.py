"""Plane exchange files (.lpln) and synthetic training planes.

The .lpln layout matches the compression pipeline's documented exchange
format: "LPLN", version u8, dtype u8 (0=u8, 1=u16, 2=f32), width u16,
height u16, mu f32, theta f32 (little-endian header), then big-endian
row-major pixels. The neural codec consumes dtype 2 (normalized range).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_MAGIC = b"LPLN"
_HEADER = struct.Struct("<4sBBHHff")
_DTYPES = {0: ">u1", 1: ">u2", 2: ">f4"}
_CODES = {np.uint8: 0, np.uint16: 1, np.float32: 2}


def write_plane(plane: np.ndarray, mu: float = 0.0, theta: float = 1.0) -> bytes:
    plane = np.asarray(plane)
    code = _CODES.get(plane.dtype.type)
    if plane.ndim != 2 or code is None:
        raise ValueError(f"plane must be 2-D u8/u16/f32, got {plane.dtype}")
    h, w = plane.shape
    return _HEADER.pack(_MAGIC, 1, code, w, h, mu, theta) + plane.astype(
        _DTYPES[code]
    ).tobytes()


def read_plane(data: bytes) -> tuple[np.ndarray, float, float]:
    if len(data) < _HEADER.size:
        raise ValueError("plane file shorter than its header")
    magic, ver, code, w, h, mu, theta = _HEADER.unpack_from(data)
    if magic != _MAGIC or ver != 1 or code not in _DTYPES:
        raise ValueError("not a supported plane exchange file")
    dt = np.dtype(_DTYPES[code])
    if len(data) != _HEADER.size + w * h * dt.itemsize:
        raise ValueError("plane file length mismatch")
    plane = np.frombuffer(data, dtype=dt, offset=_HEADER.size).reshape(h, w)
    return plane.astype(dt.newbyteorder("=")), float(mu), float(theta)


def load_plane(path: str | Path) -> tuple[np.ndarray, float, float]:
    return read_plane(Path(path).read_bytes())


def save_plane(plane: np.ndarray, path: str | Path, mu: float = 0.0,
               theta: float = 1.0) -> None:
    Path(path).write_bytes(write_plane(plane, mu, theta))


def synthetic_plane(seed: int, height: int = 32, width: int = 512) -> np.ndarray:
    """Procedural stand-in for a normalized range plane.

    Smooth per-row base (near surfaces low, far rows high) plus low-frequency
    azimuth undulation, a few rectangular foreground objects, and mild noise;
    value range roughly [-1, 2] like (range - mean) / p95 data.
    """
    rng = np.random.default_rng(seed)
    rows = np.linspace(-0.5, 1.4, height)[:, None]
    t = np.linspace(0, 2 * np.pi, width, endpoint=False)[None, :]
    plane = np.broadcast_to(rows, (height, width)).copy()
    for _ in range(4):
        freq = rng.integers(1, 6)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.05, 0.25)
        plane = plane + amp * np.sin(freq * t + phase)
    for _ in range(int(rng.integers(3, 8))):
        w = int(rng.integers(12, 80))
        h = int(rng.integers(6, height))
        c0 = int(rng.integers(0, width - w))
        r0 = int(rng.integers(0, height - h + 1))
        plane[r0 : r0 + h, c0 : c0 + w] = rng.uniform(-0.8, 0.3)
    plane += rng.normal(0, 0.01, (height, width))
    return plane.astype(np.float32)
