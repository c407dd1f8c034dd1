"""Laser scanner calibration model.

A spinning multi-channel scanner is described by its grid geometry
(``rows`` laser channels x ``cols`` firing sequences per revolution), the
maximum measurable range, and one (elevation, azimuth offset) pair per
channel. Calibration ships as a human-editable text document (angles in
degrees, see docs/formats.md); in memory everything is radians.

SensorConfig is immutable and safe to share across frame workers.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import CalibrationError

TWO_PI = 2.0 * math.pi

# NaN sidecar stores row indices as u8 and column indices as u16, and the
# container carries rows/cols as u16; these bounds keep everything encodable.
MAX_ROWS = 255
MAX_COLS = 65535


@dataclass(frozen=True)
class ChannelCalib:
    """Per-channel calibration: beam elevation and firing azimuth offset."""

    elevation: float  # radians, in (-pi/2, pi/2)
    azimuth_offset: float  # radians, in (-pi, pi]

    def __post_init__(self) -> None:
        if not (-math.pi / 2 < self.elevation < math.pi / 2):
            raise CalibrationError(
                f"elevation {self.elevation!r} rad outside (-pi/2, pi/2)"
            )
        if not (-math.pi < self.azimuth_offset <= math.pi):
            raise CalibrationError(
                f"azimuth offset {self.azimuth_offset!r} rad outside (-pi, pi]"
            )


@dataclass(frozen=True)
class SensorConfig:
    """Scan geometry plus per-channel calibration, ordered by row index."""

    rows: int
    cols: int
    max_range: float
    channels: tuple[ChannelCalib, ...]
    rotation_hz: float = 10.0  # informational only

    def __post_init__(self) -> None:
        if not (1 <= self.rows <= MAX_ROWS):
            raise CalibrationError(f"rows must be in 1..{MAX_ROWS}, got {self.rows}")
        if not (1 <= self.cols <= MAX_COLS):
            raise CalibrationError(f"cols must be in 1..{MAX_COLS}, got {self.cols}")
        if not self.max_range > 0:
            raise CalibrationError(f"max_range must be > 0, got {self.max_range}")
        if len(self.channels) != self.rows:
            raise CalibrationError(
                f"expected {self.rows} channel entries, got {len(self.channels)}"
            )
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def points_per_rev(self) -> int:
        return self.rows * self.cols

    def digest(self) -> bytes:
        """8-byte identity of this calibration, stable across runs."""
        h = hashlib.sha256()
        h.update(
            struct.pack("<IIdd", self.rows, self.cols, self.max_range, self.rotation_hz)
        )
        for ch in self.channels:
            h.update(struct.pack("<dd", ch.elevation, ch.azimuth_offset))
        return h.digest()[:8]


def column_shift(config: SensorConfig, row: int) -> int:
    """Signed column count that aligns this row's pixels to common azimuths.

    round-half-away-from-zero of azimuth_offset / (2*pi / cols).
    """
    ch = _channel(config, row)
    x = ch.azimuth_offset * config.cols / TWO_PI
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def elevation_for_row(config: SensorConfig, row: int) -> float:
    """Beam elevation (radians) of a laser channel."""
    return _channel(config, row).elevation


def _channel(config: SensorConfig, row: int) -> ChannelCalib:
    if not 0 <= row < config.rows:
        raise CalibrationError(f"row {row} out of range for {config.rows}-row sensor")
    return config.channels[row]


# --- calibration document ---------------------------------------------------
#
# Line-oriented text: '#' comments, 'key value' scalars, one
# 'channel <idx> <elevation_deg> <azimuth_offset_deg>' line per channel.

_SCALAR_KEYS = {"rows", "cols", "max_range_m", "rotation_hz"}


def parse_config(text: str) -> SensorConfig:
    """Parse a calibration document; rejects anything violating invariants."""
    scalars: dict[str, float] = {}
    channel_lines: dict[int, tuple[float, float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "channel":
                if len(parts) != 4:
                    raise ValueError("channel line needs <idx> <elev_deg> <azoff_deg>")
                idx = int(parts[1])
                if idx in channel_lines:
                    raise ValueError(f"duplicate channel {idx}")
                channel_lines[idx] = (float(parts[2]), float(parts[3]))
            elif parts[0] in _SCALAR_KEYS:
                if len(parts) != 2:
                    raise ValueError(f"'{parts[0]}' takes exactly one value")
                scalars[parts[0]] = float(parts[1])
            else:
                raise ValueError(f"unknown key '{parts[0]}'")
        except ValueError as exc:
            raise CalibrationError(f"line {lineno}: {exc}") from exc

    missing = {"rows", "cols", "max_range_m"} - scalars.keys()
    if missing:
        raise CalibrationError(f"missing keys: {sorted(missing)}")
    rows = int(scalars["rows"])
    if sorted(channel_lines) != list(range(rows)):
        raise CalibrationError(
            f"channel indices must be exactly 0..{rows - 1}, got {sorted(channel_lines)}"
        )
    channels = tuple(
        ChannelCalib(math.radians(e), math.radians(a))
        for e, a in (channel_lines[i] for i in range(rows))
    )
    return SensorConfig(
        rows=rows,
        cols=int(scalars["cols"]),
        max_range=scalars["max_range_m"],
        channels=channels,
        rotation_hz=scalars.get("rotation_hz", 10.0),
    )


def load_config(path: str | Path) -> SensorConfig:
    return parse_config(Path(path).read_text())


def serialize_config(config: SensorConfig) -> str:
    """Render the document form; load_config(serialize_config(c)) == c."""
    lines = [
        f"rows {config.rows}",
        f"cols {config.cols}",
        f"max_range_m {config.max_range!r}",
        f"rotation_hz {config.rotation_hz!r}",
    ]
    for i, ch in enumerate(config.channels):
        e = _degrees_exact(ch.elevation)
        a = _degrees_exact(ch.azimuth_offset)
        lines.append(f"channel {i} {e!r} {a!r}")
    return "\n".join(lines) + "\n"


def _degrees_exact(rad: float) -> float:
    """Degree value whose radians() recovers ``rad`` bit-exactly.

    degrees/radians are not exact inverses in floats; searching a few ulps
    around the rounded conversion finds an exact preimage whenever ``rad``
    itself came from a degree-valued document.
    """
    deg = math.degrees(rad)
    lo = hi = deg
    for _ in range(4):
        if math.radians(lo) == rad:
            return lo
        if math.radians(hi) == rad:
            return hi
        lo = math.nextafter(lo, -math.inf)
        hi = math.nextafter(hi, math.inf)
    return deg


def synthetic_vlp32() -> SensorConfig:
    """Synthetic 32-channel default: evenly spaced elevations -25..+15 deg,
    alternating +/-1.4 deg azimuth offsets, 1812 firings per revolution."""
    rows = 32
    step = 40.0 / (rows - 1)
    channels = tuple(
        ChannelCalib(
            elevation=math.radians(-25.0 + step * i),
            azimuth_offset=math.radians(1.4 if i % 2 == 0 else -1.4),
        )
        for i in range(rows)
    )
    return SensorConfig(rows=rows, cols=1812, max_range=200.0, channels=channels)


def default_calib_path() -> Path:
    """Path of the synthetic 32-channel calibration shipped with the package."""
    return Path(str(resources.files("lpcc").joinpath("data/vlp32_synthetic.calib")))
