"""Lossless bidirectional transform between ordered scans and raster planes.

Ordered-cloud convention: a scan of ``rows x cols`` beams is stored grouped
by firing sequence, so point ``i`` sits at ``row = i % rows``,
``col = i // rows``. Grid cell (row, col) of each plane holds that beam's
quantized range (u16), quantized azimuth (u16) and intensity (u8). Beams
with no return ("NaN returns") become entries in a NanIndex sidecar plus
placeholder pixels (value 0) in all three planes.

Encoder-side order of operations: project -> shift_planes (align rows by
their calibrated azimuth offsets) -> denoise (fill placeholders). The
decoder inverts: shift_planes(inverse) -> reconstruct, skipping NaN pixels.

Angle convention is fixed by the reconstruction formulas

    x = d * sin(-azimuth) * cos(elevation)
    y = d * cos(azimuth)  * cos(elevation)
    z = d * sin(elevation)

so projection computes azimuth = atan2(-x, y), normalized into [-pi, pi).

All operations are pure; frames can be processed in parallel freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import MetricsError, ProjectionError, QuantizationRangeError
from .sensor import TWO_PI, SensorConfig, column_shift

RANGE_SCALE = 65535  # Velodyne-style 16-bit range code: floor(d / d_max * 65535)
AZIMUTH_BINS = 65536  # [-pi, pi) split into 2^16 equal bins
AZIMUTH_BIN_WIDTH = TWO_PI / AZIMUTH_BINS


@dataclass(frozen=True)
class PointCloud:
    """Point list with per-point intensity; NaN xyz rows mark dropouts.

    ``xyz`` is float32 (n, 3); a record is either fully finite or fully NaN.
    Dropout records carry intensity 0 (enforced here, on ingestion).
    """

    xyz: np.ndarray
    intensity: np.ndarray
    frame_id: str = "0"

    def __post_init__(self) -> None:
        xyz = np.ascontiguousarray(self.xyz, dtype=np.float32)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError(f"xyz must be (n, 3), got {xyz.shape}")
        intensity = np.ascontiguousarray(self.intensity, dtype=np.uint8)
        if intensity.shape != (xyz.shape[0],):
            raise ValueError("intensity length must match xyz")
        finite = np.isfinite(xyz)
        mixed = finite.any(axis=1) & ~finite.all(axis=1)
        if mixed.any():
            raise ValueError(
                f"{int(mixed.sum())} records mix finite and non-finite coordinates"
            )
        valid = finite.all(axis=1)
        if (~valid).any():
            intensity = intensity.copy()
            intensity[~valid] = 0
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "intensity", intensity)
        object.__setattr__(self, "_valid", valid)

    @property
    def n_points(self) -> int:
        return self.xyz.shape[0]

    @property
    def valid_mask(self) -> np.ndarray:
        return self._valid  # type: ignore[attr-defined]

    @property
    def n_valid(self) -> int:
        return int(self.valid_mask.sum())

    def valid_xyz(self) -> np.ndarray:
        return self.xyz[self.valid_mask]

    def ranges(self) -> np.ndarray:
        """Euclidean range of every valid return, float64."""
        return np.linalg.norm(self.valid_xyz().astype(np.float64), axis=1)

    def is_ordered_for(self, config: SensorConfig) -> bool:
        return self.n_points == config.points_per_rev


@dataclass(frozen=True)
class ScanPlanes:
    """Co-registered range/azimuth/intensity rasters plus pipeline state."""

    range_q: np.ndarray  # u16 (rows, cols)
    azimuth_q: np.ndarray  # u16 (rows, cols)
    intensity: np.ndarray  # u8 (rows, cols)
    shifted: bool = False
    denoised: bool = False

    def __post_init__(self) -> None:
        r = np.ascontiguousarray(self.range_q, dtype=np.uint16)
        a = np.ascontiguousarray(self.azimuth_q, dtype=np.uint16)
        i = np.ascontiguousarray(self.intensity, dtype=np.uint8)
        if r.ndim != 2 or a.shape != r.shape or i.shape != r.shape:
            raise ValueError("planes must be 2-D and share one shape")
        object.__setattr__(self, "range_q", r)
        object.__setattr__(self, "azimuth_q", a)
        object.__setattr__(self, "intensity", i)

    @property
    def shape(self) -> tuple[int, int]:
        return self.range_q.shape


@dataclass(frozen=True)
class NanIndex:
    """Sidecar addressing every dropout pixel, sorted by (row, col)."""

    rows: np.ndarray  # u8 (k,)
    cols: np.ndarray  # u16 (k,)

    def __post_init__(self) -> None:
        r = np.ascontiguousarray(self.rows, dtype=np.uint8)
        c = np.ascontiguousarray(self.cols, dtype=np.uint16)
        if r.ndim != 1 or c.shape != r.shape:
            raise ValueError("rows/cols must be equal-length 1-D arrays")
        if len(r) > 1:
            key = r.astype(np.int64) * 65536 + c.astype(np.int64)
            if not (np.diff(key) > 0).all():
                raise ValueError("entries must be unique and sorted by (row, col)")
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "cols", c)

    def __len__(self) -> int:
        return len(self.rows)

    def check_bounds(self, rows: int, cols: int) -> None:
        if len(self) and (
            int(self.rows.max()) >= rows or int(self.cols.max()) >= cols
        ):
            raise ProjectionError("NanIndex entry out of grid bounds")

    def mask(self, rows: int, cols: int) -> np.ndarray:
        """Boolean (rows, cols) grid, True where a pixel is a NaN return."""
        self.check_bounds(rows, cols)
        m = np.zeros((rows, cols), dtype=bool)
        m[self.rows.astype(np.intp), self.cols.astype(np.intp)] = True
        return m

    @staticmethod
    def from_mask(mask: np.ndarray) -> "NanIndex":
        r, c = np.nonzero(mask)  # nonzero is already row-major sorted
        return NanIndex(r.astype(np.uint8), c.astype(np.uint16))


@dataclass(frozen=True)
class NormalizationParams:
    """Range-plane normalization: mean range and 95th-percentile range.

    Values are held at f32 precision, the width of their container fields.
    """

    mu: float
    theta: float

    def __post_init__(self) -> None:
        mu = float(np.float32(self.mu))
        theta = float(np.float32(self.theta))
        if not theta > 0:
            raise ValueError(f"theta must be > 0, got {theta}")
        if not mu >= 0:
            raise ValueError(f"mu must be >= 0, got {mu}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "theta", theta)


# --- quantizers ---------------------------------------------------------------


def quantize_range(d, d_max: float):
    """floor(d / d_max * 65535) as u16. Out-of-domain values raise; any
    clamping policy belongs to the caller."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0) or np.any(d > d_max) or not np.all(np.isfinite(d)):
        bad = d[~(np.isfinite(d) & (d >= 0) & (d <= d_max))]
        raise QuantizationRangeError(
            f"range outside [0, {d_max}]: first offender {bad.flat[0]!r}"
        )
    q = np.floor(d / d_max * RANGE_SCALE).astype(np.uint16)
    return q if q.ndim else np.uint16(q)


def dequantize_range(q, d_max: float):
    """Bin-midpoint inverse: (q + 0.5) / 65535 * d_max.

    Guarantees |dequantize(quantize(d)) - d| <= d_max / 65535 for all d in
    [0, d_max] (actual worst case is half that).
    """
    q = np.asarray(q, dtype=np.float64)
    out = (q + 0.5) / RANGE_SCALE * d_max
    return out if out.ndim else float(out)


def wrap_azimuth(alpha):
    """Normalize angles into [-pi, pi)."""
    a = np.asarray(alpha, dtype=np.float64)
    out = np.mod(a + math.pi, TWO_PI) - math.pi
    # float fmod can land exactly on +pi for tiny negatives; fold it back
    out = np.where(out >= math.pi, -math.pi, out)
    return out if out.ndim else float(out)


def quantize_azimuth(alpha):
    """Linear map of [-pi, pi) onto 0..65535 with floor; wraps first."""
    a = wrap_azimuth(alpha)
    q = np.floor((np.asarray(a) + math.pi) / TWO_PI * AZIMUTH_BINS)
    q = np.minimum(q, AZIMUTH_BINS - 1).astype(np.uint16)
    return q if q.ndim else np.uint16(q)


def dequantize_azimuth(q):
    """Bin-midpoint inverse; round-trip error <= 2*pi / 65536."""
    q = np.asarray(q, dtype=np.float64)
    out = -math.pi + (q + 0.5) * AZIMUTH_BIN_WIDTH
    return out if out.ndim else float(out)


def column_azimuth(col, cols: int):
    """Nominal azimuth of a grid column: -pi at column 0, increasing."""
    c = np.asarray(col, dtype=np.float64)
    out = -math.pi + c / cols * TWO_PI
    return out if out.ndim else float(out)


# --- grid <-> ordered-flat helpers --------------------------------------------


def _to_grid(flat: np.ndarray, rows: int, cols: int) -> np.ndarray:
    # ordered index i = col * rows + row
    return np.ascontiguousarray(flat.reshape(cols, rows).T)


def _from_grid(grid: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(grid.T).reshape(-1)


# --- projection pipeline -------------------------------------------------------


def project(cloud: PointCloud, config: SensorConfig) -> tuple[ScanPlanes, NanIndex]:
    """Rasterize an ordered cloud into the three planes plus NaN sidecar."""
    n = config.points_per_rev
    if cloud.n_points != n:
        raise ProjectionError(
            f"ordered cloud must have rows*cols = {n} points, got {cloud.n_points}"
        )
    valid = cloud.valid_mask
    xyz = cloud.xyz[valid].astype(np.float64)
    d = np.linalg.norm(xyz, axis=1)
    alpha = np.arctan2(-xyz[:, 0], xyz[:, 1])

    flat_range = np.zeros(n, dtype=np.uint16)
    flat_az = np.zeros(n, dtype=np.uint16)
    flat_int = np.zeros(n, dtype=np.uint8)
    flat_range[valid] = quantize_range(d, config.max_range)
    flat_az[valid] = quantize_azimuth(alpha)
    flat_int[valid] = cloud.intensity[valid]

    nan_i = np.nonzero(~valid)[0]
    nan_rows = (nan_i % config.rows).astype(np.uint8)
    nan_cols = (nan_i // config.rows).astype(np.uint16)
    order = np.lexsort((nan_cols, nan_rows))

    planes = ScanPlanes(
        range_q=_to_grid(flat_range, config.rows, config.cols),
        azimuth_q=_to_grid(flat_az, config.rows, config.cols),
        intensity=_to_grid(flat_int, config.rows, config.cols),
    )
    return planes, NanIndex(nan_rows[order], nan_cols[order])


def shift_planes(
    planes: ScanPlanes,
    nan: NanIndex,
    config: SensorConfig,
    *,
    inverse: bool = False,
) -> tuple[ScanPlanes, NanIndex]:
    """Circularly shift each row by its channel's column shift (sign flipped
    for the inverse direction); the NanIndex is remapped identically."""
    if planes.shifted == (not inverse):
        state = "already shifted" if planes.shifted else "not shifted yet"
        raise ProjectionError(f"planes are {state}")
    rows, cols = planes.shape
    if rows != config.rows or cols != config.cols:
        raise ProjectionError("plane shape does not match sensor grid")
    shifts = np.array([column_shift(config, r) for r in range(rows)], dtype=np.int64)
    if inverse:
        shifts = -shifts

    # dst[r, c] = src[r, (c - shift_r) mod cols]
    src_col = np.mod(np.arange(cols)[None, :] - shifts[:, None], cols)
    row_idx = np.arange(rows)[:, None]
    shifted = ScanPlanes(
        range_q=planes.range_q[row_idx, src_col],
        azimuth_q=planes.azimuth_q[row_idx, src_col],
        intensity=planes.intensity[row_idx, src_col],
        shifted=not planes.shifted,
        denoised=planes.denoised,
    )

    new_cols = np.mod(
        nan.cols.astype(np.int64) + shifts[nan.rows.astype(np.intp)], cols
    ).astype(np.uint16)
    order = np.lexsort((new_cols, nan.rows))
    return shifted, NanIndex(nan.rows[order], new_cols[order])


def denoise(planes: ScanPlanes, nan: NanIndex) -> ScanPlanes:
    """Fill dropout pixels so the planes compress as smooth images.

    Range and intensity take the previous pixel in row-major scan order
    (a NaN at (0,0) takes 0); azimuth is filled analytically with the
    column's nominal azimuth, which matches aligned planes. Pixels not in
    the NanIndex are never touched; the NanIndex itself is unchanged — it
    is the record used to skip these pixels at reconstruction.
    """
    if planes.denoised:
        raise ProjectionError("planes are already denoised")
    rows, cols = planes.shape
    hole = nan.mask(rows, cols)
    if not hole.any():
        return replace(planes, denoised=True)

    def forward_fill(grid: np.ndarray) -> np.ndarray:
        flat = grid.ravel().copy()
        flat_hole = hole.ravel()
        if flat_hole[0]:
            flat[0] = 0
        idx = np.where(flat_hole, 0, np.arange(flat.size))
        np.maximum.accumulate(idx, out=idx)
        return flat[idx].reshape(grid.shape)

    az = planes.azimuth_q.copy()
    az[hole] = quantize_azimuth(column_azimuth(np.nonzero(hole)[1], cols))
    return ScanPlanes(
        range_q=forward_fill(planes.range_q),
        azimuth_q=az,
        intensity=forward_fill(planes.intensity),
        shifted=planes.shifted,
        denoised=True,
    )


def reconstruct(
    planes: ScanPlanes,
    nan: NanIndex,
    config: SensorConfig,
    frame_id: str = "0",
) -> PointCloud:
    """Invert the projection: emit one point per non-NaN pixel, in grid order.

    Planes must be unshifted; whether they were denoised is irrelevant
    because NaN pixels are skipped via the sidecar.
    """
    if planes.shifted:
        raise ProjectionError("reconstruct requires unshifted planes")
    rows, cols = planes.shape
    if rows != config.rows or cols != config.cols:
        raise ProjectionError("plane shape does not match sensor grid")
    keep = ~nan.mask(rows, cols)

    d = dequantize_range(planes.range_q, config.max_range)
    alpha = dequantize_azimuth(planes.azimuth_q)
    omega = np.array(
        [config.channels[r].elevation for r in range(rows)], dtype=np.float64
    )[:, None]
    cos_w = np.cos(omega)
    x = d * np.sin(-alpha) * cos_w
    y = d * np.cos(alpha) * cos_w
    z = d * np.broadcast_to(np.sin(omega), (rows, cols))

    keep_flat = _from_grid(keep)
    xyz = np.stack([_from_grid(x), _from_grid(y), _from_grid(z)], axis=1)
    return PointCloud(
        xyz=xyz[keep_flat].astype(np.float32),
        intensity=_from_grid(planes.intensity)[keep_flat],
        frame_id=frame_id,
    )


# --- range-plane normalization -------------------------------------------------


def estimate_normalization(sample: list[PointCloud]) -> NormalizationParams:
    """mu = mean of all finite ranges, theta = 95th percentile
    (linear-interpolation definition), over a sample of clouds."""
    all_ranges = [c.ranges() for c in sample if c.n_valid]
    if not all_ranges:
        raise MetricsError("normalization sample contains no valid returns")
    r = np.concatenate(all_ranges)
    return NormalizationParams(
        mu=float(r.mean()), theta=float(np.percentile(r, 95.0))
    )


def normalize_range(
    range_q: np.ndarray, params: NormalizationParams, d_max: float
) -> np.ndarray:
    """u16 range plane -> real-valued plane ((q/65535 * d_max) - mu) / theta."""
    q = np.asarray(range_q, dtype=np.float64)
    return (q / RANGE_SCALE * d_max - params.mu) / params.theta


def denormalize_range(
    plane: np.ndarray, params: NormalizationParams, d_max: float
) -> np.ndarray:
    """Exact inverse of normalize_range followed by requantization; identity
    on every u16 value."""
    v = np.asarray(plane, dtype=np.float64)
    q = np.rint((v * params.theta + params.mu) / d_max * RANGE_SCALE)
    return np.clip(q, 0, RANGE_SCALE).astype(np.uint16)
