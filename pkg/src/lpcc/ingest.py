"""Scan ingestion and synthesis: PCD files and a seeded ray-cast generator.

The generator substitutes for recorded drives: it casts every (row, col)
beam of a sensor into a scene of a ground plane plus axis-aligned boxes and
returns an ordered cloud. Randomness (dropout selection, intensity noise,
procedural scenes) comes from SplitMix64 with its published constants, so
fixtures are byte-identical across platforms and library versions; only
the trigonometry follows the platform libm.

PCD support is the v0.7 subset documented in docs/formats.md: fields
x y z intensity, ASCII or binary, points stored in sensor firing order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PcdError, SceneError
from .projection import PointCloud
from .sensor import TWO_PI, SensorConfig

# --- seeded integer noise ----------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def splitmix64(seed: int, start: int, count: int) -> np.ndarray:
    """Elements [start, start+count) of the SplitMix64 stream for ``seed``."""
    ctr = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + ctr * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


# --- scene description ---------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned box: center, full edge lengths, surface intensity."""

    center: tuple[float, float, float]
    extents: tuple[float, float, float]
    intensity: int

    def __post_init__(self) -> None:
        if min(self.extents) <= 0:
            raise SceneError(f"box extents must be > 0, got {self.extents}")
        if not 0 <= self.intensity <= 255:
            raise SceneError(f"box intensity must be 0..255, got {self.intensity}")


@dataclass(frozen=True)
class SceneSpec:
    """Ray-cast scene: optional ground plane, boxes, dropout, seed."""

    ground_z: float | None = None
    ground_intensity: int = 40
    boxes: tuple[Box, ...] = ()
    dropout_rate: float = 0.0
    seed: int = 0
    range_noise: float = 0.0  # uniform +/- meters added to hit distances

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_rate <= 1.0:
            raise SceneError(f"dropout_rate must be in [0, 1], got {self.dropout_rate}")
        if self.range_noise < 0:
            raise SceneError("range_noise must be >= 0")
        object.__setattr__(self, "boxes", tuple(self.boxes))


def parse_scene(text: str) -> SceneSpec:
    """Parse a scene document (docs/formats.md)."""
    kw: dict = {}
    boxes: list[Box] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "box":
                if len(parts) != 8:
                    raise ValueError("box needs cx cy cz ex ey ez intensity")
                v = [float(x) for x in parts[1:7]]
                boxes.append(Box(tuple(v[:3]), tuple(v[3:]), int(parts[7])))
            elif parts[0] == "ground":
                if len(parts) != 3:
                    raise ValueError("ground needs z intensity")
                kw["ground_z"] = float(parts[1])
                kw["ground_intensity"] = int(parts[2])
            elif parts[0] == "dropout":
                kw["dropout_rate"] = float(parts[1])
            elif parts[0] == "seed":
                kw["seed"] = int(parts[1])
            elif parts[0] == "range_noise":
                kw["range_noise"] = float(parts[1])
            else:
                raise ValueError(f"unknown key '{parts[0]}'")
        except (ValueError, IndexError) as exc:
            raise SceneError(f"line {lineno}: {exc}") from exc
    return SceneSpec(boxes=tuple(boxes), **kw)


def load_scene(path: str | Path) -> SceneSpec:
    return parse_scene(Path(path).read_text())


def random_room_scene(seed: int, n_boxes: int = 8, dropout_rate: float = 0.15) -> SceneSpec:
    """Procedural enclosed scene: every beam hits a surface, so the NaN rate
    equals the dropout rate exactly. Used by tests and experiment scripts."""
    keys = splitmix64(seed ^ 0x5CE5E5, 0, 6 * n_boxes)

    def u(i: int, lo: float, hi: float) -> float:
        return lo + (int(keys[i]) / 2**64) * (hi - lo)

    boxes = [Box(center=(0.0, 0.0, 3.0), extents=(90.0, 70.0, 14.0), intensity=46)]
    for b in range(n_boxes):
        i = 6 * b
        r = u(i, 6.0, 32.0)
        az = u(i + 1, -math.pi, math.pi)
        ex, ey = u(i + 2, 0.8, 6.0), u(i + 3, 0.8, 6.0)
        ez = u(i + 4, 0.8, 5.0)
        boxes.append(
            Box(
                center=(r * math.cos(az), r * math.sin(az), -4.0 + ez / 2),
                extents=(ex, ey, ez),
                intensity=30 + int(keys[i + 5]) % 200,
            )
        )
    # +/-12 cm roughness keeps the range plane the least compressible of the
    # three, as real scans are
    return SceneSpec(
        boxes=tuple(boxes),
        dropout_rate=dropout_rate,
        seed=seed,
        range_noise=0.12,
    )


# --- ray casting ----------------------------------------------------------------


def _ray_ground(dirs: np.ndarray, ground_z: float) -> np.ndarray:
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ground_z / dz
    t = np.where(np.isfinite(t) & (t > 1e-9), t, np.inf)
    return t


def _ray_box(dirs: np.ndarray, box: Box) -> np.ndarray:
    lo = np.asarray(box.center) - np.asarray(box.extents) / 2
    hi = np.asarray(box.center) + np.asarray(box.extents) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = lo[None, :] / dirs
        t2 = hi[None, :] / dirs
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    # axis-parallel rays: inside the slab -> unbounded, outside -> empty
    par = dirs == 0
    inside = (lo[None, :] <= 0) & (0 <= hi[None, :])
    near = np.where(par, np.where(inside, -np.inf, np.inf), near)
    far = np.where(par, np.where(inside, np.inf, -np.inf), far)
    tmin = near.max(axis=1)
    tmax = far.min(axis=1)
    t = np.where(tmin > 1e-9, tmin, tmax)  # origin inside -> exit face
    hit = (tmax >= np.maximum(tmin, 0)) & (t > 1e-9) & np.isfinite(t)
    return np.where(hit, t, np.inf)


def synth_scan(spec: SceneSpec, config: SensorConfig, frame_id: str = "0") -> PointCloud:
    """Ray-cast one full revolution into an ordered cloud.

    Beam (row, col) fires at the column azimuth plus the channel's calibrated
    offset, at the channel's elevation. The nearest hit within max_range
    becomes a return carrying the surface intensity plus seeded +/-5 noise;
    misses and the seeded exact-count dropout subset become NaN returns.
    """
    rows, cols = config.rows, config.cols
    n = rows * cols
    omega = np.array([c.elevation for c in config.channels])
    offs = np.array([c.azimuth_offset for c in config.channels])
    col_az = -math.pi + np.arange(cols) * (TWO_PI / cols)
    az = col_az[:, None] + offs[None, :]  # (cols, rows): ordered-flat layout
    w = np.broadcast_to(omega[None, :], az.shape)
    dirs = np.stack(
        [np.sin(-az) * np.cos(w), np.cos(az) * np.cos(w), np.broadcast_to(np.sin(w), az.shape)],
        axis=-1,
    ).reshape(n, 3)

    t_best = np.full(n, np.inf)
    surf = np.zeros(n, dtype=np.int64)
    candidates = []
    if spec.ground_z is not None:
        candidates.append((_ray_ground(dirs, spec.ground_z), spec.ground_intensity))
    for box in spec.boxes:
        candidates.append((_ray_box(dirs, box), box.intensity))
    for t, intensity in candidates:
        closer = t < t_best
        t_best = np.where(closer, t, t_best)
        surf = np.where(closer, intensity, surf)

    if spec.range_noise > 0:
        jitter = splitmix64(spec.seed, 2 * n, n).astype(np.float64) / 2**64
        t_best = t_best + (jitter * 2 - 1) * spec.range_noise

    hit = np.isfinite(t_best) & (t_best <= config.max_range) & (t_best > 0)

    # exact-count dropout: rank hits by their stream key, drop the lowest
    hit_idx = np.nonzero(hit)[0]
    n_drop = int(round(spec.dropout_rate * len(hit_idx)))
    if n_drop:
        keys = splitmix64(spec.seed, 0, n)[hit_idx]
        dropped = hit_idx[np.argsort(keys, kind="stable")[:n_drop]]
        hit[dropped] = False

    noise = (splitmix64(spec.seed, n, n).astype(np.int64) % 11) - 5
    intensity = np.zeros(n, dtype=np.uint8)
    intensity[hit] = np.clip(surf[hit] + noise[hit], 0, 255).astype(np.uint8)

    xyz = np.full((n, 3), np.nan, dtype=np.float64)
    xyz[hit] = dirs[hit] * t_best[hit, None]
    return PointCloud(xyz=xyz.astype(np.float32), intensity=intensity, frame_id=frame_id)


# --- PCD v0.7 subset --------------------------------------------------------------

_PCD_FIELDS = ("x", "y", "z", "intensity")


def write_pcd(cloud: PointCloud, binary: bool = True, width: int | None = None,
              height: int | None = None) -> bytes:
    """Serialize; pass width/height to declare the sensor grid of an ordered
    cloud (points stay in firing-sequence order)."""
    n = cloud.n_points
    if width is None or height is None:
        width, height = n, 1
    if width * height != n:
        raise PcdError(f"width*height = {width * height} but cloud has {n} points")
    header = (
        "# .PCD v0.7 - Point Cloud Data file format\n"
        "VERSION 0.7\n"
        "FIELDS x y z intensity\n"
        "SIZE 4 4 4 1\n"
        "TYPE F F F U\n"
        "COUNT 1 1 1 1\n"
        f"WIDTH {width}\n"
        f"HEIGHT {height}\n"
        "VIEWPOINT 0 0 0 1 0 0 0\n"
        f"POINTS {n}\n"
        f"DATA {'binary' if binary else 'ascii'}\n"
    ).encode()
    if binary:
        rec = np.zeros(n, dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("i", "u1")])
        rec["x"], rec["y"], rec["z"] = cloud.xyz[:, 0], cloud.xyz[:, 1], cloud.xyz[:, 2]
        rec["i"] = cloud.intensity
        return header + rec.tobytes()
    lines = [
        f"{x!r} {y!r} {z!r} {i}"
        for (x, y, z), i in zip(cloud.xyz.tolist(), cloud.intensity.tolist())
    ]
    return header + ("\n".join(lines) + "\n").encode()


def read_pcd(data: bytes, frame_id: str = "0") -> PointCloud:
    """Parse the PCD subset; NaN records are preserved (intensity zeroed)."""
    try:
        header_end = _find_header_end(data)
        header = data[:header_end].decode("ascii", errors="replace")
    except Exception as exc:
        raise PcdError(f"malformed header: {exc}") from exc
    meta: dict[str, list[str]] = {}
    for raw in header.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        meta[parts[0].upper()] = parts[1:]

    for key in ("FIELDS", "SIZE", "TYPE", "POINTS", "DATA"):
        if key not in meta:
            raise PcdError(f"header missing {key}")
    fields = [f.lower() for f in meta["FIELDS"]]
    for needed in _PCD_FIELDS:
        if needed not in fields:
            raise PcdError(f"missing required field '{needed}'")
    if any(int(c) != 1 for c in meta.get("COUNT", ["1"] * len(fields))):
        raise PcdError("COUNT > 1 fields are not supported")
    n = int(meta["POINTS"][0])
    sizes = [int(s) for s in meta["SIZE"]]
    types = [t.upper() for t in meta["TYPE"]]
    if len(sizes) != len(fields) or len(types) != len(fields):
        raise PcdError("SIZE/TYPE arity does not match FIELDS")

    np_types = []
    for f, t, s in zip(fields, types, sizes):
        if f in ("x", "y", "z"):
            if (t, s) != ("F", 4):
                raise PcdError(f"field '{f}' must be F4")
            np_types.append((f, "<f4"))
        elif f == "intensity":
            if (t, s) == ("U", 1):
                np_types.append((f, "u1"))
            elif (t, s) == ("F", 4):
                np_types.append((f, "<f4"))
            else:
                raise PcdError("intensity must be U1 or F4")
        else:
            np_types.append((f, f"<{'fiu'['FIU'.index(t)]}{s}"))

    mode = meta["DATA"][0].lower()
    body = data[header_end:]
    if mode == "binary":
        dt = np.dtype(np_types)
        if len(body) < n * dt.itemsize:
            raise PcdError(
                f"binary body has {len(body)} bytes, needs {n * dt.itemsize}"
            )
        rec = np.frombuffer(body[: n * dt.itemsize], dtype=dt)
    elif mode == "ascii":
        try:
            table = np.loadtxt(
                body.decode("ascii").splitlines(), dtype=np.float64, ndmin=2
            )
        except ValueError as exc:
            raise PcdError(f"bad ascii body: {exc}") from exc
        if table.shape != (n, len(fields)):
            raise PcdError(f"ascii body shape {table.shape}, expected ({n}, {len(fields)})")
        rec = {f: table[:, k] for k, f in enumerate(fields)}
    else:
        raise PcdError(f"unsupported DATA mode '{mode}'")

    xyz = np.stack(
        [np.asarray(rec["x"]), np.asarray(rec["y"]), np.asarray(rec["z"])], axis=1
    ).astype(np.float32)
    raw_i = np.asarray(rec["intensity"]).astype(np.float64)
    valid = np.isfinite(xyz).all(axis=1)
    if np.any(~np.isfinite(raw_i[valid])):
        raise PcdError("non-finite intensity on a valid point")
    raw_i[~valid] = 0
    if raw_i.min() < 0 or raw_i.max() > 255:
        raise PcdError("intensity outside 0..255")
    return PointCloud(
        xyz=xyz, intensity=np.rint(raw_i).astype(np.uint8), frame_id=frame_id
    )


def _find_header_end(data: bytes) -> int:
    pos = 0
    while True:
        nl = data.index(b"\n", pos)
        line = data[pos : nl].strip()
        pos = nl + 1
        if line.upper().startswith(b"DATA"):
            return pos


def load_pcd(path: str | Path) -> PointCloud:
    p = Path(path)
    return read_pcd(p.read_bytes(), frame_id=p.stem)


def save_pcd(cloud: PointCloud, path: str | Path, binary: bool = True,
             width: int | None = None, height: int | None = None) -> None:
    Path(path).write_bytes(write_pcd(cloud, binary=binary, width=width, height=height))
