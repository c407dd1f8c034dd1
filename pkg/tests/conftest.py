import math

import numpy as np
import pytest

from lpcc import (
    ChannelCalib,
    PointCloud,
    SensorConfig,
    synth_scan,
    synthetic_vlp32,
)
from lpcc.ingest import random_room_scene


@pytest.fixture(scope="session")
def vlp32() -> SensorConfig:
    return synthetic_vlp32()


@pytest.fixture(scope="session")
def tiny_config() -> SensorConfig:
    """4x16 sensor for fast unit tests: mixed elevations and offsets."""
    return SensorConfig(
        rows=4,
        cols=16,
        max_range=100.0,
        channels=(
            ChannelCalib(math.radians(-15.0), math.radians(22.5)),  # shift +1
            ChannelCalib(math.radians(-5.0), 0.0),
            ChannelCalib(math.radians(5.0), math.radians(-45.0)),  # shift -2
            ChannelCalib(math.radians(15.0), math.radians(67.5)),  # shift +3
        ),
    )


@pytest.fixture(scope="session")
def room_cloud(vlp32) -> PointCloud:
    return synth_scan(random_room_scene(seed=42), vlp32, frame_id="room-42")


def make_cloud(xyz, intensity=None, frame_id="t") -> PointCloud:
    xyz = np.asarray(xyz, dtype=np.float32)
    if intensity is None:
        intensity = np.zeros(len(xyz), dtype=np.uint8)
    return PointCloud(xyz=xyz, intensity=np.asarray(intensity, dtype=np.uint8),
                      frame_id=frame_id)


def grid_cloud(config, fill_xyz=(0.0, 5.0, 0.0), intensity=7) -> PointCloud:
    """Ordered cloud with every beam at the same xyz (for plumbing tests)."""
    n = config.points_per_rev
    xyz = np.tile(np.asarray(fill_xyz, dtype=np.float32), (n, 1))
    return PointCloud(xyz=xyz, intensity=np.full(n, intensity, dtype=np.uint8))
