import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpcc import (
    NanIndex,
    NormalizationParams,
    PointCloud,
    ScanPlanes,
    denoise,
    denormalize_range,
    dequantize_azimuth,
    dequantize_range,
    estimate_normalization,
    normalize_range,
    project,
    quantize_azimuth,
    quantize_range,
    reconstruct,
    shift_planes,
    synth_scan,
    wrap_azimuth,
)
from lpcc.errors import MetricsError, ProjectionError, QuantizationRangeError
from lpcc.ingest import random_room_scene
from lpcc.projection import AZIMUTH_BINS, RANGE_SCALE

from conftest import grid_cloud, make_cloud

D_MAX = 200.0
DELTA_D = D_MAX / RANGE_SCALE
DELTA_A = 2 * math.pi / AZIMUTH_BINS


class TestRangeQuantizer:
    def test_upper_bound(self):
        assert quantize_range(200.0, D_MAX) == 65535

    def test_zero(self):
        assert quantize_range(0.0, D_MAX) == 0

    def test_midpoint_floor(self):
        assert quantize_range(100.0, D_MAX) == 32767  # floor(0.5 * 65535)

    def test_rejects_out_of_domain(self):
        with pytest.raises(QuantizationRangeError):
            quantize_range(-0.001, D_MAX)
        with pytest.raises(QuantizationRangeError):
            quantize_range(200.001, D_MAX)
        with pytest.raises(QuantizationRangeError):
            quantize_range(float("nan"), D_MAX)

    def test_dequantize_bin_zero(self):
        # midpoint formula oracle: (0 + 0.5) / 65535 * 200
        assert dequantize_range(0, D_MAX) == pytest.approx(0.5 / 65535 * 200, rel=1e-12)

    def test_dequantize_top_bin_within_one_step_of_d_max(self):
        assert abs(dequantize_range(65535, D_MAX) - D_MAX) <= DELTA_D

    def test_round_trip_57_3(self):
        assert abs(dequantize_range(quantize_range(57.3, D_MAX), D_MAX) - 57.3) <= 0.003052

    def test_round_trip_bound_exhaustive_grid(self):
        # every bin midpoint plus both edges of every bin, clipped to the domain
        q = np.arange(65536)
        centers = np.minimum(dequantize_range(q, D_MAX), D_MAX)
        edges = q / RANGE_SCALE * D_MAX
        for d in (centers, edges, np.nextafter(edges[1:], 0.0)):
            err = np.abs(dequantize_range(quantize_range(d, D_MAX), D_MAX) - d)
            assert err.max() <= DELTA_D

    @given(st.floats(min_value=0.0, max_value=200.0))
    def test_round_trip_bound_property(self, d):
        assert abs(dequantize_range(quantize_range(d, D_MAX), D_MAX) - d) <= DELTA_D


class TestAzimuthQuantizer:
    def test_lower_bound(self):
        assert quantize_azimuth(-math.pi) == 0

    def test_zero_maps_to_32768(self):
        # linear-map oracle: (0 + pi) / 2pi * 65536
        assert quantize_azimuth(0.0) == 32768

    def test_wraps_before_quantizing(self):
        assert quantize_azimuth(math.pi) == quantize_azimuth(-math.pi)
        assert quantize_azimuth(3 * math.pi) == quantize_azimuth(math.pi)

    def test_round_trip_over_u16_grid(self):
        a = dequantize_azimuth(np.arange(65536, dtype=np.uint16))
        err = np.abs(dequantize_azimuth(quantize_azimuth(a)) - a)
        assert err.max() <= 9.5874e-5

    @given(st.floats(min_value=-10.0, max_value=10.0))
    def test_round_trip_bound_property(self, alpha):
        wrapped = wrap_azimuth(alpha)
        back = dequantize_azimuth(quantize_azimuth(alpha))
        assert abs(back - wrapped) <= DELTA_A

    @given(st.floats(allow_nan=False, allow_infinity=False, width=32))
    def test_wrap_lands_in_range(self, alpha):
        w = wrap_azimuth(alpha)
        assert -math.pi <= w < math.pi


class TestProject:
    def test_all_nan_cloud(self, tiny_config):
        n = tiny_config.points_per_rev
        cloud = make_cloud(np.full((n, 3), np.nan))
        planes, nan = project(cloud, tiny_config)
        assert len(nan) == n
        assert not planes.range_q.any()
        assert not planes.azimuth_q.any()
        assert not planes.intensity.any()
        assert not planes.shifted and not planes.denoised

    def test_axis_aligned_point(self, tiny_config):
        # (0, 5, 0) sits at azimuth 0 on the elevation-0... nearest row is
        # elevation -5 deg; use a 1-row zero-elevation config instead
        from lpcc import ChannelCalib, SensorConfig

        cfg = SensorConfig(rows=1, cols=4, max_range=100.0,
                           channels=(ChannelCalib(0.0, 0.0),))
        xyz = np.full((4, 3), np.nan, dtype=np.float32)
        xyz[2] = (0.0, 5.0, 0.0)
        intensity = np.zeros(4, dtype=np.uint8)
        intensity[2] = 9
        planes, nan = project(make_cloud(xyz, intensity), cfg)
        assert planes.range_q[0, 2] == quantize_range(5.0, 100.0)
        assert planes.azimuth_q[0, 2] == quantize_azimuth(0.0)
        assert planes.intensity[0, 2] == 9
        assert len(nan) == 3

    def test_dropout_bookkeeping(self, vlp32, room_cloud):
        planes, nan = project(room_cloud, vlp32)
        expected_nan = int((~room_cloud.valid_mask).sum())
        assert len(nan) == expected_nan
        # room scene: every beam hits, so NaNs come from dropout alone
        assert abs(len(nan) - 0.15 * vlp32.points_per_rev) <= 1

    def test_length_mismatch(self, tiny_config):
        cloud = make_cloud(np.zeros((5, 3)))
        with pytest.raises(ProjectionError, match="rows\\*cols"):
            project(cloud, tiny_config)

    def test_range_beyond_d_max_rejected(self, tiny_config):
        cloud = grid_cloud(tiny_config, fill_xyz=(0.0, 150.0, 0.0))
        with pytest.raises(QuantizationRangeError):
            project(cloud, tiny_config)

    def test_nan_index_sorted_and_unique(self, vlp32, room_cloud):
        _, nan = project(room_cloud, vlp32)
        key = nan.rows.astype(np.int64) * 65536 + nan.cols.astype(np.int64)
        assert (np.diff(key) > 0).all()


def random_planes(cfg, seed=0):
    rng = np.random.default_rng(seed)
    planes = ScanPlanes(
        range_q=rng.integers(0, 65536, (cfg.rows, cfg.cols), dtype=np.uint16),
        azimuth_q=rng.integers(0, 65536, (cfg.rows, cfg.cols), dtype=np.uint16),
        intensity=rng.integers(0, 256, (cfg.rows, cfg.cols), dtype=np.uint8),
    )
    mask = rng.random((cfg.rows, cfg.cols)) < 0.1
    return planes, NanIndex.from_mask(mask)


class TestShiftPlanes:
    def test_zero_offsets_is_identity(self):
        from lpcc import ChannelCalib, SensorConfig

        cfg = SensorConfig(rows=2, cols=8, max_range=10.0,
                           channels=(ChannelCalib(0.0, 0.0), ChannelCalib(0.1, 0.0)))
        planes, nan = random_planes(cfg)
        out, nan2 = shift_planes(planes, nan, cfg)
        assert np.array_equal(out.range_q, planes.range_q)
        assert np.array_equal(nan2.cols, nan.cols)
        assert out.shifted

    def test_involution(self, tiny_config):
        planes, nan = random_planes(tiny_config, seed=3)
        fwd, nan_f = shift_planes(planes, nan, tiny_config)
        back, nan_b = shift_planes(fwd, nan_f, tiny_config, inverse=True)
        for attr in ("range_q", "azimuth_q", "intensity"):
            assert np.array_equal(getattr(back, attr), getattr(planes, attr))
        assert np.array_equal(nan_b.rows, nan.rows)
        assert np.array_equal(nan_b.cols, nan.cols)
        assert not back.shifted

    def test_plus_three_moves_col0_to_col3(self):
        # circular-shift oracle on a 1-row sensor with a +3-column offset
        from lpcc import ChannelCalib, SensorConfig

        cols = 1812
        cfg = SensorConfig(rows=1, cols=cols, max_range=10.0,
                           channels=(ChannelCalib(0.0, 3 * 2 * math.pi / cols),))
        planes = ScanPlanes(
            range_q=np.arange(cols, dtype=np.uint16).reshape(1, -1),
            azimuth_q=np.zeros((1, cols), np.uint16),
            intensity=np.zeros((1, cols), np.uint8),
        )
        out, _ = shift_planes(planes, NanIndex.from_mask(np.zeros((1, cols), bool)), cfg)
        assert out.range_q[0, 3] == 0  # col 0 moved to col 3
        assert out.range_q[0, 2] == 1811  # col 1811 wrapped to col 2

    def test_wrong_state_rejected(self, tiny_config):
        planes, nan = random_planes(tiny_config)
        with pytest.raises(ProjectionError, match="not shifted"):
            shift_planes(planes, nan, tiny_config, inverse=True)
        fwd, nan_f = shift_planes(planes, nan, tiny_config)
        with pytest.raises(ProjectionError, match="already"):
            shift_planes(fwd, nan_f, tiny_config)


class TestDenoise:
    def test_no_nans_is_identity(self, tiny_config):
        planes, _ = random_planes(tiny_config)
        empty = NanIndex.from_mask(np.zeros((tiny_config.rows, tiny_config.cols), bool))
        out = denoise(planes, empty)
        assert np.array_equal(out.range_q, planes.range_q)
        assert out.denoised

    def test_previous_pixel_fill(self):
        # row [a, NaN, NaN, b] -> [a, a, a, b]
        row = np.array([[70, 0, 0, 90]], dtype=np.uint16)
        planes = ScanPlanes(range_q=row, azimuth_q=row.copy(),
                            intensity=row.astype(np.uint8))
        nan = NanIndex(np.array([0, 0], np.uint8), np.array([1, 2], np.uint16))
        out = denoise(planes, nan)
        assert out.range_q.tolist() == [[70, 70, 70, 90]]
        assert out.intensity.tolist() == [[70, 70, 70, 90]]

    def test_nan_at_origin_fills_zero(self):
        row = np.array([[123, 55]], dtype=np.uint16)
        planes = ScanPlanes(range_q=row, azimuth_q=row.copy(),
                            intensity=row.astype(np.uint8))
        nan = NanIndex(np.array([0], np.uint8), np.array([0], np.uint16))
        out = denoise(planes, nan)
        assert out.range_q.tolist() == [[0, 55]]

    def test_fill_crosses_row_boundary(self):
        grid = np.array([[5, 6], [0, 8]], dtype=np.uint16)
        planes = ScanPlanes(range_q=grid, azimuth_q=grid.copy(),
                            intensity=grid.astype(np.uint8))
        nan = NanIndex(np.array([1], np.uint8), np.array([0], np.uint16))
        out = denoise(planes, nan)
        assert out.range_q[1, 0] == 6  # previous pixel in scan order is (0, 1)

    def test_azimuth_filled_analytically(self, tiny_config):
        planes, _ = random_planes(tiny_config, seed=9)
        nan = NanIndex(np.array([2], np.uint8), np.array([5], np.uint16))
        out = denoise(planes, nan)
        expected = quantize_azimuth(-math.pi + 5 / tiny_config.cols * 2 * math.pi)
        assert out.azimuth_q[2, 5] == expected

    def test_never_touches_unlisted_pixels(self, tiny_config):
        planes, nan = random_planes(tiny_config, seed=4)
        out = denoise(planes, nan)
        keep = ~nan.mask(tiny_config.rows, tiny_config.cols)
        for attr in ("range_q", "azimuth_q", "intensity"):
            assert np.array_equal(getattr(out, attr)[keep], getattr(planes, attr)[keep])

    def test_double_denoise_rejected(self, tiny_config):
        planes, nan = random_planes(tiny_config)
        with pytest.raises(ProjectionError, match="denoised"):
            denoise(denoise(planes, nan), nan)


class TestNormalization:
    def test_pixel_at_mu_maps_to_zero(self):
        params = NormalizationParams(mu=80.0, theta=30.0)
        q = quantize_range(80.0, D_MAX)  # 80/200*65535 = 26214 exactly
        assert normalize_range(np.uint16(q), params, D_MAX) == pytest.approx(0.0, abs=1e-9)

    def test_direct_formula_oracle(self):
        params = NormalizationParams(mu=20.0, theta=60.0)
        v = normalize_range(np.uint16(26214), params, D_MAX)  # pixel at 80 m
        assert v == pytest.approx((80.0 - 20.0) / 60.0, abs=1e-9)

    def test_full_u16_round_trip_identity(self):
        params = NormalizationParams(mu=23.7, theta=61.2)
        q = np.arange(65536, dtype=np.uint16).reshape(256, 256)
        assert np.array_equal(denormalize_range(normalize_range(q, params, D_MAX), params, D_MAX), q)

    def test_theta_must_be_positive(self):
        with pytest.raises(ValueError):
            NormalizationParams(mu=1.0, theta=0.0)

    @given(st.floats(0.1, 199.0), st.floats(0.5, 150.0))
    @settings(max_examples=30)
    def test_round_trip_identity_property(self, mu, theta):
        params = NormalizationParams(mu=mu, theta=theta)
        q = np.arange(0, 65536, 97, dtype=np.uint16)
        assert np.array_equal(
            denormalize_range(normalize_range(q, params, D_MAX), params, D_MAX), q
        )


class TestEstimateNormalization:
    def test_constant_ranges(self):
        cloud = make_cloud(np.tile([0.0, 10.0, 0.0], (20, 1)))
        params = estimate_normalization([cloud])
        assert params.mu == pytest.approx(10.0)
        assert params.theta == pytest.approx(10.0)

    def test_percentile_oracle_1_to_100(self):
        # linear-interpolation percentile of 1..100 at 95% is 95.05
        xyz = np.zeros((100, 3))
        xyz[:, 1] = np.arange(1, 101)
        params = estimate_normalization([make_cloud(xyz)])
        assert params.theta == pytest.approx(95.05, abs=1e-4)
        assert params.mu == pytest.approx(50.5)

    def test_nans_excluded(self):
        xyz = np.zeros((4, 3))
        xyz[:, 1] = [10.0, 10.0, np.nan, 10.0]
        xyz[2] = np.nan
        params = estimate_normalization([make_cloud(xyz)])
        assert params.mu == pytest.approx(10.0)

    def test_empty_sample_rejected(self):
        with pytest.raises(MetricsError):
            estimate_normalization([make_cloud(np.full((3, 3), np.nan))])


class TestReconstruct:
    def test_zero_angles(self):
        from lpcc import ChannelCalib, SensorConfig

        cfg = SensorConfig(rows=1, cols=1, max_range=100.0,
                           channels=(ChannelCalib(0.0, 0.0),))
        planes = ScanPlanes(
            range_q=np.array([[quantize_range(5.0, 100.0)]], np.uint16),
            azimuth_q=np.array([[quantize_azimuth(0.0)]], np.uint16),
            intensity=np.array([[3]], np.uint8),
        )
        out = reconstruct(planes, NanIndex.from_mask(np.zeros((1, 1), bool)), cfg)
        np.testing.assert_allclose(out.xyz[0], [0.0, 5.0, 0.0], atol=5e-3)
        assert out.intensity[0] == 3

    def test_vertical_beam(self):
        from lpcc import ChannelCalib, SensorConfig

        cfg = SensorConfig(rows=1, cols=1, max_range=100.0,
                           channels=(ChannelCalib(math.pi / 2 * 0.999999, 0.0),))
        planes = ScanPlanes(
            range_q=np.array([[quantize_range(5.0, 100.0)]], np.uint16),
            azimuth_q=np.array([[quantize_azimuth(0.0)]], np.uint16),
            intensity=np.array([[0]], np.uint8),
        )
        out = reconstruct(planes, NanIndex.from_mask(np.zeros((1, 1), bool)), cfg)
        np.testing.assert_allclose(out.xyz[0], [0.0, 0.0, 5.0], atol=5e-3)

    def test_round_trip_error_bound(self, vlp32, room_cloud):
        planes, nan = project(room_cloud, vlp32)
        rec = reconstruct(planes, nan, vlp32)
        orig = room_cloud.xyz[room_cloud.valid_mask].astype(np.float64)
        err = np.linalg.norm(rec.xyz.astype(np.float64) - orig, axis=1)
        d = np.linalg.norm(orig, axis=1)
        assert (err <= DELTA_D + d * DELTA_A).all()

    def test_point_accounting(self, vlp32, room_cloud):
        planes, nan = project(room_cloud, vlp32)
        rec = reconstruct(planes, nan, vlp32)
        assert rec.n_points == vlp32.points_per_rev - len(nan)

    def test_order_preserved(self, vlp32, room_cloud):
        planes, nan = project(room_cloud, vlp32)
        rec = reconstruct(planes, nan, vlp32)
        # grid order == input order restricted to valid points
        orig_valid = room_cloud.xyz[room_cloud.valid_mask]
        err = np.linalg.norm(rec.xyz - orig_valid, axis=1)
        assert err.max() < 0.01  # pairing only works if order matches

    def test_rejects_shifted_planes(self, vlp32, room_cloud):
        planes, nan = project(room_cloud, vlp32)
        shifted, nan_s = shift_planes(planes, nan, vlp32)
        with pytest.raises(ProjectionError, match="unshifted"):
            reconstruct(shifted, nan_s, vlp32)

    def test_nan_index_out_of_bounds(self, tiny_config):
        planes, _ = random_planes(tiny_config)
        bad = NanIndex(np.array([200], np.uint8), np.array([0], np.uint16))
        with pytest.raises(ProjectionError, match="bounds"):
            reconstruct(planes, bad, tiny_config)

    def test_shift_unshift_does_not_change_reconstruction(self, vlp32, room_cloud):
        planes, nan = project(room_cloud, vlp32)
        fwd, nan_f = shift_planes(planes, nan, vlp32)
        back, nan_b = shift_planes(fwd, nan_f, vlp32, inverse=True)
        a = reconstruct(planes, nan, vlp32)
        b = reconstruct(back, nan_b, vlp32)
        assert np.array_equal(a.xyz, b.xyz)
        assert np.array_equal(a.intensity, b.intensity)

    def test_intensity_survives_bit_exactly(self, vlp32, room_cloud):
        planes, nan = project(room_cloud, vlp32)
        rec = reconstruct(planes, nan, vlp32)
        assert np.array_equal(rec.intensity, room_cloud.intensity[room_cloud.valid_mask])


class TestPointCloudType:
    def test_mixed_coordinates_rejected(self):
        xyz = np.array([[1.0, np.nan, 0.0]], dtype=np.float32)
        with pytest.raises(ValueError, match="mix"):
            PointCloud(xyz=xyz, intensity=np.zeros(1, np.uint8))

    def test_nan_records_get_zero_intensity(self):
        xyz = np.array([[np.nan, np.nan, np.nan], [0, 1, 0]], dtype=np.float32)
        cloud = PointCloud(xyz=xyz, intensity=np.array([9, 9], np.uint8))
        assert cloud.intensity.tolist() == [0, 9]
