"""lpcc: calibrated LiDAR scan <-> raster-plane compression.

An ordered scan is projected losslessly into co-registered range / azimuth /
intensity rasters plus a NaN sidecar, compressed with interchangeable raster
codecs, serialized into a bit-exact container, and evaluated with symmetric
nearest-neighbor metrics.
"""

__version__ = "0.1.0"

from .codecs import CodecId, PlaneCodeword, decode_plane, encode_plane
from .container import (
    UNCOMPRESSED_BPP,
    CompressedFrame,
    PlaneKind,
    compression_ratio,
    decode_nan_index,
    encode_nan_index,
    frame_bpp,
    iter_frames,
    read_frame,
    write_frame,
)
from .errors import LpccError
from .ingest import (
    Box,
    SceneSpec,
    load_pcd,
    load_scene,
    parse_scene,
    random_room_scene,
    read_pcd,
    save_pcd,
    splitmix64,
    synth_scan,
    write_pcd,
)
from .metrics import (
    MetricsReport,
    SpatialIndex,
    evaluate_clouds,
    nn_brute,
    rmse_nn,
    snnrmse,
    snnrmse_i,
    voxel_baseline,
)
from .pipeline import (
    ALL_LOSSLESS,
    ALL_RAW,
    CodecChoices,
    compress_cloud,
    decompress_frame,
    preprocess,
    read_plane_file,
    roundtrip_reference,
    write_plane_file,
)
from .projection import (
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
    wrap_azimuth,
)
from .sensor import (
    ChannelCalib,
    SensorConfig,
    column_shift,
    default_calib_path,
    elevation_for_row,
    load_config,
    parse_config,
    serialize_config,
    synthetic_vlp32,
)

__all__ = [name for name in dir() if not name.startswith("_")]
