"""Progressive residual recurrent codec for normalized range planes."""

__version__ = "0.1.0"

from .codec import (
    BitstreamError,
    RnnBitstream,
    decode,
    encode,
    run_coder,
    run_decoder,
)
from .model import PATCH, ModelConfig, RnnCodecModel
from .planes import load_plane, read_plane, save_plane, synthetic_plane, write_plane
from .train import TrainConfig, TrainingError, iteration_residuals, train

__all__ = [name for name in dir() if not name.startswith("_")]
