"""sonomark: trainable audio-in-image watermarking with Siamese verification.

Hides an 8192-sample audio clip inside a 128x128 RGB image, blindly extracts
it, and verifies noisy extractions with a similarity classifier.
"""

from .distortions import DistortionSpec, apply_distortion, cutout, rotate
from .errors import (
    ConfigurationError,
    InvalidInputError,
    MediaIOError,
    TrainingDivergedError,
)
from .media_io import (
    AUDIO_LEN,
    FRAME_DIM,
    FRAME_STEPS,
    IMG_SIZE,
    SAMPLE_RATE,
    flatten_frames,
    load_audio,
    load_image,
    reshape_audio,
    save_audio,
    save_image,
)
from .metrics import LossWeights, bce_loss, pretrain_loss, rmse, ssim, wm_loss
from .networks import WMConfig, WMNetwork, decode, embed, encode, extract, wm_forward
from .similarity import SimConfig, SimilarityNet, classify, similarity

__all__ = [
    "AUDIO_LEN",
    "FRAME_DIM",
    "FRAME_STEPS",
    "IMG_SIZE",
    "SAMPLE_RATE",
    "ConfigurationError",
    "DistortionSpec",
    "InvalidInputError",
    "LossWeights",
    "MediaIOError",
    "SimConfig",
    "SimilarityNet",
    "TrainingDivergedError",
    "WMConfig",
    "WMNetwork",
    "apply_distortion",
    "bce_loss",
    "classify",
    "cutout",
    "decode",
    "embed",
    "encode",
    "extract",
    "flatten_frames",
    "load_audio",
    "load_image",
    "pretrain_loss",
    "reshape_audio",
    "rmse",
    "rotate",
    "save_audio",
    "save_image",
    "similarity",
    "ssim",
    "wm_forward",
    "wm_loss",
]
