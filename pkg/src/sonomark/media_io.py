"""Audio/image loading, validation, and reshaping.

Canonical in-memory formats:
  audio clip    -- float32 vector of AUDIO_LEN samples in [-1, 1]
  frame matrix  -- float32 (FRAME_STEPS, FRAME_DIM), row-major reshape of a clip
  image         -- float32 (IMG_SIZE, IMG_SIZE, 3) in [0, 1]
"""

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import InvalidInputError, MediaIOError

AUDIO_LEN = 8192
SAMPLE_RATE = 8192
FRAME_STEPS = 128
FRAME_DIM = 64
IMG_SIZE = 128

_PCM_SCALE = 32767.0


def validate_audio(samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float32)
    if samples.ndim != 1 or samples.shape[0] != AUDIO_LEN:
        raise InvalidInputError(f"audio clip must be a vector of {AUDIO_LEN} samples, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise InvalidInputError("audio clip contains non-finite samples")
    if samples.min() < -1.0 or samples.max() > 1.0:
        raise InvalidInputError("audio samples must lie in [-1, 1]")
    return samples


def validate_frames(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float32)
    if frames.shape != (FRAME_STEPS, FRAME_DIM):
        raise InvalidInputError(f"frame matrix must be {FRAME_STEPS}x{FRAME_DIM}, got {frames.shape}")
    return frames


def validate_image(pixels: np.ndarray) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=np.float32)
    if pixels.shape != (IMG_SIZE, IMG_SIZE, 3):
        raise InvalidInputError(f"image must be {IMG_SIZE}x{IMG_SIZE}x3, got {pixels.shape}")
    if not np.all(np.isfinite(pixels)):
        raise InvalidInputError("image contains non-finite values")
    if pixels.min() < 0.0 or pixels.max() > 1.0:
        raise InvalidInputError("image values must lie in [0, 1]")
    return pixels


def load_audio(path, target_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Load a WAV file as a canonical clip.

    The waveform is resampled to ``target_rate``, mixed down to mono,
    peak-normalized to [-1, 1], then truncated or tail-padded with zeros
    to exactly AUDIO_LEN samples.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:  # scipy raises ValueError on corrupt headers
        raise MediaIOError(f"cannot read WAV file {path}: {exc}") from exc

    data = np.asarray(data)
    if data.size == 0:
        raise InvalidInputError(f"zero-length audio in {path}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / _PCM_SCALE
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483647.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 127.0
    else:
        samples = data.astype(np.float64)
    if samples.ndim > 1:
        samples = samples.mean(axis=1)

    if rate != target_rate:
        g = np.gcd(int(rate), int(target_rate))
        samples = resample_poly(samples, target_rate // g, rate // g)

    peak = np.max(np.abs(samples)) if samples.size else 0.0
    if peak > 0:
        samples = samples / peak

    if samples.shape[0] >= AUDIO_LEN:
        samples = samples[:AUDIO_LEN]
    else:
        samples = np.pad(samples, (0, AUDIO_LEN - samples.shape[0]))
    return validate_audio(np.clip(samples, -1.0, 1.0).astype(np.float32))


def save_audio(samples: np.ndarray, path) -> None:
    """Write a clip as 16-bit PCM mono WAV at SAMPLE_RATE."""
    samples = validate_audio(samples)
    pcm = np.round(samples.astype(np.float64) * _PCM_SCALE).astype(np.int16)
    try:
        wavfile.write(Path(path), SAMPLE_RATE, pcm)
    except Exception as exc:
        raise MediaIOError(f"cannot write WAV file {path}: {exc}") from exc


def reshape_audio(samples: np.ndarray) -> np.ndarray:
    """Row-major reshape of an AUDIO_LEN clip into FRAME_STEPS x FRAME_DIM frames."""
    samples = validate_audio(samples)
    return samples.reshape(FRAME_STEPS, FRAME_DIM)


def flatten_frames(frames: np.ndarray) -> np.ndarray:
    """Inverse of reshape_audio (exact)."""
    frames = validate_frames(frames)
    return frames.reshape(AUDIO_LEN)


def load_image(path) -> np.ndarray:
    """Load an RGB raster, bilinearly rescale to IMG_SIZE, map to [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            if im.size != (IMG_SIZE, IMG_SIZE):
                im = im.resize((IMG_SIZE, IMG_SIZE), Image.BILINEAR)
            pixels = np.asarray(im, dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise
    except UnidentifiedImageError as exc:
        raise MediaIOError(f"cannot decode image {path}: {exc}") from exc
    return validate_image(pixels)


def save_image(pixels: np.ndarray, path) -> None:
    """Write an image as 8-bit-per-channel PNG (lossless)."""
    pixels = validate_image(pixels)
    data = np.round(pixels.astype(np.float64) * 255.0).astype(np.uint8)
    try:
        Image.fromarray(data, mode="RGB").save(Path(path), format="PNG")
    except (OSError, ValueError) as exc:
        raise MediaIOError(f"cannot write image {path}: {exc}") from exc
