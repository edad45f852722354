"""Parameterized marked-image attacks: cutout and small-angle rotation."""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .media_io import validate_image

MAX_CUTOUT_FRACTION = 0.9
MAX_ROTATION_DEGREES = 6.0
CUTOUT_SIDE_MIN = 8
CUTOUT_SIDE_MAX = 48


@dataclass(frozen=True)
class DistortionSpec:
    """One attack instance: kind selects which parameter is read."""

    kind: str = "none"  # "cutout" | "rotation" | "none"
    cutout_fraction: float = 0.0
    rotation_degrees: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("cutout", "rotation", "none"):
            raise InvalidInputError(f"unknown distortion kind {self.kind!r}")
        if not 0.0 <= self.cutout_fraction <= MAX_CUTOUT_FRACTION:
            raise InvalidInputError(f"cutout fraction {self.cutout_fraction} outside [0, {MAX_CUTOUT_FRACTION}]")
        if abs(self.rotation_degrees) > MAX_ROTATION_DEGREES:
            raise InvalidInputError(f"rotation {self.rotation_degrees} outside +-{MAX_ROTATION_DEGREES} degrees")

    @property
    def parameter(self) -> float:
        if self.kind == "cutout":
            return self.cutout_fraction
        if self.kind == "rotation":
            return self.rotation_degrees
        return 0.0


def cutout(image: np.ndarray, fraction: float, seed: int = 0) -> np.ndarray:
    """Zero random axis-aligned rectangles until >= fraction of pixels are removed.

    Unique zeroed pixels are counted (overlaps are not double-counted), and the
    last rectangle is grown row by row so the overshoot is below one rectangle
    row (< 0.3% of the image). Deterministic for a fixed seed.
    """
    image = validate_image(image)
    if not 0.0 <= fraction <= MAX_CUTOUT_FRACTION:
        raise InvalidInputError(f"cutout fraction {fraction} outside [0, {MAX_CUTOUT_FRACTION}]")
    out = image.copy()
    if fraction == 0.0:
        return out

    h, w = image.shape[:2]
    target = int(np.ceil(fraction * h * w))
    rng = np.random.default_rng(seed)
    mask = np.zeros((h, w), dtype=bool)
    count = 0
    while count < target:
        rh = int(rng.integers(CUTOUT_SIDE_MIN, CUTOUT_SIDE_MAX + 1))
        rw = int(rng.integers(CUTOUT_SIDE_MIN, CUTOUT_SIDE_MAX + 1))
        y0 = int(rng.integers(0, h - rh + 1))
        x0 = int(rng.integers(0, w - rw + 1))
        for row in range(y0, y0 + rh):
            fresh = int(np.count_nonzero(~mask[row, x0 : x0 + rw]))
            mask[row, x0 : x0 + rw] = True
            count += fresh
            if count >= target:
                break
    out[mask] = 0.0
    return out


def rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the image center with bilinear interpolation, zero fill.

    Zero degrees is an exact identity.
    """
    image = validate_image(image)
    if abs(degrees) > MAX_ROTATION_DEGREES:
        raise InvalidInputError(f"rotation {degrees} outside +-{MAX_ROTATION_DEGREES} degrees")
    if degrees == 0.0:
        return image.copy()
    out = ndimage.rotate(image, degrees, axes=(0, 1), reshape=False, order=1, mode="constant", cval=0.0)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def apply_distortion(image: np.ndarray, spec: DistortionSpec) -> np.ndarray:
    if spec.kind == "cutout":
        return cutout(image, spec.cutout_fraction, spec.seed)
    if spec.kind == "rotation":
        return rotate(image, spec.rotation_degrees)
    return validate_image(image).copy()
