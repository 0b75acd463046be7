"""Measurement noise: shot noise, sensor-grid discretization, illumination
non-uniformity, and camera quantization.

Shot noise uses a Philox (counter-based) generator keyed by the config seed,
so a fixed seed gives bit-identical output regardless of thread count.
numpy's Poisson sampler is exact at all means (inversion at small mean,
transformed rejection above), which matters at the low photon fluxes used
for sensitivity experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .containers import CameraModel, ValidationError


@dataclass(frozen=True)
class NoiseConfig:
    """Knobs of the three simulated noise mechanisms.

    photon_scale_e is the electron count of one intensity unit; the shot
    noise floor then matches a camera whose full well maps to the full-scale
    intensity.  There is no silent default: experiments must state their
    photon budget.
    """

    photon_scale_e: float
    seed: int = 0
    illumination_field: Optional[np.ndarray] = None
    oversample_factor: int = 1

    def __post_init__(self):
        if not self.photon_scale_e > 0:
            raise ValidationError("NoiseConfig: photon_scale_e must be > 0")
        if self.oversample_factor < 1:
            raise ValidationError("NoiseConfig: oversample_factor must be >= 1")
        if self.illumination_field is not None:
            gain = np.asarray(self.illumination_field, dtype=np.float64)
            if np.any(gain <= 0) or np.any(gain > 1):
                raise ValidationError(
                    "NoiseConfig: illumination gain entries must lie in (0, 1]"
                )
            gain.setflags(write=False)
            object.__setattr__(self, "illumination_field", gain)


def apply_shot_noise(image: np.ndarray, cfg: NoiseConfig) -> np.ndarray:
    """Poisson resampling of each pixel at the configured photon scale."""
    img = np.asarray(image, dtype=np.float64)
    if np.any(img < 0):
        raise ValueError("apply_shot_noise: negative input pixel")
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    return rng.poisson(cfg.photon_scale_e * img).astype(np.float64) / cfg.photon_scale_e


def apply_discretization(fine_image: np.ndarray, cfg: NoiseConfig) -> np.ndarray:
    """Block-average an oversampled image down to the sensor grid."""
    f = int(cfg.oversample_factor)
    img = np.asarray(fine_image, dtype=np.float64)
    if f == 1:
        return img.copy()
    h, w = img.shape
    if h % f or w % f:
        raise ValueError(
            f"apply_discretization: dims {img.shape} not divisible by {f}"
        )
    return img.reshape(h // f, f, w // f, f).mean(axis=(1, 3))


def apply_illumination(data: np.ndarray, cfg: NoiseConfig) -> np.ndarray:
    """Multiply by the lateral illumination gain map (broadcast along any
    trailing spectral/depth axis).  Unit gain when no field is configured."""
    arr = np.asarray(data, dtype=np.float64)
    if cfg.illumination_field is None:
        return arr.copy()
    gain = cfg.illumination_field
    if arr.shape[:2] != gain.shape:
        raise ValueError(
            f"apply_illumination: lateral dims {arr.shape[:2]} != gain {gain.shape}"
        )
    if arr.ndim == 2:
        return arr * gain
    return arr * gain[(...,) + (None,) * (arr.ndim - 2)]


def quantize(image: np.ndarray, camera: CameraModel) -> np.ndarray:
    """Clip to [0, full well] and round to the camera's 2^bit_depth steps."""
    img = np.asarray(image, dtype=np.float64)
    fwc = camera.full_well_e
    levels = float(2**camera.bit_depth)
    clipped = np.clip(img, 0.0, fwc)
    return np.round(clipped * levels / fwc) * (fwc / levels)
