"""Core domain types: grids, volumes, cubes, masks, measurements.

All containers are immutable after construction (arrays are set read-only)
and validated on construction.  Units are carried in field names:
wavelengths in nm, depths and pixel pitch in um.

Array memory layout convention (used by every file format in this package):
C order with axes (x, y[, lambda|z]), i.e. the last axis varies fastest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

NM_PER_UM = 1000.0


class ValidationError(ValueError):
    """A container invariant was violated; the message names the invariant."""


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, order="C", copy=True)
    out.setflags(write=False)
    return out


def _require_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{what}: non-finite entry")


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform wavelength grid centered on the source wavelength.

    Channel j sits at ``center + (j - (N-1)/2) * spacing`` so the grid is
    symmetric about the center wavelength and strictly increasing.
    """

    center_wavelength_nm: float
    channel_spacing_nm: float
    num_channels: int

    def __post_init__(self):
        if self.num_channels < 1:
            raise ValidationError("SpectralGrid: num_channels must be >= 1")
        if not self.channel_spacing_nm > 0:
            raise ValidationError("SpectralGrid: channel_spacing must be > 0")
        if np.any(self.wavelengths_nm <= 0):
            raise ValidationError("SpectralGrid: all wavelengths must be > 0")

    @property
    def wavelengths_nm(self) -> np.ndarray:
        j = np.arange(self.num_channels, dtype=np.float64)
        lam = self.center_wavelength_nm + (
            j - (self.num_channels - 1) / 2.0
        ) * self.channel_spacing_nm
        lam.setflags(write=False)
        return lam

    @property
    def wavenumbers_rad_per_nm(self) -> np.ndarray:
        k = 2.0 * np.pi / self.wavelengths_nm
        k.setflags(write=False)
        return k

    @property
    def total_width_nm(self) -> float:
        """Reconstructed spectral width: num_channels * spacing."""
        return self.num_channels * self.channel_spacing_nm

    @property
    def depth_interval_um(self) -> float:
        """Axial sampling interval of the decoded volume: lc^2 / (2 * width)."""
        return self.center_wavelength_nm**2 / (2.0 * self.total_width_nm) / NM_PER_UM

    @property
    def axial_fov_um(self) -> float:
        """Maximum unambiguous depth: lc^2 / (4 * spacing)."""
        return self.center_wavelength_nm**2 / (4.0 * self.channel_spacing_nm) / NM_PER_UM


@dataclass(frozen=True)
class DepthGrid:
    """Uniform grid of axial planes, origin at the zero-delay reference plane."""

    num_planes: int
    plane_spacing_um: float
    origin_um: float = 0.0

    def __post_init__(self):
        if self.num_planes < 1:
            raise ValidationError("DepthGrid: num_planes must be >= 1")
        if not self.plane_spacing_um > 0:
            raise ValidationError("DepthGrid: plane_spacing must be > 0")
        if self.origin_um < 0:
            raise ValidationError("DepthGrid: plane coordinates must be >= 0")

    @property
    def planes_um(self) -> np.ndarray:
        z = self.origin_um + np.arange(self.num_planes) * self.plane_spacing_um
        z.setflags(write=False)
        return z

    @classmethod
    def from_spectral(cls, grid: SpectralGrid, origin_um: float = 0.0) -> "DepthGrid":
        """Decoded-volume grid for a spectral grid: Nz = N/2 planes at the
        axial sampling interval of the grid."""
        return cls(
            num_planes=max(grid.num_channels // 2, 1),
            plane_spacing_um=grid.depth_interval_um,
            origin_um=origin_um,
        )


@dataclass(frozen=True)
class ReflectivityVolume:
    """Nonnegative object reflectivity on an (x, y, z) grid, entries in [0, 1]."""

    data: np.ndarray
    depth: DepthGrid
    pixel_pitch_um: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))
        if self.data.ndim != 3:
            raise ValidationError("ReflectivityVolume: data must be 3D (x, y, z)")
        if self.data.shape[2] != self.depth.num_planes:
            raise ValidationError(
                "ReflectivityVolume: z extent does not match depth grid"
            )
        _require_finite(self.data, "ReflectivityVolume")
        if np.any(self.data < 0) or np.any(self.data > 1):
            raise ValidationError("ReflectivityVolume: entries must lie in [0, 1]")
        if not self.pixel_pitch_um > 0:
            raise ValidationError("ReflectivityVolume: pixel_pitch must be > 0")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


TOTAL_INTENSITY = "total_intensity"
AC_ONLY = "ac_only"


@dataclass(frozen=True)
class SpectralCube:
    """The (x, y, lambda) datacube; ``total_intensity`` is nonnegative,
    ``ac_only`` holds the signed interference term."""

    data: np.ndarray
    grid: SpectralGrid
    kind: str = TOTAL_INTENSITY

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))
        if self.kind not in (TOTAL_INTENSITY, AC_ONLY):
            raise ValidationError(f"SpectralCube: unknown kind {self.kind!r}")
        if self.data.ndim != 3:
            raise ValidationError("SpectralCube: data must be 3D (x, y, lambda)")
        if self.data.shape[2] != self.grid.num_channels:
            raise ValidationError(
                "SpectralCube: spectral extent does not match grid"
            )
        _require_finite(self.data, "SpectralCube")
        if self.kind == TOTAL_INTENSITY and np.any(self.data < 0):
            raise ValidationError("SpectralCube: total_intensity must be nonnegative")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class CodedAperture:
    """Coded mask at the native cube width plus the per-channel shift rule.

    The same physical pattern modulates every spectral channel before the
    dispersive shear, so in camera coordinates channel k is coded by a pure
    column translation of the pattern: it occupies columns
    ``[offset_k, offset_k + Ny)`` of the ``Ny + (Nl - 1)|step|`` wide
    measurement, with ``offset_k = step * k`` for positive
    ``dispersion_step`` (mirrored for negative step, so offsets always start
    at zero).  Columns shift toward +y for increasing wavelength when
    ``dispersion_step > 0``.
    """

    pattern: np.ndarray
    dispersion_step: int = 1

    def __post_init__(self):
        object.__setattr__(self, "pattern", _freeze(self.pattern))
        if self.pattern.ndim != 2:
            raise ValidationError("CodedAperture: pattern must be 2D")
        _require_finite(self.pattern, "CodedAperture")
        if np.any(self.pattern < 0) or np.any(self.pattern > 1):
            raise ValidationError("CodedAperture: entries must lie in [0, 1]")
        if int(self.dispersion_step) == 0:
            raise ValidationError("CodedAperture: dispersion_step must be nonzero")

    @property
    def cube_width(self) -> int:
        return self.pattern.shape[1]

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.pattern == 0) | (self.pattern == 1)))

    def channel_offsets(self, num_channels: int) -> np.ndarray:
        """Camera-frame column offset of each channel's translated code."""
        k = np.arange(num_channels)
        step = int(self.dispersion_step)
        if step > 0:
            off = step * k
        else:
            off = -step * (num_channels - 1 - k)
        return off

    def measurement_width(self, num_channels: int) -> int:
        return self.cube_width + (num_channels - 1) * abs(int(self.dispersion_step))

    def channel_code(self, k: int, num_channels: int) -> np.ndarray:
        """Camera-frame code of channel k: the pattern translated to its
        dispersion offset, zero outside (a pure column translation)."""
        width = self.measurement_width(num_channels)
        off = int(self.channel_offsets(num_channels)[k])
        code = np.zeros((self.pattern.shape[0], width))
        code[:, off : off + self.cube_width] = self.pattern
        return code


def random_binary_mask(
    nx: int,
    ny: int,
    fill_fraction: float = 0.5,
    seed: int = 0,
    dispersion_step: int = 1,
) -> CodedAperture:
    """Pseudo-random binary mask at the native cube width."""
    rng = np.random.default_rng(seed)
    pattern = (rng.random((nx, ny)) < fill_fraction).astype(np.float64)
    return CodedAperture(pattern=pattern, dispersion_step=dispersion_step)


@dataclass(frozen=True)
class CameraModel:
    """Detector parameters used by quantization and sensitivity accounting."""

    full_well_e: float = 30000.0
    bit_depth: int = 16
    pixel_pitch_um: float = 6.5
    oversample_factor: int = 1

    def __post_init__(self):
        if not self.full_well_e > 0:
            raise ValidationError("CameraModel: full_well_e must be > 0")
        if not 8 <= self.bit_depth <= 16:
            raise ValidationError("CameraModel: bit_depth must be in 8..16")
        if self.oversample_factor < 1:
            raise ValidationError("CameraModel: oversample_factor must be >= 1")
        if not self.pixel_pitch_um > 0:
            raise ValidationError("CameraModel: pixel_pitch must be > 0")


@dataclass(frozen=True)
class Measurement:
    """2D compressed camera image, optionally with the two DC reference frames.

    When ``camera`` is set the frames are raw camera data and must be
    nonnegative and below full well; DC-subtracted measurements are signed
    and carry ``camera=None``.
    """

    image: np.ndarray
    dc_reference: Optional[np.ndarray] = None
    dc_sample: Optional[np.ndarray] = None
    camera: Optional[CameraModel] = None

    def __post_init__(self):
        object.__setattr__(self, "image", _freeze(self.image))
        if self.image.ndim != 2:
            raise ValidationError("Measurement: image must be 2D")
        _require_finite(self.image, "Measurement.image")
        for name in ("dc_reference", "dc_sample"):
            frame = getattr(self, name)
            if frame is None:
                continue
            frame = _freeze(frame)
            object.__setattr__(self, name, frame)
            if frame.shape != self.image.shape:
                raise ValidationError(f"Measurement: {name} shape mismatch")
            _require_finite(frame, f"Measurement.{name}")
        if self.camera is not None:
            for name in ("image", "dc_reference", "dc_sample"):
                frame = getattr(self, name)
                if frame is None:
                    continue
                if np.any(frame < 0):
                    raise ValidationError(
                        f"Measurement: raw {name} must be nonnegative"
                    )
                if np.any(frame > self.camera.full_well_e):
                    raise ValidationError(
                        f"Measurement: raw {name} exceeds full well capacity"
                    )

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape


def validate(obj) -> None:
    """Re-run a container's invariant checks; raises ValidationError on failure.

    Constructors validate eagerly, so this is mainly useful after manual
    array surgery or direct deserialization.
    """
    if isinstance(
        obj,
        (
            SpectralGrid,
            DepthGrid,
            ReflectivityVolume,
            SpectralCube,
            CodedAperture,
            CameraModel,
            Measurement,
        ),
    ):
        obj.__post_init__()
    else:
        raise TypeError(f"validate: unsupported type {type(obj).__name__}")
