"""Interferometric depth encoding and Fourier depth decoding.

A broadband two-beam interferometer turns the reflectivity profile along z
into spectral fringes: for reference intensity ``I_r`` and reflectivity
``I_s(z)`` the recorded intensity per wavenumber k sums, over the depth grid,

    I_r + I_s(z) + 2 sqrt(I_r I_s(z)) cos(2 z k),

the factor 2 in the phase coming from the reflection round trip (reference
plane at z = 0).  The cosine term (the AC signal) makes z and k a Fourier
pair, so the inverse transform along the spectral axis recovers
sqrt(I_s(z)) up to a mirror image that is discarded by keeping the
positive-z half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .containers import (
    AC_ONLY,
    TOTAL_INTENSITY,
    DepthGrid,
    NM_PER_UM,
    ReflectivityVolume,
    SpectralCube,
    SpectralGrid,
    ValidationError,
)


class EncodingError(ValueError):
    pass


# -- closed-form system evaluators -------------------------------------------


def _require_positive(**values: float) -> None:
    for name, v in values.items():
        if not v > 0:
            raise ValueError(f"{name} must be > 0, got {v}")


def axial_resolution_um(center_wavelength_nm: float, fwhm_bandwidth_nm: float) -> float:
    """Depth resolution 0.44 * lc^2 / bandwidth for a Gaussian source."""
    _require_positive(
        center_wavelength_nm=center_wavelength_nm, fwhm_bandwidth_nm=fwhm_bandwidth_nm
    )
    return 0.44 * center_wavelength_nm**2 / fwhm_bandwidth_nm / NM_PER_UM


def axial_fov_mm(center_wavelength_nm: float, channel_spacing_nm: float) -> float:
    """Maximum unambiguous depth lc^2 / (4 * spectral sampling interval)."""
    _require_positive(
        center_wavelength_nm=center_wavelength_nm,
        channel_spacing_nm=channel_spacing_nm,
    )
    return center_wavelength_nm**2 / (4.0 * channel_spacing_nm) * 1e-6


def spectral_resolution_nm(
    pixel_pitch_um: float, grating_constant_um: float, focal_length_mm: float
) -> float:
    """Spectral sampling interval pitch * grating constant / focal length."""
    _require_positive(
        pixel_pitch_um=pixel_pitch_um,
        grating_constant_um=grating_constant_um,
        focal_length_mm=focal_length_mm,
    )
    # um * um / mm comes out in nm directly
    return pixel_pitch_um * grating_constant_um / focal_length_mm


def theoretical_sensitivity_db(full_well_e: float) -> float:
    """Shot-noise-limited sensitivity 10 log10(FWC): the whole spectral signal
    of one object point lands on a single camera pixel."""
    _require_positive(full_well_e=full_well_e)
    return 10.0 * math.log10(full_well_e)


def depth_interval_um(center_wavelength_nm: float, spectral_width_nm: float) -> float:
    """Axial sampling interval lc^2 / (2 * reconstructed spectral width)."""
    _require_positive(
        center_wavelength_nm=center_wavelength_nm, spectral_width_nm=spectral_width_nm
    )
    return center_wavelength_nm**2 / (2.0 * spectral_width_nm) / NM_PER_UM


# -- source model -------------------------------------------------------------


@dataclass(frozen=True)
class SourceSpectrum:
    """Broadband source: spectral grid, per-channel envelope (max 1) and the
    reference-beam intensity (scalar or (Nx, Ny) field)."""

    grid: SpectralGrid
    fwhm_bandwidth_nm: float
    envelope: np.ndarray
    reference_intensity: Union[float, np.ndarray] = 1.0

    def __post_init__(self):
        if not self.fwhm_bandwidth_nm > 0:
            raise ValidationError("SourceSpectrum: fwhm_bandwidth must be > 0")
        env = np.asarray(self.envelope, dtype=np.float64)
        if env.shape != (self.grid.num_channels,):
            raise ValidationError("SourceSpectrum: envelope length != num_channels")
        if np.any(env < 0) or not np.all(np.isfinite(env)):
            raise ValidationError("SourceSpectrum: envelope must be finite and >= 0")
        peak = env.max()
        if peak <= 0:
            raise ValidationError("SourceSpectrum: envelope must not be all zero")
        env = env / peak
        env.setflags(write=False)
        object.__setattr__(self, "envelope", env)
        ref = self.reference_intensity
        if isinstance(ref, np.ndarray):
            if np.any(ref < 0):
                raise ValidationError("SourceSpectrum: reference intensity must be >= 0")
        elif ref < 0:
            raise ValidationError("SourceSpectrum: reference intensity must be >= 0")

    @classmethod
    def gaussian(
        cls,
        grid: SpectralGrid,
        fwhm_bandwidth_nm: float = 20.0,
        reference_intensity: Union[float, np.ndarray] = 1.0,
    ) -> "SourceSpectrum":
        lam = grid.wavelengths_nm
        offset = lam - grid.center_wavelength_nm
        env = np.exp(-4.0 * math.log(2.0) * (offset / fwhm_bandwidth_nm) ** 2)
        return cls(
            grid=grid,
            fwhm_bandwidth_nm=fwhm_bandwidth_nm,
            envelope=env,
            reference_intensity=reference_intensity,
        )


DEFAULT_CENTER_WAVELENGTH_NM = 830.0
DEFAULT_FWHM_BANDWIDTH_NM = 20.0


@dataclass(frozen=True)
class EncodedCubes:
    """Output of encode_depth: the total-intensity cube, its AC part, and the
    two DC cubes measured by blocking one interferometer arm."""

    total: SpectralCube
    ac: SpectralCube
    dc_reference: SpectralCube
    dc_sample: SpectralCube


def encode_depth(volume: ReflectivityVolume, source: SourceSpectrum) -> EncodedCubes:
    """Synthesize the spectral interference cubes of a reflectivity volume.

    Sums the two-beam interference law over the discrete depth grid for each
    lateral pixel; all terms are windowed by the source envelope.  Depth
    planes must sit inside the axial field of view of the spectral grid,
    otherwise fringes alias.
    """
    grid = source.grid
    z_um = volume.depth.planes_um
    if np.any(z_um < 0):
        raise EncodingError("negative depth plane")
    fov_um = grid.axial_fov_um
    if z_um.max() >= fov_um:
        raise EncodingError(
            f"depth {z_um.max():.1f} um exceeds the axial field of view "
            f"{fov_um:.1f} um (aliasing hazard)"
        )

    k = grid.wavenumbers_rad_per_nm  # (Nl,)
    z_nm = z_um * NM_PER_UM
    # phase of the round trip: 2 * z * k
    cos_table = np.cos(2.0 * np.outer(z_nm, k))  # (Nz, Nl)

    i_s = volume.data  # (Nx, Ny, Nz)
    i_r = np.asarray(source.reference_intensity, dtype=np.float64)
    if i_r.ndim == 0:
        i_r = np.full(i_s.shape[:2], float(i_r))
    elif i_r.shape != i_s.shape[:2]:
        raise EncodingError("reference intensity field does not match lateral dims")

    env = source.envelope
    amp = 2.0 * np.sqrt(i_r[:, :, None] * i_s)  # (Nx, Ny, Nz)
    ac = np.einsum("xyz,zj->xyj", amp, cos_table) * env
    nz = volume.depth.num_planes
    dc_ref = (nz * i_r)[:, :, None] * env
    dc_sam = i_s.sum(axis=2)[:, :, None] * env

    total = dc_ref + dc_sam + ac
    return EncodedCubes(
        total=SpectralCube(data=total, grid=grid, kind=TOTAL_INTENSITY),
        ac=SpectralCube(data=ac, grid=grid, kind=AC_ONLY),
        dc_reference=SpectralCube(data=dc_ref, grid=grid, kind=TOTAL_INTENSITY),
        dc_sample=SpectralCube(data=dc_sam, grid=grid, kind=TOTAL_INTENSITY),
    )


def subtract_dc(total: np.ndarray, dc_reference: np.ndarray, dc_sample: np.ndarray):
    """Elementwise ``total - dc_reference - dc_sample`` for same-shape arrays."""
    t = np.asarray(total, dtype=np.float64)
    r = np.asarray(dc_reference, dtype=np.float64)
    s = np.asarray(dc_sample, dtype=np.float64)
    if t.shape != r.shape or t.shape != s.shape:
        raise ValueError(
            f"subtract_dc: shape mismatch {t.shape} vs {r.shape} vs {s.shape}"
        )
    return t - r - s


def subtract_dc_cube(cube: SpectralCube, dc_reference: SpectralCube,
                     dc_sample: SpectralCube) -> SpectralCube:
    ac = subtract_dc(cube.data, dc_reference.data, dc_sample.data)
    return SpectralCube(data=ac, grid=cube.grid, kind=AC_ONLY)


@dataclass(frozen=True)
class DecodedVolume:
    """Decoded depth amplitudes (unbounded, nonnegative) on a DepthGrid."""

    data: np.ndarray
    depth: DepthGrid

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    def axial_profile(self) -> np.ndarray:
        """Transversely averaged 1D depth profile."""
        return self.data.mean(axis=(0, 1))


def decode_depth(ac: SpectralCube) -> DecodedVolume:
    """Inverse Fourier transform along the spectral axis, magnitude taken,
    keeping the positive-z half of the (symmetric) depth spectrum.

    Returns N/2 depth planes spaced at the grid's axial sampling interval;
    bin m corresponds to z = m * interval with the zero-delay plane at bin 0.
    """
    if ac.kind != AC_ONLY:
        raise ValueError("decode_depth expects an ac_only cube (subtract DC first)")
    nl = ac.grid.num_channels
    nz = max(nl // 2, 1)
    spectrum = np.fft.ifft(ac.data, axis=2)
    amplitude = np.abs(spectrum[:, :, :nz])
    return DecodedVolume(
        data=amplitude, depth=DepthGrid.from_spectral(ac.grid)
    )
