"""Snapshot interferometric 3D imaging toolkit.

Depth is encoded into spectral interference fringes, compressed by a coded
aperture + dispersive shear + spectral sum into a single 2D measurement,
reconstructed by an ADMM solver with TV and wavelet priors, and decoded back
to depth by Fourier analysis along the spectral axis.

Set FRINGE3D_MAX_THREADS to cap BLAS/OpenMP thread counts; it must take
effect before numpy loads, hence the assignment below runs first.
"""

import os as _os

_cap = _os.environ.get("FRINGE3D_MAX_THREADS")
if _cap:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _cap)
del _os, _cap

from .containers import (
    CameraModel,
    CodedAperture,
    DepthGrid,
    Measurement,
    ReflectivityVolume,
    SpectralCube,
    SpectralGrid,
    ValidationError,
    random_binary_mask,
    validate,
)
from .interferometer import (
    DecodedVolume,
    EncodedCubes,
    SourceSpectrum,
    axial_fov_mm,
    axial_resolution_um,
    decode_depth,
    depth_interval_um,
    encode_depth,
    spectral_resolution_nm,
    subtract_dc,
    subtract_dc_cube,
    theoretical_sensitivity_db,
)
from .noise import NoiseConfig, apply_discretization, apply_illumination, apply_shot_noise, quantize
from .recon import SolverConfig, SolverState, solve, soft_threshold, tv_denoise, unshear, x_update
from .sensing import SensingOperator

__all__ = [
    "CameraModel",
    "CodedAperture",
    "DecodedVolume",
    "DepthGrid",
    "EncodedCubes",
    "Measurement",
    "NoiseConfig",
    "ReflectivityVolume",
    "SensingOperator",
    "SolverConfig",
    "SolverState",
    "SourceSpectrum",
    "SpectralCube",
    "SpectralGrid",
    "ValidationError",
    "apply_discretization",
    "apply_illumination",
    "apply_shot_noise",
    "axial_fov_mm",
    "axial_resolution_um",
    "decode_depth",
    "depth_interval_um",
    "encode_depth",
    "quantize",
    "random_binary_mask",
    "solve",
    "soft_threshold",
    "spectral_resolution_nm",
    "subtract_dc",
    "subtract_dc_cube",
    "theoretical_sensitivity_db",
    "tv_denoise",
    "unshear",
    "validate",
    "x_update",
]

__version__ = "0.1.0"
