"""Builders tying config sections to domain objects and the forward chain.

One simulation = phantom -> interference cubes -> three compressed camera
frames (signal plus the two single-arm DC references), with optional shot
noise and quantization.  Everything is a pure function of the resolved
config, so rerunning a config byte-reproduces the outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .containers import (
    CameraModel,
    CodedAperture,
    DepthGrid,
    Measurement,
    ReflectivityVolume,
    SpectralGrid,
    random_binary_mask,
)
from .interferometer import EncodedCubes, SourceSpectrum, encode_depth
from .noise import NoiseConfig, apply_shot_noise, quantize
from .phantoms import (
    bar_target,
    double_layer_target,
    glyph_layer,
    mirror_target,
    resolution_target,
    three_bar_group,
)
from .sensing import SensingOperator


def grid_from(cfg: dict) -> SpectralGrid:
    return SpectralGrid(
        center_wavelength_nm=float(cfg["center_wavelength_nm"]),
        channel_spacing_nm=float(cfg["channel_spacing_nm"]),
        num_channels=int(cfg["num_channels"]),
    )


def source_from(cfg: dict, grid: SpectralGrid) -> SourceSpectrum:
    return SourceSpectrum.gaussian(
        grid,
        fwhm_bandwidth_nm=float(cfg["fwhm_bandwidth_nm"]),
        reference_intensity=float(cfg["reference_intensity"]),
    )


def mask_from(cfg: dict, shape: tuple[int, int]) -> CodedAperture:
    return random_binary_mask(
        nx=shape[0],
        ny=shape[1],
        fill_fraction=float(cfg["fill_fraction"]),
        seed=int(cfg["seed"]),
        dispersion_step=int(cfg["dispersion_step"]),
    )


def camera_from(cfg: dict) -> CameraModel:
    return CameraModel(
        full_well_e=float(cfg["full_well_e"]),
        bit_depth=int(cfg["bit_depth"]),
        pixel_pitch_um=float(cfg["pixel_pitch_um"]),
        oversample_factor=int(cfg["oversample_factor"]),
    )


def solid_plate(shape, origin, size) -> np.ndarray:
    plate = np.zeros(shape)
    x0, y0 = origin
    plate[x0 : x0 + size, y0 : y0 + size] = 1.0
    return plate


def bar_plate(shape, origin, bar_width_px) -> np.ndarray:
    patch, _ = three_bar_group(int(bar_width_px), "vertical")
    plate = np.zeros(shape)
    x0, y0 = origin
    px, py = patch.shape
    if x0 + px > shape[0] or y0 + py > shape[1]:
        raise ConfigError("phantom plate does not fit the lateral field")
    plate[x0 : x0 + px, y0 : y0 + py] = patch
    return plate


def phantom_from(cfg: dict, shape: tuple[int, int], grid: SpectralGrid) -> ReflectivityVolume:
    """Build the configured phantom on the decode-aligned depth grid."""
    depth = DepthGrid.from_spectral(grid)
    dz = grid.depth_interval_um
    kind = cfg["kind"]
    if kind == "double_layer":
        # default layer depths scale with the grid: bins Nz/4 and ~Nz*5/8
        nz = depth.num_planes
        z1_bin = nz // 4
        z2_bin = min(nz - 1, z1_bin + max(1, round(0.375 * nz)))
        z1 = cfg["z1_um"] if cfg["z1_um"] is not None else z1_bin * dz
        z2 = cfg["z2_um"] if cfg["z2_um"] is not None else z2_bin * dz
        if cfg["plate_kind"] == "solid":
            plate = solid_plate(shape, cfg["plate_origin"], int(cfg["plate_size_px"]))
        elif cfg["plate_kind"] == "bars":
            plate = bar_plate(shape, cfg["plate_origin"], cfg["bar_width_px"])
        else:
            raise ConfigError(f"unknown plate_kind {cfg['plate_kind']!r}")
        return double_layer_target(
            shape,
            depth,
            z1_um=float(z1),
            z2_um=float(z2),
            lateral_stagger_px=int(cfg["lateral_stagger_px"]),
            pattern=plate,
            occlusion=bool(cfg["occlusion"]),
        )
    if kind == "glyph":
        return glyph_layer(
            cfg["text"],
            shape,
            plane_index=int(cfg["plane_index"]),
            depth=depth,
            offset=tuple(cfg["offset"]),
            rotation_deg=float(cfg["rotation_deg"]),
            scale=int(cfg["glyph_scale"]),
        )
    if kind == "mirror":
        if cfg["single_plane_grid"]:
            # one-plane grid at the target depth: the reference DC then counts
            # a single I_r instead of Nz copies (photon-budget experiments)
            plane_depth = DepthGrid(
                num_planes=1,
                plane_spacing_um=dz,
                origin_um=int(cfg["plane_index"]) * dz,
            )
            return mirror_target(
                shape, 0, plane_depth, reflectivity=float(cfg["reflectivity"])
            )
        return mirror_target(
            shape,
            int(cfg["plane_index"]),
            depth,
            reflectivity=float(cfg["reflectivity"]),
        )
    if kind == "bars":
        return bar_target(
            shape,
            period_px=int(cfg["period_px"]),
            orientation=cfg["orientation"],
            plane_index=int(cfg["plane_index"]),
            depth=depth,
        )
    if kind == "resolution_target":
        vol, _ = resolution_target(
            shape,
            bar_widths_px=[int(w) for w in cfg["bar_widths_px"]],
            plane_index=int(cfg["plane_index"]),
            depth=depth,
        )
        return vol
    raise ConfigError(f"unknown phantom kind {kind!r}")


@dataclass
class SimulationProducts:
    grid: SpectralGrid
    source: SourceSpectrum
    volume: ReflectivityVolume
    cubes: EncodedCubes
    mask: CodedAperture
    operator: SensingOperator
    camera: CameraModel
    measurement: Measurement
    photon_scale_e: float | None


def compress_frames(
    cubes: EncodedCubes,
    op: SensingOperator,
    camera: CameraModel,
    noise_cfg: dict,
) -> tuple[Measurement, float | None]:
    """Camera frames of the signal and the two DC references.

    With noise enabled, the photon scale must be given explicitly; the
    string ``full_well`` maps the brightest signal pixel to the camera full
    well (the compressed pixel holds a point's whole spectral signal, so
    this is the shot-noise-limited operating point).
    """
    frames = [
        op.forward(cubes.total.data),
        op.forward(cubes.dc_reference.data),
        op.forward(cubes.dc_sample.data),
    ]
    if not noise_cfg["enabled"]:
        return (
            Measurement(
                image=frames[0],
                dc_reference=frames[1],
                dc_sample=frames[2],
                camera=None,
            ),
            None,
        )
    scale_cfg = noise_cfg["photon_scale_e"]
    if scale_cfg is None:
        raise ConfigError(
            "noise.photon_scale_e is required when noise is enabled "
            "(a number, or 'full_well')"
        )
    if scale_cfg == "full_well":
        scale = camera.full_well_e / float(frames[0].max())
    else:
        scale = float(scale_cfg)
    seed = int(noise_cfg["seed"])
    noisy = []
    for i, frame in enumerate(frames):
        shot = apply_shot_noise(frame, NoiseConfig(photon_scale_e=scale, seed=seed * 3 + i))
        noisy.append(quantize(shot * scale, camera) / scale)
    return (
        Measurement(
            image=noisy[0], dc_reference=noisy[1], dc_sample=noisy[2], camera=None
        ),
        scale,
    )


def simulate(cfg: dict) -> SimulationProducts:
    """Run the full forward chain for one resolved ``simulate`` config."""
    shape = tuple(int(s) for s in cfg["lateral_shape"])
    grid = grid_from(cfg["grid"])
    source = source_from(cfg["source"], grid)
    volume = phantom_from(cfg["phantom"], shape, grid)
    cubes = encode_depth(volume, source)
    mask = mask_from(cfg["mask"], shape)
    op = SensingOperator(mask, num_channels=grid.num_channels)
    camera = camera_from(cfg["camera"])
    measurement, scale = compress_frames(cubes, op, camera, cfg["noise"])
    return SimulationProducts(
        grid=grid,
        source=source,
        volume=volume,
        cubes=cubes,
        mask=mask,
        operator=op,
        camera=camera,
        measurement=measurement,
        photon_scale_e=scale,
    )


def ac_measurement(m: Measurement) -> np.ndarray:
    """DC-subtracted measurement image ready for the solver."""
    if m.dc_reference is None or m.dc_sample is None:
        raise ValueError("measurement lacks DC reference frames")
    return m.image - m.dc_reference - m.dc_sample
