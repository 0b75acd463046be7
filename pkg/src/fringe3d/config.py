"""Run configuration: YAML files with explicit units in key names, strict
key checking (unknown keys are an error listing every offender), and
defaults resolved up front so the effective config can be echoed into run
manifests.
"""

from __future__ import annotations

import copy
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


# Default trees double as the key schema: a config key is legal iff it
# exists in the defaults (dicts recurse; "?" marks optional subtrees whose
# content is kind-dependent and validated by the consumer).

SIMULATE_DEFAULTS = {
    "lateral_shape": [64, 64],
    "grid": {
        "center_wavelength_nm": 830.0,
        "channel_spacing_nm": 0.1,
        "num_channels": 16,
    },
    "source": {"fwhm_bandwidth_nm": 1.0, "reference_intensity": 1.0},
    "phantom": {
        "kind": "double_layer",
        "z1_um": None,  # defaults to 2 depth bins
        "z2_um": None,  # defaults to 5 depth bins
        "lateral_stagger_px": 12,
        "occlusion": True,
        "plate_kind": "solid",
        "plate_origin": [14, 14],
        "plate_size_px": 28,
        "bar_width_px": 8,
        "text": "NOK",
        "offset": [2, 2],
        "rotation_deg": 0.0,
        "glyph_scale": 2,
        "plane_index": 2,
        "reflectivity": 1.0,
        "single_plane_grid": False,
        "period_px": 8,
        "orientation": "vertical",
        "bar_widths_px": [4, 3, 2, 1],
    },
    "mask": {"fill_fraction": 0.5, "seed": 7, "dispersion_step": 1},
    "camera": {
        "full_well_e": 30000.0,
        "bit_depth": 16,
        "pixel_pitch_um": 6.5,
        "oversample_factor": 1,
    },
    "noise": {"enabled": False, "photon_scale_e": None, "seed": 0},
}

SOLVER_DEFAULTS = {
    "lambda_tv": 0.04,
    "rho_wavelet": 0.005,
    "tau": 0.2,
    "eta": 0.2,
    "soft_threshold": None,
    "max_outer_iters": 100,
    "tv_inner_iters": 20,
    "wavelet_levels": 2,
    "tolerance": 0.0,
}

RECONSTRUCT_DEFAULTS = {
    "solver": dict(SOLVER_DEFAULTS),
    "save_state": False,
}

CHARACTERIZE_DEFAULTS = {
    "protocols": ["axial", "lateral", "sensitivity", "benchmark"],
    "axial": {
        "bandwidths_nm": [1.0, 1.5],
        "num_channels": 64,
        "lateral_shape": [32, 32],
        "plane_index": 12,
        "mask_seed": 5,
    },
    "lateral": {
        "cr_list": [4, 8, 16],
        "bar_widths_px": [4, 3, 2, 1],
        "lateral_shape": [64, 64],
        "mask_seed": 11,
        "noise_seed": 0,
    },
    "sensitivity": {
        "num_channels": 64,
        "lateral_shape": [32, 32],
        "plane_bin": 6,
        "fwhm_bandwidth_nm": 8.0,
        "seeds": [0, 1, 2],
        "floor_start_bin": 16,
        "full_well_e": 30000.0,
    },
    "benchmark": {
        "lateral_shape": [64, 64],
        "num_channels": 16,
        "mask_seed": 7,
        "stagger_px": 12,
    },
    "grid": {"center_wavelength_nm": 830.0, "channel_spacing_nm": 0.1},
    "solver": dict(SOLVER_DEFAULTS),
}

DATASET_DEFAULTS = {
    "count": 200,
    "val_fraction": 0.1,
    "lateral_shape": [64, 64],
    "grid": {
        "center_wavelength_nm": 830.0,
        "channel_spacing_nm": 0.1,
        "num_channels": 16,
    },
    # reference at 1/Nz balances the summed-over-planes reference DC against
    # the sample arm, keeping fringe contrast high at a fixed photon budget
    "source": {"fwhm_bandwidth_nm": 1.0, "reference_intensity": 0.125},
    "mask": {"fill_fraction": 0.5, "seed": 7, "dispersion_step": 1},
    "glyph": {"max_chars": 2, "scale": 2, "rotations": [0.0, 90.0, 180.0, 270.0]},
    "noise": {"enabled": True, "photon_scale_e": "full_well", "seed": 0,
              "realizations": 2},
    "camera": {
        "full_well_e": 30000.0,
        "bit_depth": 16,
        "pixel_pitch_um": 6.5,
        "oversample_factor": 1,
    },
    "pose_seed": 5,
}

_SECTION_DEFAULTS = {
    "simulate": SIMULATE_DEFAULTS,
    "reconstruct": RECONSTRUCT_DEFAULTS,
    "characterize": CHARACTERIZE_DEFAULTS,
    "dataset": DATASET_DEFAULTS,
}


def _collect_unknown(cfg, schema, prefix, unknown):
    for key, value in cfg.items():
        if key not in schema:
            unknown.append(f"{prefix}{key}")
        elif isinstance(value, dict) and isinstance(schema[key], dict):
            _collect_unknown(value, schema[key], f"{prefix}{key}.", unknown)


def _merge(defaults, overrides):
    out = copy.deepcopy(defaults)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_section(section: str, overrides: dict | None) -> dict:
    """Merge user overrides into the section defaults, rejecting unknown keys."""
    defaults = _SECTION_DEFAULTS[section]
    overrides = overrides or {}
    if not isinstance(overrides, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    unknown: list[str] = []
    _collect_unknown(overrides, defaults, f"{section}.", unknown)
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(sorted(unknown)))
    return _merge(defaults, overrides)


def load_config(path, section: str) -> dict:
    """Load a YAML config file and resolve one command section.

    The file may hold several sections (one per command); a file without the
    requested section resolves to pure defaults.
    """
    raw = {}
    if path is not None:
        text = Path(path).read_text()
        raw = yaml.safe_load(text) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        stray = sorted(set(raw) - set(_SECTION_DEFAULTS))
        if stray:
            raise ConfigError("unknown config sections: " + ", ".join(stray))
    return resolve_section(section, raw.get(section))


def dump_manifest(path, manifest: dict) -> None:
    """Deterministic manifest dump (sorted keys, no timestamps)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(manifest, f, sort_keys=True, default_flow_style=False)


def load_manifest(path) -> dict:
    with open(path) as f:
        return yaml.safe_load(f)
