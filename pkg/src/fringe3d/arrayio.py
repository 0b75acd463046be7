"""File formats: raw array container with text sidecar, and 16-bit graymaps.

Container format ``raw-array-v1``
---------------------------------
``<name>.bin``  raw little-endian values, C order (last axis fastest).
``<name>.hdr``  plain-text sidecar, one ``key: value`` per line.  Required
keys: ``format``, ``dtype``, ``shape``, ``layout``.  Everything else (units,
grid parameters) is free-form metadata preserved on round trip.

Graymaps are binary PGM (P5) with maxval 65535, big-endian sample order as
the format requires.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .containers import (
    AC_ONLY,
    CodedAperture,
    DepthGrid,
    Measurement,
    ReflectivityVolume,
    SpectralCube,
    SpectralGrid,
    ValidationError,
)

FORMAT_NAME = "raw-array-v1"

_DTYPES = {
    "float64": "<f8",
    "float32": "<f4",
    "int64": "<i8",
    "int32": "<i4",
    "uint16": "<u2",
    "uint8": "|u1",
}


class ArrayIOError(IOError):
    pass


def _strip_suffix(path) -> Path:
    p = Path(path)
    if p.suffix in (".bin", ".hdr"):
        p = p.with_suffix("")
    return p


def write_array(path, array: np.ndarray, meta: dict | None = None) -> Path:
    """Write ``path.bin`` + ``path.hdr``; returns the base path."""
    base = _strip_suffix(path)
    arr = np.asarray(array)
    name = arr.dtype.name
    if name not in _DTYPES:
        arr = arr.astype(np.float64)
        name = "float64"
    payload = np.ascontiguousarray(arr).astype(_DTYPES[name], copy=False)
    lines = [
        f"format: {FORMAT_NAME}",
        f"dtype: {name}",
        "shape: " + " ".join(str(s) for s in arr.shape),
        "layout: C last-axis-fastest little-endian",
    ]
    for key in sorted(meta or {}):
        lines.append(f"{key}: {(meta or {})[key]}")
    base.parent.mkdir(parents=True, exist_ok=True)
    with open(base.with_suffix(".bin"), "wb") as f:
        f.write(payload.tobytes(order="C"))
    with open(base.with_suffix(".hdr"), "w") as f:
        f.write("\n".join(lines) + "\n")
    return base


def read_array(path) -> tuple[np.ndarray, dict]:
    """Read a ``raw-array-v1`` pair; returns (array, metadata)."""
    base = _strip_suffix(path)
    hdr = base.with_suffix(".hdr")
    if not hdr.exists():
        raise ArrayIOError(f"missing header sidecar: {hdr}")
    meta: dict[str, str] = {}
    for line in hdr.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(":")
        meta[key.strip()] = value.strip()
    if meta.get("format") != FORMAT_NAME:
        raise ArrayIOError(f"unsupported format {meta.get('format')!r} in {hdr}")
    dtype = meta.pop("dtype", "float64")
    if dtype not in _DTYPES:
        raise ArrayIOError(f"unsupported dtype {dtype!r} in {hdr}")
    shape = tuple(int(s) for s in meta.pop("shape", "").split())
    meta.pop("format", None)
    meta.pop("layout", None)
    raw = base.with_suffix(".bin").read_bytes()
    arr = np.frombuffer(raw, dtype=_DTYPES[dtype]).astype(dtype).reshape(shape)
    return arr, meta


# -- typed helpers -----------------------------------------------------------


def _grid_meta(grid: SpectralGrid) -> dict:
    return {
        "center_wavelength_nm": repr(grid.center_wavelength_nm),
        "channel_spacing_nm": repr(grid.channel_spacing_nm),
        "num_channels": grid.num_channels,
    }


def _grid_from_meta(meta: dict) -> SpectralGrid:
    return SpectralGrid(
        center_wavelength_nm=float(meta["center_wavelength_nm"]),
        channel_spacing_nm=float(meta["channel_spacing_nm"]),
        num_channels=int(meta["num_channels"]),
    )


def save_cube(path, cube: SpectralCube, extra: dict | None = None) -> Path:
    meta = {"contains": "spectral-cube", "axes": "x y lambda", "kind": cube.kind}
    meta.update(_grid_meta(cube.grid))
    meta.update(extra or {})
    return write_array(path, cube.data, meta)


def load_cube(path) -> SpectralCube:
    data, meta = read_array(path)
    if meta.get("contains") != "spectral-cube":
        raise ArrayIOError(f"{path}: not a spectral cube")
    return SpectralCube(data=data, grid=_grid_from_meta(meta), kind=meta["kind"])


def save_volume(path, vol: ReflectivityVolume, extra: dict | None = None) -> Path:
    meta = {
        "contains": "reflectivity-volume",
        "axes": "x y z",
        "num_planes": vol.depth.num_planes,
        "plane_spacing_um": repr(vol.depth.plane_spacing_um),
        "origin_um": repr(vol.depth.origin_um),
        "pixel_pitch_um": repr(vol.pixel_pitch_um),
    }
    meta.update(extra or {})
    return write_array(path, vol.data, meta)


def load_volume(path) -> ReflectivityVolume:
    data, meta = read_array(path)
    if meta.get("contains") != "reflectivity-volume":
        raise ArrayIOError(f"{path}: not a reflectivity volume")
    depth = DepthGrid(
        num_planes=int(meta["num_planes"]),
        plane_spacing_um=float(meta["plane_spacing_um"]),
        origin_um=float(meta["origin_um"]),
    )
    return ReflectivityVolume(
        data=data, depth=depth, pixel_pitch_um=float(meta["pixel_pitch_um"])
    )


def save_mask(path, mask: CodedAperture, extra: dict | None = None) -> Path:
    meta = {
        "contains": "coded-aperture",
        "axes": "x yshear",
        "dispersion_step": int(mask.dispersion_step),
    }
    meta.update(extra or {})
    return write_array(path, mask.pattern, meta)


def load_mask(path) -> CodedAperture:
    data, meta = read_array(path)
    if meta.get("contains") != "coded-aperture":
        raise ArrayIOError(f"{path}: not a coded aperture")
    return CodedAperture(pattern=data, dispersion_step=int(meta["dispersion_step"]))


def save_measurement(path, m: Measurement, extra: dict | None = None) -> Path:
    meta = {"contains": "measurement", "axes": "x yshear"}
    meta.update(extra or {})
    base = write_array(path, m.image, meta)
    for name in ("dc_reference", "dc_sample"):
        frame = getattr(m, name)
        if frame is not None:
            write_array(f"{base}_{name}", frame, {"contains": name})
    return base


def load_measurement(path, camera=None) -> Measurement:
    data, meta = read_array(path)
    if meta.get("contains") != "measurement":
        raise ArrayIOError(f"{path}: not a measurement")
    base = _strip_suffix(path)
    frames = {}
    for name in ("dc_reference", "dc_sample"):
        side = Path(f"{base}_{name}.hdr")
        if side.exists():
            frames[name], _ = read_array(f"{base}_{name}")
    return Measurement(image=data, camera=camera, **frames)


# -- 16-bit portable graymap -------------------------------------------------


def write_pgm16(path, image: np.ndarray) -> None:
    """Write a 2D array as binary PGM with maxval 65535 (big-endian samples)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ArrayIOError("write_pgm16: image must be 2D")
    if img.dtype != np.uint16:
        if np.any(img < 0) or np.any(img > 65535):
            raise ArrayIOError("write_pgm16: values outside uint16 range")
        img = np.round(img).astype(np.uint16)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(img.astype(">u2").tobytes(order="C"))


def read_pgm16(path) -> np.ndarray:
    """Read a binary PGM (maxval up to 65535) into a uint16 array."""
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ArrayIOError(f"{path}: not a binary PGM")
    # header = magic, width, height, maxval; comments allowed between tokens
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval > 65535:
        raise ArrayIOError(f"{path}: maxval {maxval} out of range")
    dtype = ">u2" if maxval > 255 else "|u1"
    img = np.frombuffer(raw[pos:], dtype=dtype, count=w * h).reshape(h, w)
    return img.astype(np.uint16)


def mask_to_pgm(path, mask: CodedAperture) -> None:
    write_pgm16(path, np.round(mask.pattern * 65535.0).astype(np.uint16))


def mask_from_pgm(path, dispersion_step: int = 1) -> CodedAperture:
    img = read_pgm16(path).astype(np.float64) / 65535.0
    return CodedAperture(pattern=img, dispersion_step=dispersion_step)
