"""Deterministic test objects: bar targets, glyph layers, layered plates.

All generators return validated ReflectivityVolumes and are pure functions
of their arguments (glyph rasters come from an embedded 5x7 bitmap font, so
output is identical across platforms).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import ndimage

from .containers import DepthGrid, ReflectivityVolume, ValidationError

# Classic 5x7 dot-matrix font; 7 rows per glyph, bit 4 = leftmost column.
_FONT_5X7 = {
    "0": (0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E),
    "1": (0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "2": (0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F),
    "3": (0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E),
    "4": (0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02),
    "5": (0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E),
    "6": (0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E),
    "7": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08),
    "8": (0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E),
    "9": (0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C),
    "A": (0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11),
    "B": (0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E),
    "C": (0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E),
    "D": (0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C),
    "E": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F),
    "F": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10),
    "G": (0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F),
    "H": (0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11),
    "I": (0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "J": (0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C),
    "K": (0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11),
    "L": (0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F),
    "M": (0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11),
    "N": (0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11),
    "O": (0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "P": (0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10),
    "Q": (0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D),
    "R": (0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11),
    "S": (0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E),
    "T": (0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04),
    "U": (0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "V": (0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04),
    "W": (0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A),
    "X": (0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11),
    "Y": (0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04),
    "Z": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F),
    " ": (0, 0, 0, 0, 0, 0, 0),
}

GLYPH_ALPHABET = "".join(sorted(c for c in _FONT_5X7 if c != " "))


class PhantomError(ValueError):
    pass


def _single_plane_volume(
    plane_image: np.ndarray,
    plane_index: int,
    depth: DepthGrid,
    pixel_pitch_um: float,
) -> ReflectivityVolume:
    nx, ny = plane_image.shape
    if not 0 <= plane_index < depth.num_planes:
        raise PhantomError(
            f"plane index {plane_index} outside depth grid (0..{depth.num_planes - 1})"
        )
    data = np.zeros((nx, ny, depth.num_planes))
    data[:, :, plane_index] = plane_image
    return ReflectivityVolume(data=data, depth=depth, pixel_pitch_um=pixel_pitch_um)


# -- bar targets ---------------------------------------------------------------


@dataclass(frozen=True)
class BarGroup:
    """Geometry of one bar group: enough for the dip criterion to locate bar
    peaks and the valleys between them without searching."""

    period_px: int
    orientation: str  # "vertical" bars vary along y; "horizontal" along x
    region: tuple[int, int, int, int]  # x0, x1, y0, y1 (half-open)
    bar_centers: tuple[int, ...]  # across-bar indices relative to region origin
    gap_centers: tuple[int, ...]


def bar_pattern(n: int, period_px: int) -> np.ndarray:
    """1D on/off pattern: first half of each period bright."""
    if period_px < 2:
        raise PhantomError("bar period must be >= 2 px")
    return (np.arange(n) % period_px < period_px / 2).astype(np.float64)


def bar_target(
    shape: tuple[int, int],
    period_px: int,
    orientation: str = "vertical",
    plane_index: int = 0,
    depth: Optional[DepthGrid] = None,
    pixel_pitch_um: float = 1.0,
) -> ReflectivityVolume:
    """Full-field binary bars of the given period on a single depth plane."""
    nx, ny = shape
    depth = depth or DepthGrid(num_planes=1, plane_spacing_um=1.0)
    if orientation == "vertical":
        plane = np.tile(bar_pattern(ny, period_px), (nx, 1))
    elif orientation == "horizontal":
        plane = np.tile(bar_pattern(nx, period_px)[:, None], (1, ny))
    else:
        raise PhantomError(f"unknown orientation {orientation!r}")
    return _single_plane_volume(plane, plane_index, depth, pixel_pitch_um)


def three_bar_group(
    bar_width_px: int, orientation: str = "vertical"
) -> tuple[np.ndarray, BarGroup]:
    """One three-bar element with the standard 5:1 bar length and one-bar
    gaps (the 1951 resolution-target element geometry)."""
    w = int(bar_width_px)
    if w < 1:
        raise PhantomError("bar width must be >= 1 px")
    length = 5 * w
    across = 5 * w  # bar, gap, bar, gap, bar
    tile = np.zeros((length, across))
    centers, gaps = [], []
    for b in range(3):
        start = 2 * b * w
        tile[:, start : start + w] = 1.0
        centers.append(start + w // 2)
        if b < 2:
            gaps.append(start + w + w // 2)
    if orientation == "vertical":
        patch = tile
    else:
        patch = tile.T
    group = BarGroup(
        period_px=2 * w,
        orientation=orientation,
        region=(0, patch.shape[0], 0, patch.shape[1]),
        bar_centers=tuple(centers),
        gap_centers=tuple(gaps),
    )
    return patch, group


def resolution_target(
    shape: tuple[int, int],
    bar_widths_px: Sequence[int],
    orientation: str = "vertical",
    plane_index: int = 0,
    depth: Optional[DepthGrid] = None,
    margin_px: int = 2,
    pixel_pitch_um: float = 1.0,
) -> tuple[ReflectivityVolume, list[BarGroup]]:
    """Several three-bar groups of decreasing width laid out side by side,
    with the placed geometry returned for the resolution metric."""
    nx, ny = shape
    plane = np.zeros(shape)
    groups: list[BarGroup] = []
    x0, y0 = margin_px, margin_px
    row_height = 0
    for w in bar_widths_px:
        patch, g = three_bar_group(w, orientation)
        px, py = patch.shape
        if y0 + py > ny - margin_px:  # wrap to next row
            y0 = margin_px
            x0 += row_height + margin_px
            row_height = 0
        if x0 + px > nx - margin_px or y0 + py > ny - margin_px:
            raise PhantomError(
                f"bar group of width {w}px does not fit the {shape} field"
            )
        plane[x0 : x0 + px, y0 : y0 + py] = patch
        groups.append(
            BarGroup(
                period_px=g.period_px,
                orientation=g.orientation,
                region=(x0, x0 + px, y0, y0 + py),
                bar_centers=g.bar_centers,
                gap_centers=g.gap_centers,
            )
        )
        row_height = max(row_height, px)
        y0 += py + margin_px
    depth = depth or DepthGrid(num_planes=1, plane_spacing_um=1.0)
    vol = _single_plane_volume(plane, plane_index, depth, pixel_pitch_um)
    return vol, groups


# -- glyph layers --------------------------------------------------------------


def render_text(text: str, scale: int = 2) -> np.ndarray:
    """Rasterize a string with the embedded 5x7 font at an integer scale."""
    text = text.upper()
    unknown = sorted({c for c in text if c not in _FONT_5X7})
    if unknown:
        raise PhantomError(f"glyphs not in the embedded font: {unknown}")
    if not text:
        return np.zeros((0, 0))
    rows, cols = 7, 6 * len(text) - 1  # one blank column between glyphs
    raster = np.zeros((rows, cols))
    for i, ch in enumerate(text):
        for r, bits in enumerate(_FONT_5X7[ch]):
            for c in range(5):
                if bits & (0x10 >> c):
                    raster[r, 6 * i + c] = 1.0
    return np.kron(raster, np.ones((scale, scale)))


def glyph_layer(
    text: str,
    shape: tuple[int, int],
    plane_index: int,
    depth: DepthGrid,
    offset: tuple[int, int] = (0, 0),
    rotation_deg: float = 0.0,
    scale: int = 2,
    pixel_pitch_um: float = 1.0,
) -> ReflectivityVolume:
    """Binary raster of a text at a pose, on one depth plane.

    Rotation uses nearest-neighbor resampling so the raster stays binary and
    the operation is its own inverse for multiples of 180 degrees.
    """
    nx, ny = shape
    raster = render_text(text, scale=scale)
    if rotation_deg % 360 != 0 and raster.size:
        raster = ndimage.rotate(
            raster, rotation_deg, reshape=True, order=0, mode="constant", cval=0.0
        )
        raster = (raster > 0.5).astype(np.float64)
    plane = np.zeros(shape)
    if raster.size:
        rx, ry = raster.shape
        ox, oy = offset
        if ox < 0 or oy < 0 or ox + rx > nx or oy + ry > ny:
            raise PhantomError(
                f"text {text!r} at offset {offset} does not fit field {shape}"
            )
        plane[ox : ox + rx, oy : oy + ry] = raster
    return _single_plane_volume(plane, plane_index, depth, pixel_pitch_um)


# -- layered plates --------------------------------------------------------------


def usaf_like_pattern(shape: tuple[int, int], bar_widths_px: Sequence[int] = (4, 3, 2)):
    """Composite plate with vertical and horizontal three-bar groups."""
    nx, ny = shape
    plane = np.zeros(shape)
    y0 = 1
    for w in bar_widths_px:
        for orientation in ("vertical", "horizontal"):
            patch, _ = three_bar_group(w, orientation)
            px, py = patch.shape
            if 1 + px > nx or y0 + py > ny:
                continue
            plane[1 : 1 + px, y0 : y0 + py] = patch
            y0 += py + 2
    return plane


def double_layer_target(
    shape: tuple[int, int],
    depth: DepthGrid,
    z1_um: float,
    z2_um: float,
    lateral_stagger_px: int = 0,
    pattern: Optional[np.ndarray] = None,
    occlusion: bool = True,
    pixel_pitch_um: float = 1.0,
) -> ReflectivityVolume:
    """Two copies of a patterned plate at two depths, laterally staggered.

    With occlusion on, the lower plate is dark wherever the upper plate
    blocks the illumination column (the shadow seen in stacked-target
    measurements).
    """
    if not (z2_um > z1_um >= 0):
        raise PhantomError("need z2 > z1 >= 0")
    planes = depth.planes_um
    if z2_um > planes[-1] + depth.plane_spacing_um / 2:
        raise PhantomError("z2 outside the depth grid")
    i1 = int(np.argmin(np.abs(planes - z1_um)))
    i2 = int(np.argmin(np.abs(planes - z2_um)))
    if i1 == i2:
        raise PhantomError("layers fall on the same depth plane")
    plate = usaf_like_pattern(shape) if pattern is None else np.asarray(pattern)
    if plate.shape != tuple(shape):
        raise PhantomError("pattern shape does not match the field")
    s = int(lateral_stagger_px)
    lower = np.roll(np.roll(plate, s, axis=0), s, axis=1)
    if occlusion:
        lower = np.where(plate > 0, 0.0, lower)
    data = np.zeros((shape[0], shape[1], depth.num_planes))
    data[:, :, i1] = plate
    data[:, :, i2] = lower
    return ReflectivityVolume(data=data, depth=depth, pixel_pitch_um=pixel_pitch_um)


def mirror_target(
    shape: tuple[int, int],
    plane_index: int,
    depth: DepthGrid,
    reflectivity: float = 1.0,
    pixel_pitch_um: float = 1.0,
) -> ReflectivityVolume:
    """Uniform reflector on a single plane (axial-PSF and sensitivity probe)."""
    plane = np.full(shape, float(reflectivity))
    return _single_plane_volume(plane, plane_index, depth, pixel_pitch_um)


# -- dataset poses ----------------------------------------------------------------


@dataclass(frozen=True)
class GlyphPose:
    text: str
    offset: tuple[int, int]
    rotation_deg: float
    plane_index: int


def sample_glyph_poses(
    count: int,
    shape: tuple[int, int],
    num_planes: int,
    seed: int,
    max_chars: int = 2,
    scale: int = 2,
    rotations: Sequence[float] = (0.0, 90.0, 180.0, 270.0),
) -> list[GlyphPose]:
    """Draw ``count`` distinct glyph poses on documented grids: uppercase
    alphanumeric strings, integer-pixel offsets, right-angle rotations and
    uniformly random depth planes."""
    rng = np.random.default_rng(seed)
    nx, ny = shape
    poses: list[GlyphPose] = []
    seen: set[tuple] = set()
    attempts = 0
    while len(poses) < count:
        attempts += 1
        if attempts > 200 * count:
            raise PhantomError("pose space exhausted; reduce count or grow the field")
        n_chars = int(rng.integers(1, max_chars + 1))
        text = "".join(rng.choice(list(GLYPH_ALPHABET), size=n_chars))
        rot = float(rotations[int(rng.integers(0, len(rotations)))])
        raster = render_text(text, scale=scale)
        if rot % 180 == 90:
            rx, ry = raster.shape[1], raster.shape[0]
        else:
            rx, ry = raster.shape
        if rx >= nx or ry >= ny:
            continue
        ox = int(rng.integers(0, nx - rx))
        oy = int(rng.integers(0, ny - ry))
        plane = int(rng.integers(0, num_planes))
        key = (text, ox, oy, rot, plane)
        if key in seen:
            continue
        seen.add(key)
        poses.append(
            GlyphPose(text=text, offset=(ox, oy), rotation_deg=rot, plane_index=plane)
        )
    return poses
