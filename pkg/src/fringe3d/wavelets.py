"""Separable orthonormal Haar transform for 3D cubes.

Classic Mallat pyramid: one decomposition level transforms the current
approximation block along every axis; the next level recurses on the
low-low-low corner.  Coefficients are packed in place (same array shape),
so coefficient and signal norms agree exactly (orthonormal steps only).

Axes whose current block length is odd stop decomposing; the per-axis level
counts actually applied are returned and required for inversion.  This keeps
the transform exactly orthonormal for every shape instead of padding.
"""

from __future__ import annotations

import numpy as np

_SQRT2 = np.sqrt(2.0)


def max_levels(n: int, requested: int) -> int:
    """Number of halvings of n possible, capped at the requested level count."""
    levels = 0
    while levels < requested and n % 2 == 0 and n >= 2:
        n //= 2
        levels += 1
    return levels


def _fwd_axis(block: np.ndarray, axis: int) -> None:
    x = np.moveaxis(block, axis, 0)
    even = x[0::2].copy()
    odd = x[1::2].copy()
    half = x.shape[0] // 2
    x[:half] = (even + odd) / _SQRT2
    x[half:] = (even - odd) / _SQRT2


def _inv_axis(block: np.ndarray, axis: int) -> None:
    x = np.moveaxis(block, axis, 0)
    half = x.shape[0] // 2
    a = x[:half].copy()
    d = x[half:].copy()
    x[0::2] = (a + d) / _SQRT2
    x[1::2] = (a - d) / _SQRT2


def haar_forward(cube: np.ndarray, levels: int) -> tuple[np.ndarray, tuple[int, ...]]:
    """Multi-level 3D Haar decomposition.

    Returns the packed coefficient array (same shape as the input) and the
    per-axis level counts actually applied.
    """
    out = np.array(cube, dtype=np.float64, copy=True)
    applied = tuple(max_levels(n, levels) for n in out.shape)
    total = max(applied) if applied else 0
    sizes = list(out.shape)
    for lev in range(total):
        sl = tuple(slice(0, s) for s in sizes)
        block = out[sl]
        for axis in range(out.ndim):
            if lev < applied[axis]:
                _fwd_axis(block, axis)
        for axis in range(out.ndim):
            if lev < applied[axis]:
                sizes[axis] //= 2
    return out, applied


def haar_inverse(coeffs: np.ndarray, applied: tuple[int, ...]) -> np.ndarray:
    """Inverse of :func:`haar_forward` given the applied per-axis levels."""
    out = np.array(coeffs, dtype=np.float64, copy=True)
    total = max(applied) if applied else 0
    for lev in range(total - 1, -1, -1):
        # block extent at this level: each axis was halved min(lev, applied) times
        sizes = [
            n >> min(lev, applied[axis]) for axis, n in enumerate(out.shape)
        ]
        block = out[tuple(slice(0, s) for s in sizes)]
        for axis in range(out.ndim - 1, -1, -1):
            if lev < applied[axis]:
                _inv_axis(block, axis)
    return out
