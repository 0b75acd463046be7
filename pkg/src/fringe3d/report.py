"""Report figures rendered next to the delimited outputs.

All figures go through the Agg backend with fixed metadata so repeated runs
produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVEKW = dict(dpi=120, metadata={"Software": None})


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVEKW)
    plt.close(fig)
    return path


def residual_plot(residuals, path, objective=None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    it = np.arange(1, len(residuals) + 1)
    ax.semilogy(it, residuals, "-", color="tab:blue", label="relative residual")
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative residual")
    ax.grid(True, which="both", alpha=0.3)
    if objective is not None:
        ax2 = ax.twinx()
        ax2.semilogy(it, objective, "--", color="tab:orange", label="objective")
        ax2.set_ylabel("objective")
    fig.tight_layout()
    return _finish(fig, path)


def axial_profile_plot(profiles, path) -> Path:
    """profiles: list of (label, z_um, amplitude, fwhm_um or None)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, z_um, amp, fwhm in profiles:
        suffix = f" (FWHM {fwhm:.0f} um)" if fwhm else ""
        ax.plot(z_um, amp / max(np.max(amp), 1e-30), "-o", ms=3, label=label + suffix)
    ax.set_xlabel("depth (um)")
    ax.set_ylabel("normalized amplitude")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _finish(fig, path)


def bar_profile_plot(entries, path) -> Path:
    """entries: list of (label, profile array, dip value)."""
    fig, axes = plt.subplots(
        len(entries), 1, figsize=(6, 1.8 * len(entries)), squeeze=False
    )
    for ax, (label, profile, dip) in zip(axes[:, 0], entries):
        ax.plot(profile, "-o", ms=3)
        ax.set_ylabel(label, fontsize=8)
        ax.set_title(f"dip {dip:.0%}", fontsize=8, loc="right")
        ax.grid(alpha=0.3)
    axes[-1, 0].set_xlabel("pixels across bars")
    fig.tight_layout()
    return _finish(fig, path)


def metric_vs_cr_plot(rows, path, ylabel) -> Path:
    """rows: list of (cr, value)."""
    fig, ax = plt.subplots(figsize=(5, 4))
    crs = [r[0] for r in rows]
    vals = [r[1] for r in rows]
    ax.plot(crs, vals, "-s")
    ax.set_xlabel("compression ratio")
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _finish(fig, path)


def plane_montage(volume, path, cols=4, titles=None) -> Path:
    """Grid of x-y cross sections of a (Nx, Ny, Nz) volume."""
    nz = volume.shape[2]
    rows = (nz + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(2.2 * cols, 2.2 * rows), squeeze=False)
    vmax = max(float(np.max(volume)), 1e-30)
    for i in range(rows * cols):
        ax = axes[i // cols, i % cols]
        ax.axis("off")
        if i < nz:
            ax.imshow(volume[:, :, i], cmap="gray", vmin=0, vmax=vmax)
            ax.set_title(titles[i] if titles else f"z bin {i}", fontsize=7)
    fig.tight_layout()
    return _finish(fig, path)
