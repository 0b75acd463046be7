"""Evaluation protocols: lateral resolution by the 20% dip criterion, axial
resolution by Gaussian-fit FWHM, sensitivity as peak over noise-floor, and
PSNR/RMSE utilities.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .interferometer import DecodedVolume
from .phantoms import BarGroup

DIP_THRESHOLD = 0.2
FWHM_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class FitError(RuntimeError):
    pass


# -- lateral resolution ------------------------------------------------------


def bar_profile(plane: np.ndarray, group: BarGroup) -> np.ndarray:
    """1D intensity profile across the bars, averaged over the full bar
    length (the averaging window convention used throughout)."""
    x0, x1, y0, y1 = group.region
    patch = plane[x0:x1, y0:y1]
    if group.orientation == "vertical":
        return patch.mean(axis=0)
    return patch.mean(axis=1)


def group_dip(plane: np.ndarray, group: BarGroup) -> float:
    """Mean relative dip between adjacent bar peaks; <= 0 when bars merge."""
    profile = bar_profile(plane, group)
    dips = []
    for i, gap in enumerate(group.gap_centers):
        peak = 0.5 * (profile[group.bar_centers[i]] + profile[group.bar_centers[i + 1]])
        if peak <= 0:
            return 0.0
        dips.append((peak - profile[gap]) / peak)
    return float(np.mean(dips))


def lateral_resolution(
    plane: np.ndarray, groups: Sequence[BarGroup]
) -> Optional[int]:
    """Finest resolvable bar period in pixels under the >= 20% dip criterion,
    or None when no group resolves.  Scale invariant (the dip is a ratio)."""
    resolvable = [
        g.period_px for g in groups if group_dip(plane, g) >= DIP_THRESHOLD
    ]
    return min(resolvable) if resolvable else None


# -- axial PSF ---------------------------------------------------------------


def _gaussian(t, amplitude, mean, sigma, baseline):
    return amplitude * np.exp(-((t - mean) ** 2) / (2.0 * sigma**2)) + baseline


def fit_gaussian_profile(profile: np.ndarray) -> tuple[np.ndarray, float]:
    """Fit amplitude/mean/sigma/baseline to a 1D profile.

    Initialization is a log-parabola through the three samples around the
    argmax, refined by damped least squares; raises FitError when R^2 < 0.9.
    Returns (parameters, r_squared).
    """
    y = np.asarray(profile, dtype=np.float64)
    n = y.size
    if n < 4:
        raise FitError("profile too short for a Gaussian fit")
    t = np.arange(n, dtype=np.float64)
    base = float(y.min())
    m = int(np.argmax(y))
    mc = min(max(m, 1), n - 2)
    window = y[mc - 1 : mc + 2] - base
    if np.all(window > 0):
        logs = np.log(window)
        denom = logs[0] - 2.0 * logs[1] + logs[2]
        if denom < 0:
            delta = 0.5 * (logs[0] - logs[2]) / denom
            sigma0 = math.sqrt(max(-1.0 / denom, 1e-6))
            mu0 = mc + delta
        else:
            sigma0, mu0 = 1.0, float(m)
    else:
        sigma0, mu0 = 1.0, float(m)
    p0 = [max(y[m] - base, 1e-12), mu0, max(sigma0, 0.3), base]
    try:
        popt, _ = curve_fit(_gaussian, t, y, p0=p0, maxfev=10000)
    except RuntimeError as exc:
        raise FitError(f"Gaussian fit did not converge: {exc}") from exc
    popt[2] = abs(popt[2])
    residuals = y - _gaussian(t, *popt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        raise FitError("constant profile has no peak to fit")
    r2 = 1.0 - float((residuals**2).sum()) / ss_tot
    if r2 < 0.9:
        raise FitError(f"Gaussian fit quality too low (R^2 = {r2:.3f})")
    return popt, r2


def fwhm_of_profile(profile: np.ndarray, spacing_um: float) -> float:
    """FWHM (um) of the Gaussian fitted to a 1D axial profile."""
    popt, _ = fit_gaussian_profile(profile)
    return FWHM_SIGMA * float(popt[2]) * spacing_um


def axial_psf_fwhm(decoded: DecodedVolume) -> float:
    """Axial resolution from a single-plane mirror: transversely average the
    decoded volume, fit a Gaussian, return the FWHM in um."""
    return fwhm_of_profile(decoded.axial_profile(), decoded.depth.plane_spacing_um)


# -- sensitivity ----------------------------------------------------------------


def sensitivity_db(
    decoded: DecodedVolume,
    floor_bins: Optional[np.ndarray] = None,
) -> float:
    """20 log10(axial peak / noise-floor standard deviation).

    The peak is read off the transversely averaged axial profile; the floor
    standard deviation is computed over all voxels of the floor depth bins.
    Without an explicit region, floor bins are those at least 10 fitted
    FWHMs from the peak (usually only available at large channel counts).
    """
    profile = decoded.axial_profile()
    peak_bin = int(np.argmax(profile))
    peak = float(profile[peak_bin])
    nz = profile.size
    if floor_bins is None:
        popt, _ = fit_gaussian_profile(profile)
        fwhm_bins = FWHM_SIGMA * popt[2]
        dist = np.abs(np.arange(nz) - peak_bin)
        floor_bins = np.nonzero(dist >= 10.0 * fwhm_bins)[0]
    floor_bins = np.asarray(floor_bins, dtype=int)
    if floor_bins.size == 0:
        raise ValueError(
            "empty noise-floor region; pass floor_bins explicitly at small Nz"
        )
    if np.any(floor_bins == peak_bin):
        raise ValueError("noise-floor region must not contain the peak bin")
    sigma = float(decoded.data[:, :, floor_bins].std())
    if sigma == 0:
        raise ValueError("zero noise floor: sensitivity is unbounded")
    return 20.0 * math.log10(peak / sigma)


# -- fidelity -----------------------------------------------------------------


def rmse(recon: np.ndarray, truth: np.ndarray) -> float:
    a = np.asarray(recon, dtype=np.float64)
    b = np.asarray(truth, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(recon: np.ndarray, truth: np.ndarray) -> float:
    """Peak signal-to-noise ratio with peak = truth maximum; +inf for an
    exact reconstruction."""
    b = np.asarray(truth, dtype=np.float64)
    if b.max() == b.min():
        raise ValueError("psnr: truth must not be constant")
    err = rmse(recon, truth)
    if err == 0:
        return float("inf")
    return 20.0 * math.log10(float(b.max()) / err)
