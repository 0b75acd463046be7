import math

import numpy as np
import pytest

from fringe3d.containers import DepthGrid
from fringe3d.interferometer import DecodedVolume
from fringe3d.metrics import (
    FitError,
    axial_psf_fwhm,
    bar_profile,
    fwhm_of_profile,
    group_dip,
    lateral_resolution,
    psnr,
    rmse,
    sensitivity_db,
)
from fringe3d.phantoms import resolution_target


def make_decoded(profile, nx=4, ny=4, spacing=10.0, noise=None, seed=0):
    nz = len(profile)
    data = np.tile(np.asarray(profile, dtype=float), (nx, ny, 1))
    if noise is not None:
        data = data + noise * np.abs(np.random.default_rng(seed).standard_normal(data.shape))
    return DecodedVolume(data=data, depth=DepthGrid(num_planes=nz, plane_spacing_um=spacing))


class TestLateralResolution:
    def test_perfect_bars_fully_modulated(self):
        vol, groups = resolution_target((40, 40), bar_widths_px=[3, 2], depth=DepthGrid(1, 1.0))
        plane = vol.data[:, :, 0]
        for g in groups:
            assert group_dip(plane, g) == pytest.approx(1.0)
        assert lateral_resolution(plane, groups) == 4  # finest period present

    def test_constant_image_unresolved(self):
        _, groups = resolution_target((40, 40), bar_widths_px=[2], depth=DepthGrid(1, 1.0))
        assert lateral_resolution(np.full((40, 40), 0.5), groups) is None

    def test_scale_invariance(self):
        vol, groups = resolution_target((40, 40), bar_widths_px=[3, 2], depth=DepthGrid(1, 1.0))
        blur = vol.data[:, :, 0] * 0.4 + 0.1  # scaled, offset bars
        assert lateral_resolution(blur, groups) == lateral_resolution(
            10.0 * blur, groups
        )

    def test_dip_below_threshold_unresolvable(self):
        vol, groups = resolution_target((40, 40), bar_widths_px=[2], depth=DepthGrid(1, 1.0))
        g = groups[0]
        # fill the gaps to 90% of the bar level: dip 10% < 20%
        plane = vol.data[:, :, 0].copy()
        x0, x1, y0, y1 = g.region
        patch = plane[x0:x1, y0:y1]
        plane[x0:x1, y0:y1] = np.where(patch > 0, patch, 0.9)
        assert lateral_resolution(plane, groups) is None

    def test_profile_averages_full_bar_length(self):
        vol, groups = resolution_target((40, 40), bar_widths_px=[3], depth=DepthGrid(1, 1.0))
        g = groups[0]
        prof = bar_profile(vol.data[:, :, 0], g)
        x0, x1, y0, y1 = g.region
        assert prof == pytest.approx(vol.data[x0:x1, y0:y1, 0].mean(axis=0))


class TestAxialFwhm:
    def test_recovers_analytic_fwhm(self):
        spacing = 6.5
        fwhm_um = 13.0
        sigma_bins = fwhm_um / spacing / (2 * math.sqrt(2 * math.log(2)))
        z = np.arange(32)
        profile = 5.0 * np.exp(-((z - 11.3) ** 2) / (2 * sigma_bins**2))
        assert fwhm_of_profile(profile, spacing) == pytest.approx(fwhm_um, rel=0.01)

    def test_amplitude_and_shift_invariance(self):
        spacing = 8.0
        z = np.arange(64)
        base = np.exp(-((z - 20) ** 2) / (2 * 2.5**2))
        shifted = np.exp(-((z - 33) ** 2) / (2 * 2.5**2))
        a = fwhm_of_profile(base, spacing)
        b = fwhm_of_profile(7.0 * shifted, spacing)
        assert a == pytest.approx(b, rel=1e-6)

    def test_volume_entry_point(self):
        z = np.arange(32)
        profile = np.exp(-((z - 10) ** 2) / (2 * 3.0**2))
        dec = make_decoded(profile, spacing=10.0)
        expected = 2 * math.sqrt(2 * math.log(2)) * 3.0 * 10.0
        assert axial_psf_fwhm(dec) == pytest.approx(expected, rel=0.01)

    def test_fit_failure_raises(self):
        rng = np.random.default_rng(5)
        with pytest.raises(FitError):
            fwhm_of_profile(rng.random(64), 1.0)  # pure noise, no peak


class TestSensitivity:
    def test_40db_example(self):
        profile = np.ones(64)
        profile[10] = 100.0
        dec = make_decoded(profile, noise=None)
        # floor region explicit: per-voxel floor std of 1s is 0 -> add spread
        data = dec.data.copy()
        rng = np.random.default_rng(0)
        floor = np.arange(30, 64)
        data[:, :, floor] = 1.0 + 0.0  # keep exact: peak 100, sigma from values below
        # construct exact floor sigma 1.0 around mean
        data[:, :, floor] = rng.normal(0.0, 1.0, size=data[:, :, floor].shape)
        dec2 = DecodedVolume(data=np.abs(data), depth=dec.depth)
        got = sensitivity_db(dec2, floor_bins=floor)
        sigma = float(np.abs(data[:, :, floor]).std())
        assert got == pytest.approx(20 * math.log10(100.0 / sigma), abs=1e-9)

    def test_scaling_property(self):
        profile = np.ones(64)
        profile[5] = 50.0
        rng = np.random.default_rng(1)
        data = np.tile(profile, (4, 4, 1)) + 0.1 * rng.random((4, 4, 64))
        dec = DecodedVolume(data=data, depth=DepthGrid(64, 8.0))
        floor = np.arange(40, 64)
        s1 = sensitivity_db(dec, floor_bins=floor)
        dec_scaled = DecodedVolume(data=data * 0 + data, depth=dec.depth)
        # scale the peak by 10 with fixed floor: +20 dB exactly
        data2 = data.copy()
        data2[:, :, 5] *= 10.0
        s2 = sensitivity_db(DecodedVolume(data=data2, depth=dec.depth), floor_bins=floor)
        assert s2 - s1 == pytest.approx(20.0, abs=1e-9)

    def test_zero_floor_guard(self):
        profile = np.zeros(32)
        profile[4] = 10.0
        dec = make_decoded(profile)
        with pytest.raises(ValueError, match="unbounded"):
            sensitivity_db(dec, floor_bins=np.arange(20, 32))

    def test_peak_in_floor_rejected(self):
        profile = np.zeros(32)
        profile[4] = 10.0
        dec = make_decoded(profile)
        with pytest.raises(ValueError, match="peak"):
            sensitivity_db(dec, floor_bins=np.arange(0, 32))


class TestFidelity:
    def test_exact_recon(self):
        truth = np.array([[0.0, 1.0], [0.5, 0.25]])
        assert rmse(truth, truth) == 0.0
        assert psnr(truth, truth) == float("inf")

    def test_constant_offset(self):
        truth = np.array([[0.0, 1.0], [1.0, 0.0]])
        recon = truth + 1.0
        assert rmse(recon, truth) == pytest.approx(1.0)
        assert psnr(recon, truth) == pytest.approx(0.0)

    def test_hand_computed_2x2(self):
        truth = np.array([[0.0, 2.0], [0.0, 0.0]])
        recon = np.array([[1.0, 2.0], [0.0, 1.0]])
        # mse = (1 + 0 + 0 + 1)/4 = 0.5, rmse = sqrt(0.5)
        assert rmse(recon, truth) == pytest.approx(math.sqrt(0.5))
        assert psnr(recon, truth) == pytest.approx(20 * math.log10(2.0 / math.sqrt(0.5)))

    def test_constant_truth_rejected_for_psnr(self):
        with pytest.raises(ValueError, match="constant"):
            psnr(np.zeros((2, 2)), np.ones((2, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            rmse(np.zeros((2, 2)), np.zeros((2, 3)))
