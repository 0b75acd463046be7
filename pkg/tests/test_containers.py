import numpy as np
import pytest

from fringe3d.containers import (
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


def make_grid(nl=16, center=830.0, spacing=0.1):
    return SpectralGrid(center_wavelength_nm=center, channel_spacing_nm=spacing, num_channels=nl)


class TestSpectralGrid:
    def test_wavelengths_symmetric_and_increasing(self):
        g = make_grid(nl=5, spacing=0.2)
        lam = g.wavelengths_nm
        assert np.all(np.diff(lam) > 0)
        assert lam[2] == pytest.approx(830.0)
        assert lam[0] == pytest.approx(830.0 - 2 * 0.2)

    def test_wavenumbers(self):
        g = make_grid(nl=3)
        assert g.wavenumbers_rad_per_nm == pytest.approx(2 * np.pi / g.wavelengths_nm)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            SpectralGrid(830.0, -0.1, 4)
        with pytest.raises(ValidationError):
            SpectralGrid(830.0, 0.1, 0)
        with pytest.raises(ValidationError):
            SpectralGrid(0.05, 0.1, 4)  # wavelengths go negative


class TestDepthGrid:
    def test_from_spectral_matches_interval(self):
        g = make_grid(nl=400, center=830.0, spacing=0.1)
        d = DepthGrid.from_spectral(g)
        assert d.num_planes == 200
        assert d.plane_spacing_um == pytest.approx(830.0**2 / (2 * 40.0) / 1000.0)

    def test_nonnegative_planes(self):
        with pytest.raises(ValidationError):
            DepthGrid(num_planes=4, plane_spacing_um=1.0, origin_um=-1.0)


class TestVolume:
    def test_all_zero_ok(self):
        d = DepthGrid(num_planes=3, plane_spacing_um=8.0)
        v = ReflectivityVolume(data=np.zeros((4, 5, 3)), depth=d)
        validate(v)

    def test_out_of_range(self):
        d = DepthGrid(num_planes=1, plane_spacing_um=8.0)
        with pytest.raises(ValidationError, match=r"\[0, 1\]"):
            ReflectivityVolume(data=np.full((2, 2, 1), 1.5), depth=d)

    def test_immutable(self):
        d = DepthGrid(num_planes=1, plane_spacing_um=8.0)
        v = ReflectivityVolume(data=np.zeros((2, 2, 1)), depth=d)
        with pytest.raises(ValueError):
            v.data[0, 0, 0] = 1.0


class TestSpectralCube:
    def test_nan_rejected(self):
        g = make_grid(nl=4)
        data = np.zeros((2, 2, 4))
        data[0, 0, 0] = np.nan
        with pytest.raises(ValidationError, match="non-finite"):
            SpectralCube(data=data, grid=g)

    def test_ac_may_be_signed(self):
        g = make_grid(nl=4)
        SpectralCube(data=-np.ones((2, 2, 4)), grid=g, kind="ac_only")
        with pytest.raises(ValidationError):
            SpectralCube(data=-np.ones((2, 2, 4)), grid=g, kind="total_intensity")


class TestCodedAperture:
    def test_entry_range(self):
        with pytest.raises(ValidationError, match=r"\[0, 1\]"):
            CodedAperture(pattern=np.full((3, 8), 1.5))

    def test_channel_codes_are_pure_column_translations(self):
        # camera-frame code of channel k = the pattern translated by offset_k
        mask = random_binary_mask(nx=4, ny=7, seed=3)
        nl = 4
        for k in range(nl):
            code = mask.channel_code(k, nl)
            off = mask.channel_offsets(nl)[k]
            assert code.shape == (4, mask.measurement_width(nl))
            assert np.array_equal(code[:, off : off + 7], mask.pattern)
            outside = np.delete(code, np.arange(off, off + 7), axis=1)
            assert np.all(outside == 0)

    def test_adjacent_codes_shift_by_step(self):
        mask = random_binary_mask(nx=3, ny=5, seed=1)
        c0 = mask.channel_code(0, 3)
        c1 = mask.channel_code(1, 3)
        assert np.array_equal(np.roll(c0, 1, axis=1), c1)

    def test_negative_step_offsets_start_at_zero(self):
        mask = CodedAperture(pattern=np.ones((2, 10)), dispersion_step=-1)
        off = mask.channel_offsets(4)
        assert off.min() == 0 and off.max() == 3
        assert np.all(np.diff(off) == -1)  # columns shift toward -y with lambda

    def test_in_bounds_for_all_channels(self):
        mask = random_binary_mask(nx=2, ny=8, seed=0)
        nl = 5
        assert mask.channel_offsets(nl)[-1] + mask.cube_width == mask.measurement_width(nl)


class TestMeasurementAndCamera:
    def test_raw_bounds_enforced_with_camera(self):
        cam = CameraModel(full_well_e=100.0)
        Measurement(image=np.full((2, 3), 50.0), camera=cam)
        with pytest.raises(ValidationError, match="full well"):
            Measurement(image=np.full((2, 3), 150.0), camera=cam)
        with pytest.raises(ValidationError, match="nonnegative"):
            Measurement(image=np.full((2, 3), -1.0), camera=cam)

    def test_subtracted_measurement_may_be_signed(self):
        Measurement(image=np.full((2, 3), -1.0), camera=None)

    def test_dc_shape_mismatch(self):
        with pytest.raises(ValidationError, match="shape"):
            Measurement(image=np.zeros((2, 3)), dc_reference=np.zeros((2, 4)))

    def test_camera_invariants(self):
        with pytest.raises(ValidationError):
            CameraModel(full_well_e=-1.0)
        with pytest.raises(ValidationError):
            CameraModel(bit_depth=4)
        with pytest.raises(ValidationError):
            CameraModel(oversample_factor=0)
