"""Compressive sampling operator: mask, shear and spectral sum.

The operator maps an (Nx, Ny, Nl) datacube to a single (Nx, W) camera image
with W = Ny + (Nl - 1) * |step|: every channel is modulated by the same
native-width mask, then channel k is translated to its dispersion offset and
all channels are summed,

    Y(i, j + offset_k) += X_k(i, j) * M(i, j).

In camera coordinates channel k is therefore coded by a pure column
translation of the mask, which is what lets one static pattern give every
spectral channel a distinguishing code.

The solver-facing variants act on the sheared frame directly (cubes of width
W whose channel k lives on columns [offset_k, offset_k + Ny)); entries
outside a channel's window carry zero weight.  The dense matrix form - a row
of diagonal blocks, one per channel - is never materialized by
forward/adjoint; it is exposed only as a small-instance test oracle.
"""

from __future__ import annotations

import numpy as np

from .containers import CodedAperture, SpectralCube

DENSE_ORACLE_MAX_ELEMENTS = 10_000
# above this channel count, plain accumulation loses low-order bits
KAHAN_CHANNEL_THRESHOLD = 256


class SensingDimensionError(ValueError):
    pass


class SensingOperator:
    """Immutable, thread-safe forward/adjoint pair for one mask and cube size."""

    def __init__(self, aperture: CodedAperture, num_channels: int):
        self.aperture = aperture
        self.num_channels = int(num_channels)
        self.nx = aperture.pattern.shape[0]
        self.ny = aperture.cube_width
        self.width = aperture.measurement_width(self.num_channels)
        self.offsets = aperture.channel_offsets(self.num_channels)
        self._psi: np.ndarray | None = None

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.num_channels)

    @property
    def measurement_shape(self) -> tuple[int, int]:
        return (self.nx, self.width)

    # -- frame conversions ----------------------------------------------------

    def shear(self, cube: np.ndarray) -> np.ndarray:
        """Place each channel of an (Nx, Ny, Nl) cube at its dispersion offset
        inside the (Nx, W, Nl) sheared frame (zeros off support)."""
        self._check_cube(cube)
        out = np.zeros((self.nx, self.width, self.num_channels))
        for k, off in enumerate(self.offsets):
            out[:, off : off + self.ny, k] = cube[:, :, k]
        return out

    def unshear(self, sheared: np.ndarray) -> np.ndarray:
        """Translate each channel back and crop to the common Ny-wide support."""
        self._check_sheared(sheared)
        out = np.empty((self.nx, self.ny, self.num_channels))
        for k, off in enumerate(self.offsets):
            out[:, :, k] = sheared[:, off : off + self.ny, k]
        return out

    # -- operator application ---------------------------------------------------

    def forward(self, cube) -> np.ndarray:
        """Compress an (Nx, Ny, Nl) cube (or SpectralCube) to the camera image:
        modulate by the mask, shear, sum over channels."""
        data = cube.data if isinstance(cube, SpectralCube) else np.asarray(cube)
        self._check_cube(data)
        pattern = self.aperture.pattern
        y = np.zeros((self.nx, self.width))
        comp = (
            np.zeros_like(y) if self.num_channels > KAHAN_CHANNEL_THRESHOLD else None
        )
        for k, off in enumerate(self.offsets):
            sl = slice(off, off + self.ny)
            term = data[:, :, k] * pattern
            if comp is None:
                y[:, sl] += term
            else:  # Kahan compensated accumulation
                t = term - comp[:, sl]
                s = y[:, sl] + t
                comp[:, sl] = (s - y[:, sl]) - t
                y[:, sl] = s
        return y

    def forward_sheared(self, sheared: np.ndarray) -> np.ndarray:
        """Forward map on a sheared-frame cube (entries off the channel
        windows have zero weight)."""
        self._check_sheared(sheared)
        pattern = self.aperture.pattern
        y = np.zeros((self.nx, self.width))
        comp = (
            np.zeros_like(y) if self.num_channels > KAHAN_CHANNEL_THRESHOLD else None
        )
        for k, off in enumerate(self.offsets):
            sl = slice(off, off + self.ny)
            term = sheared[:, sl, k] * pattern
            if comp is None:
                y[:, sl] += term
            else:
                t = term - comp[:, sl]
                s = y[:, sl] + t
                comp[:, sl] = (s - y[:, sl]) - t
                y[:, sl] = s
        return y

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """Transpose map into the native frame: channel k reads the mask
        times its translated window of the image."""
        self._check_measurement(y)
        pattern = self.aperture.pattern
        out = np.empty((self.nx, self.ny, self.num_channels))
        for k, off in enumerate(self.offsets):
            out[:, :, k] = pattern * y[:, off : off + self.ny]
        return out

    def adjoint_sheared(self, y: np.ndarray) -> np.ndarray:
        """Transpose map into the sheared frame (zeros off support)."""
        self._check_measurement(y)
        pattern = self.aperture.pattern
        out = np.zeros((self.nx, self.width, self.num_channels))
        for k, off in enumerate(self.offsets):
            sl = slice(off, off + self.ny)
            out[:, sl, k] = pattern * y[:, sl]
        return out

    def psi(self) -> np.ndarray:
        """Diagonal of Phi Phi^T: per measurement pixel, the summed squared
        mask weights of the channels whose translated code covers it."""
        if self._psi is None:
            pattern = self.aperture.pattern
            psi = np.zeros((self.nx, self.width))
            for off in self.offsets:
                psi[:, off : off + self.ny] += pattern**2
            psi.setflags(write=False)
            self._psi = psi
        return self._psi

    def normalized_backprojection(self, y: np.ndarray) -> np.ndarray:
        """psi-normalized adjoint in the sheared frame: the solver and
        learned-reconstruction initialization (zero where psi is zero)."""
        psi = self.psi()
        safe = np.where(psi > 0, psi, 1.0)
        return self.adjoint_sheared(np.where(psi > 0, y / safe, 0.0))

    # -- dense test oracle --------------------------------------------------------

    def dense_matrix(self) -> np.ndarray:
        """Explicit [Nx*W] x [Nx*W*Nl] matrix: a row of diagonal blocks, one
        per channel, diagonals filled with the vectorized translated codes.
        Test oracle only; guarded by element count."""
        if self.nx * self.ny * self.num_channels > DENSE_ORACLE_MAX_ELEMENTS:
            raise SensingDimensionError(
                "dense_matrix: instance too large for the dense oracle "
                f"(> {DENSE_ORACLE_MAX_ELEMENTS} cube elements)"
            )
        n = self.nx * self.width
        phi = np.zeros((n, n * self.num_channels))
        rows = np.arange(n)
        for k in range(self.num_channels):
            code = self.aperture.channel_code(k, self.num_channels)
            phi[rows, k * n + rows] = code.ravel()
        return phi

    # -- shape checks ---------------------------------------------------------

    def _check_cube(self, data: np.ndarray) -> None:
        if data.shape != self.dims:
            raise SensingDimensionError(
                f"cube shape {data.shape} != operator dims {self.dims}"
            )

    def _check_sheared(self, data: np.ndarray) -> None:
        expected = (self.nx, self.width, self.num_channels)
        if data.shape != expected:
            raise SensingDimensionError(
                f"sheared cube shape {data.shape} != {expected}"
            )

    def _check_measurement(self, y: np.ndarray) -> None:
        if y.shape != self.measurement_shape:
            raise SensingDimensionError(
                f"measurement shape {y.shape} != {self.measurement_shape}"
            )
