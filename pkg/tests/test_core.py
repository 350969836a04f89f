"""
Tests for the shared value types and time base.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from tau_depth.core import (
    NS_PER_S,
    CameraIntrinsics,
    FocSample,
    FocStream,
    ImuSample,
    SampleStream,
    Trajectory,
    from_quat_wxyz,
    interp_linear,
    quat_wxyz,
    to_calibrated,
    to_nanoseconds,
    to_pixel,
    to_seconds,
)
from tau_depth.errors import InputError, RangeError


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=200.0, fy=180.0, cx=80.0, cy=60.0, width=160, height=120)


class TestTimeBase:
    """Tests for nanosecond/second conversion."""

    def test_scalar_conversion(self):
        """Seconds round to the nearest nanosecond."""
        assert to_nanoseconds(0.5) == 500_000_000
        assert to_seconds(1_500_000_000) == pytest.approx(1.5)

    def test_array_conversion_is_int64(self):
        """Array conversion keeps integer nanoseconds."""
        t = to_nanoseconds(np.array([0.0, 0.01, 0.02]))
        assert t.dtype == np.int64
        assert t.tolist() == [0, 10_000_000, 20_000_000]


class TestCameraIntrinsics:
    """Tests for the pinhole model."""

    def test_rejects_non_positive_focal_length(self):
        """A zero focal length is an input error."""
        with pytest.raises(InputError):
            CameraIntrinsics(fx=0.0, fy=100.0, cx=10.0, cy=10.0, width=20, height=20)

    def test_rejects_principal_point_outside_image(self):
        """The principal point must lie in the image."""
        with pytest.raises(InputError):
            CameraIntrinsics(fx=100.0, fy=100.0, cx=50.0, cy=10.0, width=20, height=20)

    def test_principal_point_is_calibrated_origin(self, intrinsics):
        """(cx, cy) maps to (0, 0)."""
        np.testing.assert_allclose(to_calibrated((80.0, 60.0), intrinsics), [0.0, 0.0])

    def test_pixel_and_calibrated_are_inverse(self, intrinsics):
        """to_pixel undoes to_calibrated on an (N, 2) array."""
        uv = np.array([[0.0, 0.0], [159.0, 119.0], [33.5, 71.25]])
        np.testing.assert_allclose(to_pixel(to_calibrated(uv, intrinsics), intrinsics), uv)

    def test_matrix_inverse(self, intrinsics):
        """inverse_matrix is K^-1."""
        np.testing.assert_allclose(intrinsics.matrix @ intrinsics.inverse_matrix, np.eye(3),
                                   atol=1e-12)

    def test_scaled_keeps_rays(self, intrinsics):
        """A coarse pixel centre and its fine counterpart see the same ray."""
        fine = intrinsics.scaled(3)
        assert (fine.width, fine.height) == (480, 360)
        u, v = 17.0, 42.0
        coarse_ray = to_calibrated((u, v), intrinsics)
        fine_ray = to_calibrated((3 * (u + 0.5) - 0.5, 3 * (v + 0.5) - 0.5), fine)
        np.testing.assert_allclose(coarse_ray, fine_ray, atol=1e-12)


class TestSamples:
    """Tests for IMU and frequency-of-contact records."""

    def test_imu_sample_requires_three_components(self):
        """A 2-vector gyro reading is rejected."""
        with pytest.raises(InputError):
            ImuSample(0, [0.0, 0.0], [0.0, 0.0, 9.81])

    def test_imu_sample_rejects_nan(self):
        """Non-finite readings are rejected."""
        with pytest.raises(InputError):
            ImuSample(0, [0.0, np.nan, 0.0], [0.0, 0.0, 9.81])

    def test_tau_is_negative_inverse_of_fz(self):
        """An approach with F_z = -0.5 has tau = 2 s."""
        sample = FocSample(0, [0.0, 0.0, -0.5], (0.0, 0.0))
        assert sample.tau == pytest.approx(2.0)

    def test_tau_infinite_without_approach(self):
        """Zero F_z means contact never happens."""
        assert FocSample(0, [0.1, 0.0, 0.0], (0.0, 0.0)).tau == float("inf")


class TestSampleStream:
    """Tests for timestamped vector streams."""

    def _stream(self):
        t = np.array([0, 10, 20, 30], dtype=np.int64) * 1_000_000
        values = np.column_stack([np.arange(4.0), 2.0 * np.arange(4.0)])
        return SampleStream(t, values, "test")

    def test_rejects_non_increasing_timestamps(self):
        """Repeated timestamps are rejected."""
        with pytest.raises(InputError):
            SampleStream(np.array([0, 5, 5]), np.zeros((3, 3)))

    def test_rejects_length_mismatch(self):
        """Timestamp and value counts must agree."""
        with pytest.raises(InputError):
            SampleStream(np.array([0, 5, 10]), np.zeros((2, 3)))

    def test_resample_is_linear(self):
        """Midpoints interpolate linearly per component."""
        out = self._stream().resample(np.array([5_000_000, 25_000_000]))
        np.testing.assert_allclose(out, [[0.5, 1.0], [2.5, 5.0]])

    def test_resample_outside_span(self):
        """Queries past the last sample raise RangeError."""
        with pytest.raises(RangeError):
            self._stream().resample(np.array([31_000_000]))

    def test_interp_linear_single_timestamp(self):
        """interp_linear returns one vector."""
        out = interp_linear(self._stream(), 15_000_000)
        np.testing.assert_allclose(out, [1.5, 3.0])

    def test_slice_is_inclusive(self):
        """Both slice bounds are kept."""
        sliced = self._stream().slice(10_000_000, 20_000_000)
        assert len(sliced) == 2
        assert sliced.span == (10_000_000, 20_000_000)

    def test_from_imu(self):
        """IMU records split into a gyro stream."""
        samples = [ImuSample(k * 5_000_000, [k, 0, 0], [0, 0, 9.81]) for k in range(3)]
        gyro = SampleStream.from_imu(samples, "gyro")
        assert gyro.values.shape == (3, 3)
        np.testing.assert_allclose(gyro.values[:, 0], [0, 1, 2])

    def test_foc_stream_views(self):
        """FocStream exposes F and fixation points as streams."""
        stream = FocStream.from_samples(
            [FocSample(k * NS_PER_S, [0, 0, -0.1 * k], (0.01 * k, 0.0)) for k in range(3)])
        assert len(stream) == 3
        np.testing.assert_allclose(stream.foc.values[:, 2], [0.0, -0.1, -0.2])
        np.testing.assert_allclose(stream.point_stream.values[:, 0], [0.0, 0.01, 0.02])


class TestTrajectory:
    """Tests for trajectories."""

    def test_path_length(self):
        """A 0.3 m + 0.4 m polyline has length 0.7 m."""
        traj = Trajectory(np.array([0, 1, 2]), [[0, 0, 1], [0.3, 0, 1], [0.3, 0.4, 1]])
        assert traj.path_length() == pytest.approx(0.7)
        assert traj.duration_s == pytest.approx(2e-9)

    def test_transformed(self):
        """Rigid transforms apply to every position."""
        traj = Trajectory(np.array([0, 1]), [[1, 0, 0], [0, 1, 0]])
        rz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        moved = traj.transformed(rz, [0.0, 0.0, 2.0])
        np.testing.assert_allclose(moved.positions, [[0, 1, 2], [-1, 0, 2]], atol=1e-12)

    def test_rejects_non_finite_positions(self):
        """NaN positions are rejected."""
        with pytest.raises(InputError):
            Trajectory(np.array([0]), [[np.nan, 0, 0]])


class TestQuaternions:
    """Tests for scalar-first quaternion helpers."""

    def test_identity_is_w_first(self):
        """The identity quaternion is (1, 0, 0, 0) in wxyz order."""
        from scipy.spatial.transform import Rotation
        np.testing.assert_allclose(quat_wxyz(Rotation.identity()), [1, 0, 0, 0])

    def test_from_wxyz(self):
        """A 90 degree turn about z is recovered from wxyz."""
        c = np.sqrt(0.5)
        rot = from_quat_wxyz([c, 0.0, 0.0, c])
        np.testing.assert_allclose(rot.apply([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)
