"""
Tests for gyro integration and accelerometer de-rotation.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

sys.path.insert(0, str(Path(__file__).parent.parent))

from tau_depth.core import NS_PER_S, ImuSample, SampleStream
from tau_depth.derotation import (
    OrientationTrack,
    derotate_accel,
    derotation_homography,
    estimate_gyro_bias,
    integrate_gyro,
)
from tau_depth.errors import InputError, RangeError


def _gyro(rate_hz, duration_s, omega):
    """Gyro stream sampled at ``rate_hz`` from a rate function of time."""
    n = int(round(duration_s * rate_hz)) + 1
    t_ns = np.rint(np.arange(n) / rate_hz * NS_PER_S).astype(np.int64)
    return SampleStream(t_ns, omega(t_ns / NS_PER_S), "gyro")


def _yaw_rate(t):
    return np.column_stack([np.zeros_like(t), np.zeros_like(t), np.cos(2 * np.pi * t)])


class TestIntegrateGyro:
    """Tests for integrating body rates."""

    def test_zero_rate_stays_identity(self):
        """No rotation gives identity everywhere."""
        track = integrate_gyro(_gyro(200.0, 1.0, lambda t: np.zeros((t.size, 3))))
        assert np.allclose(track.rotations.magnitude(), 0.0)

    def test_constant_rate_is_exact(self):
        """A constant single-axis rate integrates without error."""
        track = integrate_gyro(_gyro(100.0, 2.0, lambda t: np.tile([0.0, 0.3, 0.0], (t.size, 1))))
        np.testing.assert_allclose(track.rotations[-1].as_rotvec(), [0.0, 0.6, 0.0], atol=1e-12)

    def test_second_order_convergence(self):
        """Halving the step divides the angle error by about four."""
        exact = np.sin(2 * np.pi * 0.3) / (2 * np.pi)
        errors = []
        for rate in (100.0, 200.0):
            track = integrate_gyro(_gyro(rate, 0.3, _yaw_rate))
            errors.append(abs(track.rotations[-1].as_rotvec()[2] - exact))
        assert 3.5 <= errors[0] / errors[1] <= 4.5

    def test_accepts_imu_samples(self):
        """A list of ImuSample records integrates like a stream."""
        samples = [ImuSample(k * 10_000_000, [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]) for k in range(11)]
        track = integrate_gyro(samples)
        assert track.rotations[-1].as_rotvec()[2] == pytest.approx(0.1)

    def test_bias_is_subtracted(self):
        """A rate equal to the bias integrates to nothing."""
        bias = np.array([0.01, -0.02, 0.005])
        track = integrate_gyro(_gyro(100.0, 1.0, lambda t: np.tile(bias, (t.size, 1))), bias)
        assert track.rotations[-1].magnitude() == pytest.approx(0.0, abs=1e-12)

    def test_two_halves_compose(self):
        """Integrating two halves and composing them equals integrating the whole."""
        def rate(t):
            return np.column_stack([0.4 * np.sin(3 * t), 0.2 * np.cos(2 * t), 0.7 * np.sin(t)])

        gyro = _gyro(200.0, 2.0, rate)
        mid = len(gyro) // 2
        first = integrate_gyro(SampleStream(gyro.t_ns[:mid + 1], gyro.values[:mid + 1], "gyro"))
        second = integrate_gyro(SampleStream(gyro.t_ns[mid:], gyro.values[mid:], "gyro"))
        whole = integrate_gyro(gyro)
        composed = first.rotations[-1] * second.rotations[-1]
        assert (composed.inv() * whole.rotations[-1]).magnitude() < 1e-9

    def test_rate_above_bound(self):
        """Implausible angular rates are rejected."""
        with pytest.raises(InputError):
            integrate_gyro(_gyro(100.0, 0.1, lambda t: np.tile([20.0, 0, 0], (t.size, 1))))

    def test_needs_two_samples(self):
        """A single sample cannot be integrated."""
        with pytest.raises(InputError):
            integrate_gyro(SampleStream(np.array([0]), np.zeros((1, 3))))


class TestOrientationTrack:
    """Tests for orientation lookup and re-anchoring."""

    def test_must_start_at_identity(self):
        """A track starting off the identity is rejected."""
        rots = Rotation.from_rotvec([[0.1, 0, 0], [0.2, 0, 0]])
        with pytest.raises(InputError):
            OrientationTrack(np.array([0, 10]), rots)

    def test_at_interpolates(self):
        """Slerp halfway through a constant rotation gives half the angle."""
        track = integrate_gyro(_gyro(100.0, 1.0, lambda t: np.tile([0, 0, 0.5], (t.size, 1))))
        assert track.at(250_000_000).as_rotvec()[2] == pytest.approx(0.125)

    def test_at_outside_span(self):
        """Queries outside the track raise RangeError."""
        track = integrate_gyro(_gyro(100.0, 1.0, _yaw_rate))
        with pytest.raises(RangeError):
            track.at(2 * NS_PER_S)

    def test_relative_to(self):
        """Re-anchoring starts the track at identity at the new time."""
        track = integrate_gyro(_gyro(100.0, 1.0, lambda t: np.tile([0, 0, 0.5], (t.size, 1))))
        rebased = track.relative_to(405_000_000)
        assert rebased.span == (405_000_000, NS_PER_S)
        assert rebased.rotations[0].magnitude() == pytest.approx(0.0, abs=1e-12)
        assert rebased.rotations[-1].as_rotvec()[2] == pytest.approx(0.5 * 0.595)


class TestDerotation:
    """Tests for fixed-frame accelerometer and homography."""

    def test_derotate_accel_recovers_fixed_vector(self):
        """A fixed-frame vector seen from a yawing camera is recovered."""
        omega = 0.5
        gyro = _gyro(100.0, 2.0, lambda t: np.tile([0, 0, omega], (t.size, 1)))
        track = integrate_gyro(gyro)
        fixed = np.array([1.0, 0.0, 0.0])
        camera = Rotation.from_rotvec(np.outer(omega * gyro.t_s, [0, 0, 1])).inv().apply(fixed)
        out = derotate_accel(SampleStream(gyro.t_ns, camera, "accel"), track)
        np.testing.assert_allclose(out.values, np.tile(fixed, (len(gyro), 1)), atol=1e-9)

    def test_derotate_accel_outside_track(self):
        """Accelerometer samples past the gyro raise RangeError."""
        track = integrate_gyro(_gyro(100.0, 1.0, _yaw_rate))
        accel = SampleStream(np.array([0, 2 * NS_PER_S]), np.zeros((2, 3)), "accel")
        with pytest.raises(RangeError):
            derotate_accel(accel, track)

    def test_homography_is_rotation_matrix(self):
        """The de-rotation homography is the camera-to-fixed rotation R."""
        rot = Rotation.from_rotvec([0.02, -0.01, 0.3])
        np.testing.assert_allclose(derotation_homography(rot), rot.as_matrix())
        np.testing.assert_allclose(derotation_homography(Rotation.identity()), np.eye(3))

    def test_roll_about_optical_axis(self):
        """A camera rolled by theta sees the scene turned by -theta; the homography undoes it."""
        theta = 0.3
        rot = Rotation.from_rotvec([0.0, 0.0, theta])
        fixed = np.array([0.2, 0.0, 1.0])
        current = rot.inv().apply(fixed)
        assert np.arctan2(current[1], current[0]) == pytest.approx(-theta)
        mapped = derotation_homography(rot) @ current
        np.testing.assert_allclose(mapped / mapped[2], fixed, atol=1e-12)


class TestGyroBias:
    """Tests for stationary bias estimation."""

    def test_mean_over_interval(self):
        """The bias is the mean rate over the stationary start."""
        bias = np.array([0.003, -0.001, 0.002])
        rng = np.random.default_rng(0)
        gyro = _gyro(200.0, 2.0, lambda t: bias + 1e-4 * rng.standard_normal((t.size, 3)))
        np.testing.assert_allclose(estimate_gyro_bias(gyro, 1.0), bias, atol=5e-5)

    def test_interval_too_short(self):
        """An interval holding a single sample is rejected."""
        with pytest.raises(InputError):
            estimate_gyro_bias(_gyro(10.0, 1.0, _yaw_rate), 0.01)
