"""
Gyro integration into the fixed start-of-service orientation.

The orientation track R(t) maps vectors from the camera frame at time t to
the camera frame at the track start, so fixed-frame acceleration is
``R(t) @ a_c(t)`` and a current-frame image ray ``x`` looks along
``R(t) @ x`` in the fixed frame.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from tau_depth.core import NS_PER_S, ImuSample, SampleStream
from tau_depth.errors import InputError, RangeError

logger = logging.getLogger(__name__)

DEFAULT_GYRO_RATE_MAX = 10.0  # rad/s


@dataclass(frozen=True, eq=False)
class OrientationTrack:
    """Orientation R(t) sampled at the gyro timestamps; R at the first sample is identity."""
    t_ns: np.ndarray
    rotations: Rotation

    def __post_init__(self):
        t_ns = np.asarray(self.t_ns, dtype=np.int64)
        if t_ns.ndim != 1 or t_ns.size < 2:
            raise InputError("orientation track needs at least two samples")
        if np.any(np.diff(t_ns) <= 0):
            raise InputError("orientation track timestamps must be strictly increasing")
        if len(self.rotations) != t_ns.size:
            raise InputError("orientation track: timestamp/rotation count mismatch")
        if self.rotations[0].magnitude() > 1e-9:
            raise InputError("orientation track must start at the identity")
        object.__setattr__(self, "t_ns", t_ns)

    def __len__(self) -> int:
        return int(self.t_ns.size)

    @property
    def span(self):
        return int(self.t_ns[0]), int(self.t_ns[-1])

    def at(self, t_ns) -> Rotation:
        """Spherically interpolated orientation at ``t_ns`` (scalar or array)."""
        query = np.asarray(t_ns, dtype=np.int64)
        first, last = self.span
        if query.min() < first or query.max() > last:
            raise RangeError(
                f"orientation query [{query.min()}, {query.max()}] ns outside "
                f"track span [{first}, {last}] ns")
        return self._slerp((query - first) / NS_PER_S)

    @cached_property
    def _slerp(self) -> Slerp:
        return Slerp((self.t_ns - self.t_ns[0]) / NS_PER_S, self.rotations)

    def relative_to(self, t_ns: int) -> "OrientationTrack":
        """
        Re-anchor the fixed frame at ``t_ns``.

        Samples before ``t_ns`` are dropped and an exact sample is inserted at
        ``t_ns`` so the new track starts at the identity.
        """
        anchor = self.at(t_ns)
        keep = self.t_ns > t_ns
        times = np.concatenate([[t_ns], self.t_ns[keep]])
        rots = Rotation.concatenate([anchor, self.rotations[keep]])
        return OrientationTrack(times, anchor.inv() * rots)


def estimate_gyro_bias(gyro: SampleStream, interval_s: float = 0.5) -> np.ndarray:
    """
    Constant gyro bias as the mean rate over an initial stationary interval.

    Args:
        gyro: Gyro stream (rad/s)
        interval_s: Length of the stationary interval at the stream start

    Returns:
        Bias vector (rad/s)
    """
    first, _ = gyro.span
    end = first + int(round(interval_s * NS_PER_S))
    mask = gyro.t_ns <= end
    if mask.sum() < 2:
        raise InputError(f"stationary interval of {interval_s} s holds fewer than 2 gyro samples")
    return gyro.values[mask].mean(axis=0)


def _as_gyro_stream(gyro: Union[SampleStream, Sequence[ImuSample]]) -> SampleStream:
    if isinstance(gyro, SampleStream):
        return gyro
    return SampleStream.from_imu(list(gyro), "gyro")


def integrate_gyro(gyro: Union[SampleStream, Sequence[ImuSample]],
                   bias: Optional[np.ndarray] = None,
                   rate_max: float = DEFAULT_GYRO_RATE_MAX) -> OrientationTrack:
    """
    Integrate body rates into an orientation track.

    Each step uses the midpoint rate of two consecutive samples:
    R(t_{k+1}) = R(t_k) * exp((w_k + w_{k+1}) / 2 * dt).

    Args:
        gyro: Gyro samples (rad/s, sensor frame)
        bias: Optional constant bias subtracted from every sample
        rate_max: Sanity bound on the angular rate (rad/s)

    Returns:
        OrientationTrack starting at the identity
    """
    stream = _as_gyro_stream(gyro)
    if len(stream) < 2:
        raise InputError("gyro integration needs at least two samples")

    rates = stream.values
    if bias is not None:
        rates = rates - np.asarray(bias, dtype=np.float64).reshape(1, 3)

    dt = np.diff(stream.t_ns) / NS_PER_S
    mid = 0.5 * (rates[1:] + rates[:-1])
    steps = mid * dt[:, None]
    angles = np.linalg.norm(steps, axis=1)
    limit = rate_max * dt
    if np.any(angles > limit * (1 + 1e-12)):
        k = int(np.argmax(angles - limit))
        raise InputError(
            f"gyro step {k} rotates {angles[k]:.4g} rad in {dt[k]:.4g} s, "
            f"above the {rate_max} rad/s sanity bound")

    increments = Rotation.from_rotvec(steps)
    quats = np.empty((len(stream), 4))
    current = Rotation.identity()
    quats[0] = current.as_quat()
    for k in range(len(increments)):
        current = current * increments[k]
        quats[k + 1] = current.as_quat()

    logger.debug("integrated %d gyro samples, final angle %.4f rad",
                 len(stream), current.magnitude())
    return OrientationTrack(stream.t_ns, Rotation.from_quat(quats))


def derotate_accel(accel: SampleStream, track: OrientationTrack) -> SampleStream:
    """
    Rotate accelerometer samples into the fixed frame: a^m(t) = R(t) a^m_c(t).

    Raises:
        RangeError: if any sample lies outside the track span
    """
    rotations = track.at(accel.t_ns)
    return SampleStream(accel.t_ns, rotations.apply(accel.values), "accel (fixed frame)")


def derotation_homography(rotation: Rotation) -> np.ndarray:
    """
    Homography on calibrated coordinates from the current frame to the
    fixed-orientation virtual camera: x_fixed ~ R x_current.

    R maps camera-frame vectors into the fixed frame, the same R that
    derotate_accel applies. A roll by theta about the optical axis turns the
    current image by -theta; this matrix turns it back.
    """
    return rotation.as_matrix()
