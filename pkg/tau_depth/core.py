"""
Shared value types, time base and calibrated-coordinate conventions.

Time is carried as integer nanoseconds since sequence start and converted to
seconds only where it enters an integral. Image coordinates are calibrated
(K = I) everywhere except at I/O boundaries.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.transform import Rotation

from tau_depth.errors import InputError, RangeError

NS_PER_S = 1_000_000_000

# Timestamps are plain ints (nanoseconds); arrays of them are int64.
Timestamp = int

__all__ = [
    "NS_PER_S",
    "Timestamp",
    "Rotation",
    "as_vec3",
    "to_seconds",
    "to_nanoseconds",
    "CameraIntrinsics",
    "ImuSample",
    "FocSample",
    "SampleStream",
    "FocStream",
    "TrajectoryFrame",
    "Trajectory",
    "to_calibrated",
    "to_pixel",
    "interp_linear",
]


def to_seconds(t_ns: Union[int, np.ndarray]) -> Union[float, np.ndarray]:
    """Convert nanoseconds to seconds."""
    if isinstance(t_ns, np.ndarray):
        return t_ns.astype(np.float64) / NS_PER_S
    return t_ns / NS_PER_S


def to_nanoseconds(t_s: Union[float, np.ndarray]) -> Union[int, np.ndarray]:
    """Convert seconds to integer nanoseconds (rounded to nearest)."""
    if isinstance(t_s, np.ndarray):
        return np.rint(t_s * NS_PER_S).astype(np.int64)
    return int(round(t_s * NS_PER_S))


def as_vec3(value: Iterable[float], name: str = "vector") -> np.ndarray:
    """Return ``value`` as a finite float64 array of shape (3,)."""
    vec = np.asarray(value, dtype=np.float64).reshape(-1)
    if vec.shape != (3,):
        raise InputError(f"{name} must have 3 components, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise InputError(f"{name} has non-finite components: {vec}")
    return vec


def _check_timestamps(t_ns: np.ndarray, name: str) -> np.ndarray:
    t_ns = np.asarray(t_ns, dtype=np.int64).reshape(-1)
    if t_ns.size and t_ns[0] < 0:
        raise InputError(f"{name}: timestamps must be non-negative")
    if np.any(np.diff(t_ns) <= 0):
        raise InputError(f"{name}: timestamps must be strictly increasing")
    return t_ns


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise InputError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise InputError(f"principal point ({self.cx}, {self.cy}) outside image")

    @property
    def matrix(self) -> np.ndarray:
        """3x3 camera matrix K."""
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    @property
    def inverse_matrix(self) -> np.ndarray:
        """K^-1."""
        return np.array([[1.0 / self.fx, 0.0, -self.cx / self.fx],
                         [0.0, 1.0 / self.fy, -self.cy / self.fy],
                         [0.0, 0.0, 1.0]])

    def scaled(self, factor: int) -> "CameraIntrinsics":
        """Intrinsics of the same camera sampled ``factor`` times finer."""
        # pixel centres at integer coordinates: x_fine = f*(x + 0.5) - 0.5
        return CameraIntrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=(self.cx + 0.5) * factor - 0.5,
            cy=(self.cy + 0.5) * factor - 0.5,
            width=self.width * factor,
            height=self.height * factor,
        )


def to_calibrated(pixel, intrinsics: CameraIntrinsics) -> np.ndarray:
    """
    Map pixel coordinates (u, v) to calibrated coordinates (x, y).

    Accepts a single pair or an (N, 2) array.
    """
    uv = np.asarray(pixel, dtype=np.float64)
    x = (uv[..., 0] - intrinsics.cx) / intrinsics.fx
    y = (uv[..., 1] - intrinsics.cy) / intrinsics.fy
    return np.stack([x, y], axis=-1)


def to_pixel(point, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Inverse of :func:`to_calibrated`."""
    xy = np.asarray(point, dtype=np.float64)
    u = xy[..., 0] * intrinsics.fx + intrinsics.cx
    v = xy[..., 1] * intrinsics.fy + intrinsics.cy
    return np.stack([u, v], axis=-1)


@dataclass(frozen=True, eq=False)
class ImuSample:
    """One gyro/accelerometer reading in the sensor frame."""
    t: Timestamp
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        if self.t < 0:
            raise InputError("ImuSample timestamp must be non-negative")
        object.__setattr__(self, "gyro", as_vec3(self.gyro, "gyro"))
        object.__setattr__(self, "accel", as_vec3(self.accel, "accel"))


@dataclass(frozen=True, eq=False)
class FocSample:
    """Frequency-of-contact F (1/s, fixed frame) and the fixation point (calibrated)."""
    t: Timestamp
    F: np.ndarray
    point: Tuple[float, float]

    def __post_init__(self):
        if self.t < 0:
            raise InputError("FocSample timestamp must be non-negative")
        object.__setattr__(self, "F", as_vec3(self.F, "F"))
        x, y = (float(v) for v in self.point)
        if not (np.isfinite(x) and np.isfinite(y)):
            raise InputError("FocSample point must be finite")
        object.__setattr__(self, "point", (x, y))

    @property
    def tau(self) -> float:
        """Time-to-contact -1/F_z (inf when F_z is zero)."""
        return -1.0 / self.F[2] if self.F[2] != 0 else float("inf")


@dataclass(frozen=True, eq=False)
class SampleStream:
    """
    Timestamped vector samples stored column-wise.

    ``values`` has shape (N, k). Construction rejects non-monotone
    timestamps and non-finite values.
    """
    t_ns: np.ndarray
    values: np.ndarray
    name: str = "stream"

    def __post_init__(self):
        t_ns = _check_timestamps(self.t_ns, self.name)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != t_ns.shape[0]:
            raise InputError(
                f"{self.name}: {t_ns.shape[0]} timestamps but {values.shape[0]} samples")
        if not np.all(np.isfinite(values)):
            raise InputError(f"{self.name}: non-finite samples")
        object.__setattr__(self, "t_ns", t_ns)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.t_ns.shape[0])

    @property
    def t_s(self) -> np.ndarray:
        return self.t_ns.astype(np.float64) / NS_PER_S

    @property
    def span(self) -> Tuple[int, int]:
        if len(self) == 0:
            raise InputError(f"{self.name} is empty")
        return int(self.t_ns[0]), int(self.t_ns[-1])

    def covers(self, t0: int, t1: int) -> bool:
        first, last = self.span
        return first <= t0 and t1 <= last

    def resample(self, t_ns) -> np.ndarray:
        """Componentwise linear interpolation at ``t_ns`` (scalar or array)."""
        query = np.asarray(t_ns, dtype=np.int64)
        first, last = self.span
        if query.size and (query.min() < first or query.max() > last):
            raise RangeError(
                f"{self.name}: query [{query.min()}, {query.max()}] ns outside "
                f"stream span [{first}, {last}] ns")
        # offsets relative to the first sample keep float64 exact at ns resolution
        base = self.t_ns.astype(np.float64) - first
        q = query.astype(np.float64) - first
        out = np.empty(query.shape + (self.values.shape[1],))
        for k in range(self.values.shape[1]):
            out[..., k] = np.interp(q, base, self.values[:, k])
        return out

    def slice(self, t0: int, t1: int) -> "SampleStream":
        """Samples with t0 <= t <= t1."""
        mask = (self.t_ns >= t0) & (self.t_ns <= t1)
        return SampleStream(self.t_ns[mask], self.values[mask], self.name)

    @classmethod
    def from_imu(cls, samples: Sequence[ImuSample], which: str) -> "SampleStream":
        """Build a gyro or accel stream from ``ImuSample`` records."""
        if which not in ("gyro", "accel"):
            raise InputError(f"unknown IMU channel {which!r}")
        t = np.array([s.t for s in samples], dtype=np.int64)
        v = np.array([getattr(s, which) for s in samples]).reshape(len(samples), 3)
        return cls(t, v, which)


def interp_linear(stream: SampleStream, t: Timestamp) -> np.ndarray:
    """
    Linearly interpolate ``stream`` at a single timestamp.

    Raises:
        RangeError: if ``t`` lies outside the stream span
    """
    return stream.resample(np.int64(t))


@dataclass(frozen=True, eq=False)
class FocStream:
    """Frequency-of-contact samples and fixation points over time."""
    t_ns: np.ndarray
    F: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        t_ns = _check_timestamps(self.t_ns, "foc")
        F = np.asarray(self.F, dtype=np.float64).reshape(-1, 3)
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if not (F.shape[0] == points.shape[0] == t_ns.shape[0]):
            raise InputError("foc stream: inconsistent sample counts")
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(points))):
            raise InputError("foc stream: non-finite samples")
        object.__setattr__(self, "t_ns", t_ns)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return int(self.t_ns.shape[0])

    @classmethod
    def from_samples(cls, samples: Sequence[FocSample]) -> "FocStream":
        return cls(
            np.array([s.t for s in samples], dtype=np.int64),
            np.array([s.F for s in samples]).reshape(-1, 3),
            np.array([s.point for s in samples]).reshape(-1, 2),
        )

    def samples(self) -> List[FocSample]:
        return [FocSample(int(t), F, tuple(p)) for t, F, p in zip(self.t_ns, self.F, self.points)]

    @property
    def foc(self) -> SampleStream:
        return SampleStream(self.t_ns, self.F, "foc")

    @property
    def point_stream(self) -> SampleStream:
        return SampleStream(self.t_ns, self.points, "fixation point")


class TrajectoryFrame(Enum):
    """Provenance label of a trajectory."""
    ESTIMATE = "estimate"
    GROUND_TRUTH = "ground-truth"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timestamped 3D positions in meters."""
    t_ns: np.ndarray
    positions: np.ndarray
    frame: TrajectoryFrame = TrajectoryFrame.ESTIMATE
    name: str = field(default="trajectory", compare=False)

    def __post_init__(self):
        t_ns = _check_timestamps(self.t_ns, self.name)
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if pos.shape[0] != t_ns.shape[0]:
            raise InputError(f"{self.name}: {t_ns.shape[0]} timestamps but {pos.shape[0]} positions")
        if not np.all(np.isfinite(pos)):
            raise InputError(f"{self.name}: non-finite positions")
        object.__setattr__(self, "t_ns", t_ns)
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return int(self.t_ns.shape[0])

    @property
    def span(self) -> Tuple[int, int]:
        if len(self) == 0:
            raise InputError(f"{self.name} is empty")
        return int(self.t_ns[0]), int(self.t_ns[-1])

    @property
    def duration_s(self) -> float:
        first, last = self.span
        return (last - first) / NS_PER_S

    def path_length(self) -> float:
        """Length of the polyline through all positions (m)."""
        if len(self) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.positions, axis=0), axis=1).sum())

    def window(self, t0: int, t1: int) -> "Trajectory":
        mask = (self.t_ns >= t0) & (self.t_ns <= t1)
        return Trajectory(self.t_ns[mask], self.positions[mask], self.frame, self.name)

    def resample(self, t_ns: np.ndarray) -> np.ndarray:
        """Linear interpolation of positions at ``t_ns``."""
        return SampleStream(self.t_ns, self.positions, self.name).resample(t_ns)

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "Trajectory":
        """Apply x -> R x + t to every position."""
        pos = self.positions @ np.asarray(rotation).T + np.asarray(translation).reshape(1, 3)
        return Trajectory(self.t_ns, pos, self.frame, self.name)


def quat_wxyz(rotation: Rotation) -> np.ndarray:
    """Quaternion(s) in scalar-first (w, x, y, z) order."""
    q = rotation.as_quat()
    return np.roll(q, 1, axis=-1)


def from_quat_wxyz(q) -> Rotation:
    """Rotation from scalar-first quaternion(s); renormalises."""
    q = np.asarray(q, dtype=np.float64)
    return Rotation.from_quat(np.roll(q, -1, axis=-1))
