"""
Analytic camera motion: acceleration sinusoids with optional active spans
plus linear drift for translation, and a sinusoidal rotation vector for
orientation. Every quantity has a closed form; nothing is differentiated
numerically.

World coordinates are the camera frame at t = 0, so the camera starts at the
origin with identity orientation.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from tau_depth.core import as_vec3
from tau_depth.errors import ScenarioError

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}
DEFAULT_GRAVITY = (0.0, -9.81, 0.0)


def _axis(value) -> int:
    if isinstance(value, str):
        if value not in AXIS_INDEX:
            raise ScenarioError(f"unknown axis {value!r}")
        return AXIS_INDEX[value]
    if value not in (0, 1, 2):
        raise ScenarioError(f"axis index must be 0, 1 or 2, got {value}")
    return int(value)


@dataclass(frozen=True)
class Excitation:
    """
    Camera acceleration a(t) = amplitude * sin(w (t - start) + phase) on one
    axis while start <= t < end, zero otherwise.

    Velocity and position start at zero and stay continuous; after ``end``
    the camera coasts at the velocity reached. With phase = pi/2 and a span
    of whole periods the term is a pure oscillation p = A/w^2 (1 - cos w t).
    """
    axis: int
    amplitude: float         # m/s^2
    frequency: float         # Hz
    phase: float = np.pi / 2
    start: float = 0.0
    end: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "axis", _axis(self.axis))
        if not self.frequency > 0:
            raise ScenarioError(f"excitation frequency must be positive, got {self.frequency}")
        if self.end is not None and self.end <= self.start:
            raise ScenarioError("excitation span must end after it starts")

    @classmethod
    def from_position_amplitude(cls, axis, amplitude_m: float, frequency: float, **kwargs) -> "Excitation":
        """Oscillation with peak displacement ``2 * amplitude_m`` (acceleration A = B w^2)."""
        w = 2 * np.pi * frequency
        return cls(axis, amplitude_m * w * w, frequency, **kwargs)

    @property
    def omega(self) -> float:
        return 2 * np.pi * self.frequency

    def _tau(self, t: np.ndarray) -> np.ndarray:
        span = np.inf if self.end is None else self.end - self.start
        return np.clip(t - self.start, 0.0, span)

    def _v(self, tau):
        w, A, phi = self.omega, self.amplitude, self.phase
        return A / w * (np.cos(phi) - np.cos(w * tau + phi))

    def _p(self, tau):
        w, A, phi = self.omega, self.amplitude, self.phase
        return A / w * tau * np.cos(phi) - A / w ** 2 * (np.sin(w * tau + phi) - np.sin(phi))

    def _coast(self, t: np.ndarray) -> np.ndarray:
        if self.end is None:
            return np.zeros_like(t)
        v_end = self._v(self.end - self.start)
        return np.where(t > self.end, v_end * (t - self.end), 0.0)

    def acceleration(self, t: np.ndarray) -> np.ndarray:
        active = (t >= self.start) & ((t < self.end) if self.end is not None else True)
        return np.where(active, self.amplitude * np.sin(self.omega * self._tau(t) + self.phase), 0.0)

    def velocity(self, t: np.ndarray) -> np.ndarray:
        return self._v(self._tau(t))

    def position(self, t: np.ndarray) -> np.ndarray:
        return self._p(self._tau(t)) + self._coast(t)


@dataclass(frozen=True)
class RotationTerm:
    """Rotation-vector component amplitude * (sin(w t + phase) - sin(phase)) about one axis."""
    axis: int
    amplitude: float      # rad
    frequency: float      # Hz
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "axis", _axis(self.axis))
        if not self.frequency > 0:
            raise ScenarioError(f"rotation frequency must be positive, got {self.frequency}")

    @property
    def omega(self) -> float:
        return 2 * np.pi * self.frequency


def _skew(v: np.ndarray) -> np.ndarray:
    """Stacked cross-product matrices of (N, 3) vectors."""
    z = np.zeros(v.shape[0])
    return np.stack([
        np.stack([z, -v[:, 2], v[:, 1]], axis=-1),
        np.stack([v[:, 2], z, -v[:, 0]], axis=-1),
        np.stack([-v[:, 1], v[:, 0], z], axis=-1),
    ], axis=1)


def right_jacobian(theta: np.ndarray) -> np.ndarray:
    """Right Jacobian of SO(3) for (N, 3) rotation vectors: R^T R' = [J_r(theta) theta']x."""
    theta = np.atleast_2d(theta)
    angle = np.linalg.norm(theta, axis=1)
    small = angle < 1e-6
    safe = np.where(small, 1.0, angle)
    c1 = np.where(small, 0.5 - angle ** 2 / 24.0, (1.0 - np.cos(safe)) / safe ** 2)
    c2 = np.where(small, 1.0 / 6.0 - angle ** 2 / 120.0, (safe - np.sin(safe)) / safe ** 3)
    k = _skew(theta)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye - c1[:, None, None] * k + c2[:, None, None] * (k @ k)


@dataclass(frozen=True)
class RotationSpec:
    """Orientation R(t) = exp([theta(t)]x) with theta a sum of sinusoidal terms."""
    terms: Tuple[RotationTerm, ...] = ()

    def theta(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.zeros((t.size, 3))
        for term in self.terms:
            out[:, term.axis] += term.amplitude * (np.sin(term.omega * t + term.phase) - np.sin(term.phase))
        return out

    def theta_dot(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.zeros((t.size, 3))
        for term in self.terms:
            out[:, term.axis] += term.amplitude * term.omega * np.cos(term.omega * t + term.phase)
        return out

    def rotation(self, t) -> Rotation:
        """Camera-to-world orientation at ``t`` (seconds)."""
        return Rotation.from_rotvec(self.theta(t))

    def body_rate(self, t) -> np.ndarray:
        """Angular velocity in the camera frame (rad/s), shape (N, 3)."""
        theta = self.theta(t)
        return np.einsum("nij,nj->ni", right_jacobian(theta), self.theta_dot(t))


@dataclass(frozen=True)
class TrajectorySpec:
    """
    Camera motion and IMU error model.

    Camera position p(t) = drift * t + sum of excitation terms; the scene
    point relative to the camera moves as X(t) = P - p(t), so X'' = -p''.
    """
    duration: float
    excitations: Tuple[Excitation, ...] = ()
    drift: Tuple[float, float, float] = (0.0, 0.0, 0.0)   # m/s
    rotation: RotationSpec = field(default_factory=RotationSpec)
    gravity: Tuple[float, float, float] = DEFAULT_GRAVITY
    accel_noise: float = 0.0                               # m/s^2
    gyro_noise: float = 0.0                                # rad/s
    accel_bias: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    gyro_bias: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    z_margin: float = 0.3                                  # m

    def __post_init__(self):
        if not self.duration > 0:
            raise ScenarioError(f"duration must be positive, got {self.duration}")
        if self.accel_noise < 0 or self.gyro_noise < 0:
            raise ScenarioError("noise levels must be non-negative")
        for name in ("drift", "gravity", "accel_bias", "gyro_bias"):
            object.__setattr__(self, name, tuple(as_vec3(getattr(self, name), name)))
        object.__setattr__(self, "excitations", tuple(self.excitations))

    def _sum(self, t, method: str) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.zeros((t.size, 3))
        for term in self.excitations:
            out[:, term.axis] += getattr(term, method)(t)
        return out

    def position(self, t) -> np.ndarray:
        """Camera position p(t) in world coordinates, shape (N, 3)."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        return self._sum(t, "position") + np.outer(t, self.drift)

    def velocity(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        return self._sum(t, "velocity") + np.asarray(self.drift)

    def acceleration(self, t) -> np.ndarray:
        return self._sum(t, "acceleration")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "duration": self.duration,
            "drift": list(self.drift),
            "excitations": [
                {"axis": "xyz"[e.axis], "amplitude": e.amplitude, "frequency": e.frequency,
                 "phase": e.phase, "start": e.start, "end": e.end}
                for e in self.excitations
            ],
            "rotation": [
                {"axis": "xyz"[r.axis], "amplitude": r.amplitude, "frequency": r.frequency, "phase": r.phase}
                for r in self.rotation.terms
            ],
            "gravity": list(self.gravity),
            "z_margin": self.z_margin,
        }


def excitations_from_dicts(items: Sequence[Dict[str, Any]]) -> Tuple[Excitation, ...]:
    """Build excitation terms; ``position_amplitude`` (m) may replace ``amplitude`` (m/s^2)."""
    out = []
    for item in items:
        item = dict(item)
        try:
            if "position_amplitude" in item:
                out.append(Excitation.from_position_amplitude(
                    item.pop("axis"), item.pop("position_amplitude"), item.pop("frequency"), **item))
            else:
                out.append(Excitation(**item))
        except TypeError as err:
            raise ScenarioError(f"bad excitation entry {item}: {err}") from err
    return tuple(out)
