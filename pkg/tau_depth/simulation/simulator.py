"""
Synthetic camera + IMU sequences of a textured plane with exact oracles.

World coordinates are the camera frame at t = 0. The fixated scene point P
is where the patch centre's first-frame ray meets the plane; relative to the
moving camera it sits at X(t) = P - p(t), expressed in the fixed
(start-of-service) orientation.
"""

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from tau_depth.core import (
    CameraIntrinsics,
    FocStream,
    SampleStream,
    Timestamp,
    Trajectory,
    TrajectoryFrame,
    to_calibrated,
    to_nanoseconds,
    to_pixel,
)
from tau_depth.errors import ScenarioError
from tau_depth.simulation.render import DEFAULT_SUPERSAMPLE, PlaneRenderer
from tau_depth.simulation.scene import PlanarScene
from tau_depth.simulation.trajectory import (
    RotationSpec,
    RotationTerm,
    TrajectorySpec,
    excitations_from_dicts,
)
from tau_depth.tracking.flow import AffineFlow, AffineWarp

logger = logging.getLogger(__name__)

CHECK_RATE_HZ = 1000.0
DEFAULT_PATCH_SIZE = 100
DEFAULT_INTRINSICS = CameraIntrinsics(200.0, 200.0, 212.0, 120.0, 424, 240)


@dataclass(frozen=True)
class SimulationRates:
    """Sensor and ground-truth rates (Hz)."""
    frame: float = 90.0
    gyro: float = 400.0
    accel: float = 250.0
    truth: float = 200.0

    def __post_init__(self):
        for name in ("frame", "gyro", "accel", "truth"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} rate must be positive")


def sample_times(rate: float, duration: float, endpoint: bool = True) -> np.ndarray:
    """k / rate for k = 0 .. round(rate * duration) (last one excluded unless ``endpoint``)."""
    count = int(round(rate * duration))
    k = np.arange(count + 1 if endpoint else count)
    return k / rate


def homography_to_affine(H: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """First-order (affine) approximation of homography ``H`` around calibrated point ``x0``."""
    xh = np.array([x0[0], x0[1], 1.0])
    img = H @ xh
    w = img[2]
    jac = (H[:2, :2] * w - np.outer(img[:2], H[2, :2])) / (w * w)
    m = np.empty((2, 3))
    m[:, :2] = jac
    m[:, 2] = img[:2] / w - jac @ np.asarray(x0[:2])
    return m


class OracleModel:
    """Closed-form ground truth for one scene, trajectory and fixation point."""

    def __init__(self, scene: PlanarScene, spec: TrajectorySpec,
                 fixation: Tuple[float, float] = (0.0, 0.0)):
        self.scene = scene
        self.spec = spec
        self.fixation = np.asarray(fixation, dtype=np.float64)
        self.P = scene.point_at(*self.fixation)

    def relative_position(self, t) -> np.ndarray:
        """X(t) = P - p(t), shape (N, 3)."""
        return self.P - self.spec.position(t)

    def relative_velocity(self, t) -> np.ndarray:
        return -self.spec.velocity(t)

    def relative_acceleration(self, t) -> np.ndarray:
        return -self.spec.acceleration(t)

    def depth(self, t) -> np.ndarray:
        return self.relative_position(t)[:, 2]

    def foc(self, t) -> np.ndarray:
        """F(t) = X'(t) / Z(t), shape (N, 3)."""
        return self.relative_velocity(t) / self.depth(t)[:, None]

    def tau(self, t) -> np.ndarray:
        """Time-to-contact -Z / Z'."""
        v = self.relative_velocity(t)[:, 2]
        with np.errstate(divide="ignore"):
            return np.where(v != 0, -self.depth(t) / np.where(v != 0, v, 1.0), np.inf)

    def point(self, t) -> np.ndarray:
        """Fixation point in de-rotated calibrated coordinates, shape (N, 2)."""
        X = self.relative_position(t)
        return X[:, :2] / X[:, 2:3]

    def homography(self, t: float) -> np.ndarray:
        """First-frame calibrated coordinates to de-rotated coordinates at ``t``: I - p n^T."""
        p = self.spec.position(t)[0]
        return np.eye(3) - np.outer(p, self.scene.n)

    def warp(self, t: float, t_ns: Optional[Timestamp] = None) -> AffineWarp:
        """Affine warp at ``t``: the homography linearized at the fixation point."""
        m = homography_to_affine(self.homography(t), self.fixation)
        return AffineWarp(m.reshape(-1), to_nanoseconds(t) if t_ns is None else t_ns)

    def flow(self, t: float) -> AffineFlow:
        """Affine flow induced by the current relative velocity and plane."""
        p = self.spec.position(t)[0]
        return AffineFlow.from_motion(self.relative_velocity(t)[0], self.scene.normal_at(p),
                                      to_nanoseconds(t))


def oracle_foc(spec: TrajectorySpec, scene: PlanarScene, t: float,
               fixation: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Exact frequency-of-contact X'/Z of the fixated point at ``t`` seconds."""
    if not 0.0 <= t <= spec.duration:
        raise ScenarioError(f"t={t} s outside the scenario duration {spec.duration} s")
    return OracleModel(scene, spec, fixation).foc(t)[0]


@dataclass(frozen=True, eq=False)
class OracleBundle:
    """Exact per-frame quantities and the ground-truth trajectory."""
    t_ns: np.ndarray            # frame timestamps
    F: np.ndarray               # (N, 3)
    tau: np.ndarray             # (N,)
    warps: List[AffineWarp]
    points: np.ndarray          # (N, 2)
    trajectory: Trajectory      # fixated point X(t), fixed frame
    accel_t_ns: np.ndarray
    relative_accel: np.ndarray  # X'' at the accelerometer timestamps, fixed frame

    @property
    def foc_stream(self) -> FocStream:
        return FocStream(self.t_ns, self.F, self.points)


@dataclass(frozen=True, eq=False)
class SimulatedSequence:
    """Rendered frames, IMU streams and oracles of one run."""
    intrinsics: CameraIntrinsics
    frames: List[Tuple[Timestamp, np.ndarray]]
    gyro: SampleStream
    accel: SampleStream
    oracle: OracleBundle


def _check_validity(model: OracleModel, spec: TrajectorySpec, intrinsics: CameraIntrinsics,
                    frame_times: np.ndarray, patch_size: int) -> None:
    dense = np.linspace(0.0, spec.duration, int(round(spec.duration * CHECK_RATE_HZ)) + 1)
    depth = model.depth(dense)
    if depth.min() < spec.z_margin:
        k = int(np.argmin(depth))
        raise ScenarioError(
            f"fixated depth {depth[k]:.3f} m at t={dense[k]:.3f} s is below the "
            f"{spec.z_margin} m margin")
    if np.any(1.0 - spec.position(dense) @ model.scene.n <= 0):
        raise ScenarioError("camera crosses the plane")

    # fixation point must stay in view with room for the patch
    X = model.relative_position(frame_times)
    X_cam = spec.rotation.rotation(frame_times).inv().apply(X)
    if np.any(X_cam[:, 2] <= 0):
        raise ScenarioError("fixated point is behind the camera")
    uv = to_pixel(X_cam[:, :2] / X_cam[:, 2:3], intrinsics)
    half = patch_size / 2.0
    inside = ((uv[:, 0] >= half) & (uv[:, 0] <= intrinsics.width - half)
              & (uv[:, 1] >= half) & (uv[:, 1] <= intrinsics.height - half))
    if not inside.all():
        k = int(np.argmin(inside))
        raise ScenarioError(f"patch leaves the field of view at t={frame_times[k]:.3f} s")


def simulate(scene: PlanarScene, spec: TrajectorySpec,
             rates: Optional[SimulationRates] = None,
             intrinsics: Optional[CameraIntrinsics] = None,
             fixation_center: Optional[Tuple[float, float]] = None,
             patch_size: int = DEFAULT_PATCH_SIZE,
             seed: int = 0,
             supersample: int = DEFAULT_SUPERSAMPLE,
             workers: Optional[int] = None) -> SimulatedSequence:
    """
    Render frames, synthesize IMU streams and evaluate oracles.

    Args:
        scene: Textured plane
        spec: Camera motion and IMU error model
        rates: Sensor rates
        intrinsics: Camera intrinsics
        fixation_center: Patch centre in first-frame pixels (principal point by default)
        patch_size: Patch side in pixels, for the field-of-view check
        seed: Seed of the IMU noise
        supersample: Rays per pixel along each axis
        workers: Rendering threads

    Returns:
        SimulatedSequence

    Raises:
        ScenarioError: if the fixated depth drops below the margin or the patch
            leaves the field of view
    """
    rates = rates or SimulationRates()
    intrinsics = intrinsics or DEFAULT_INTRINSICS
    center = (intrinsics.cx, intrinsics.cy) if fixation_center is None else fixation_center
    fixation = tuple(to_calibrated(center, intrinsics))
    model = OracleModel(scene, spec, fixation)

    frame_times = sample_times(rates.frame, spec.duration, endpoint=False)
    if frame_times.size < 2:
        raise ScenarioError("scenario is too short for two frames")
    _check_validity(model, spec, intrinsics, frame_times, patch_size)

    # frames
    renderer = PlaneRenderer(scene, intrinsics, supersample)
    rotations = spec.rotation.rotation(frame_times)
    images = renderer.render_many(rotations, spec.position(frame_times), workers)
    frame_ns = to_nanoseconds(frame_times)
    frames = list(zip((int(t) for t in frame_ns), images))

    # IMU: a^m_c = R^T (-X'' + g) + bias + noise, gyro = body rate + bias + noise
    rng = np.random.default_rng(seed)
    accel_times = sample_times(rates.accel, spec.duration)
    gyro_times = sample_times(rates.gyro, spec.duration)
    specific = spec.acceleration(accel_times) + np.asarray(spec.gravity)
    accel_c = spec.rotation.rotation(accel_times).inv().apply(specific)
    accel_c += np.asarray(spec.accel_bias) + rng.normal(0.0, spec.accel_noise, accel_c.shape)
    gyro_c = spec.rotation.body_rate(gyro_times)
    gyro_c += np.asarray(spec.gyro_bias) + rng.normal(0.0, spec.gyro_noise, gyro_c.shape)

    truth_times = sample_times(rates.truth, spec.duration)
    oracle = OracleBundle(
        t_ns=frame_ns,
        F=model.foc(frame_times),
        tau=model.tau(frame_times),
        warps=[model.warp(t, int(t_ns)) for t, t_ns in zip(frame_times, frame_ns)],
        points=model.point(frame_times),
        trajectory=Trajectory(to_nanoseconds(truth_times), model.relative_position(truth_times),
                              TrajectoryFrame.GROUND_TRUTH, "groundtruth"),
        accel_t_ns=to_nanoseconds(accel_times),
        relative_accel=model.relative_acceleration(accel_times),
    )
    logger.info("simulated %.2f s: %d frames, %d gyro and %d accel samples",
                spec.duration, len(frames), gyro_times.size, accel_times.size)
    return SimulatedSequence(
        intrinsics=intrinsics,
        frames=frames,
        gyro=SampleStream(to_nanoseconds(gyro_times), gyro_c, "gyro"),
        accel=SampleStream(to_nanoseconds(accel_times), accel_c, "accel"),
        oracle=oracle,
    )


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one simulated dataset."""
    name: str
    scene: PlanarScene
    trajectory: TrajectorySpec
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    rates: SimulationRates = field(default_factory=SimulationRates)
    fixation_center: Optional[Tuple[float, float]] = None
    patch_size: int = DEFAULT_PATCH_SIZE
    seed: int = 0
    supersample: int = DEFAULT_SUPERSAMPLE

    def run(self, workers: Optional[int] = None) -> SimulatedSequence:
        return simulate(self.scene, self.trajectory, self.rates, self.intrinsics,
                        self.fixation_center, self.patch_size, self.seed,
                        self.supersample, workers)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], name: str = "scenario") -> "Scenario":
        """
        Build a scenario from its JSON form.

        Raises:
            ScenarioError: on missing sections or invalid values
        """
        try:
            traj = dict(data.get("trajectory", {}))
            noise = dict(data.get("noise", {}))
            rotation = RotationSpec(tuple(RotationTerm(**r) for r in traj.get("rotation", [])))
            spec = TrajectorySpec(
                duration=float(data["duration"]),
                excitations=excitations_from_dicts(traj.get("excitations", [])),
                drift=tuple(traj.get("drift", (0.0, 0.0, 0.0))),
                rotation=rotation,
                gravity=tuple(traj.get("gravity", (0.0, -9.81, 0.0))),
                accel_noise=float(noise.get("accel", 0.0)),
                gyro_noise=float(noise.get("gyro", 0.0)),
                accel_bias=tuple(noise.get("accel_bias", (0.0, 0.0, 0.0))),
                gyro_bias=tuple(noise.get("gyro_bias", (0.0, 0.0, 0.0))),
                z_margin=float(traj.get("z_margin", 0.3)),
            )
            intr = data.get("intrinsics")
            fixation = data.get("fixation", {})
            center = fixation.get("center")
            return cls(
                name=str(data.get("name", name)),
                scene=PlanarScene.from_dict(data["scene"]),
                trajectory=spec,
                intrinsics=CameraIntrinsics(**intr) if intr else DEFAULT_INTRINSICS,
                rates=SimulationRates(**data.get("rates", {})),
                fixation_center=tuple(center) if center is not None else None,
                patch_size=int(fixation.get("patch_size", DEFAULT_PATCH_SIZE)),
                seed=int(data.get("seed", 0)),
                supersample=int(data.get("render", {}).get("supersample", DEFAULT_SUPERSAMPLE)),
            )
        except ScenarioError:
            raise
        except KeyError as err:
            raise ScenarioError(f"scenario is missing {err}") from err
        except (TypeError, ValueError) as err:
            raise ScenarioError(f"invalid scenario: {err}") from err

    def to_dict(self) -> Dict[str, Any]:
        intr = self.intrinsics
        spec = self.trajectory
        traj = spec.to_dict()
        return {
            "name": self.name,
            "duration": spec.duration,
            "seed": self.seed,
            "intrinsics": {"fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy,
                           "width": intr.width, "height": intr.height},
            "rates": {"frame": self.rates.frame, "gyro": self.rates.gyro,
                      "accel": self.rates.accel, "truth": self.rates.truth},
            "scene": self.scene.to_dict(),
            "fixation": {"center": list(self.fixation_center) if self.fixation_center else None,
                         "patch_size": self.patch_size},
            "trajectory": {k: traj[k] for k in ("drift", "excitations", "rotation", "gravity", "z_margin")},
            "noise": {"accel": spec.accel_noise, "gyro": spec.gyro_noise,
                      "accel_bias": list(spec.accel_bias), "gyro_bias": list(spec.gyro_bias)},
            "render": {"supersample": self.supersample},
        }


def bundled_scenarios() -> List[str]:
    """Names of the scenarios shipped with the package."""
    folder = resources.files("tau_depth").joinpath("scenarios")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def load_scenario(source: Union[str, Path]) -> Scenario:
    """
    Load a scenario from a JSON file, or a bundled scenario by name.

    Raises:
        ScenarioError: if the file cannot be found or parsed
    """
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        if not path.is_file():
            raise ScenarioError(f"scenario file not found: {path}")
        text = path.read_text(encoding="utf-8")
        name = path.stem
    else:
        resource = resources.files("tau_depth").joinpath("scenarios").joinpath(f"{source}.json")
        if not resource.is_file():
            raise ScenarioError(
                f"unknown scenario {source!r}; bundled: {', '.join(bundled_scenarios())}")
        text = resource.read_text(encoding="utf-8")
        name = str(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(f"scenario {source} is not valid JSON: {err}") from err
    return Scenario.from_dict(data, name)
