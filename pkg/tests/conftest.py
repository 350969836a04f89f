"""
Shared fixtures: a small synthetic scenario and its dataset directory.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from tau_depth.core import CameraIntrinsics, SampleStream
from tau_depth.dataset import ACCEL_FILE, GYRO_FILE, write_dataset, write_frames, write_imu, write_intrinsics
from tau_depth.simulation import (
    Excitation,
    PlanarScene,
    Scenario,
    SimulationRates,
    TextureSpec,
    TrajectorySpec,
)

SMALL_INTRINSICS = CameraIntrinsics(fx=60.0, fy=60.0, cx=40.0, cy=30.0, width=80, height=60)
SMOOTH_TEXTURE = TextureSpec(kind="noise", seed=4, octaves=2, contrast=0.9, cell=16.0, period=256.0)


def small_scenario(duration=6.0, excitations=None, name="small", **kwargs):
    """Fronto-parallel plane 1.8 m away, oscillating along z unless told otherwise."""
    if excitations is None:
        excitations = (Excitation("z", 3.5, 0.5),)
    options = dict(
        name=name,
        scene=PlanarScene.fronto_parallel(1.8, SMOOTH_TEXTURE),
        trajectory=TrajectorySpec(duration=duration, excitations=tuple(excitations)),
        intrinsics=SMALL_INTRINSICS,
        rates=SimulationRates(frame=60.0, gyro=200.0, accel=200.0, truth=100.0),
        fixation_center=(40.0, 30.0),
        patch_size=20,
        seed=5,
        supersample=1,
    )
    options.update(kwargs)
    return Scenario(**options)


@pytest.fixture(scope="session")
def scenario():
    return small_scenario()


@pytest.fixture(scope="session")
def sequence(scenario):
    return scenario.run(workers=1)


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory, scenario, sequence):
    """The small scenario written as a dataset directory."""
    root = tmp_path_factory.mktemp("datasets") / "small"
    write_dataset(root, sequence, scenario.to_dict())
    return root


def write_recorded_dataset(root, n_frames=3, rate=30.0, imu_end_ns=200_000_000):
    """Minimal recorded dataset: intrinsics, flat IMU streams and flat frames."""
    root.mkdir(parents=True, exist_ok=True)
    write_intrinsics(root / "intrinsics.txt", SMALL_INTRINSICS)
    t_imu = np.arange(0, imu_end_ns + 1, 5_000_000, dtype=np.int64)
    zeros = np.zeros((len(t_imu), 3))
    write_imu(root / GYRO_FILE, SampleStream(t_imu, zeros, "gyro"), "gyro")
    write_imu(root / ACCEL_FILE, SampleStream(t_imu, zeros + [0.0, -9.81, 0.0], "accel"), "accel")
    frames = [(int(round(k / rate * 1e9)), np.full((60, 80), 10 * k, dtype=np.uint8))
              for k in range(n_frames)]
    write_frames(root, frames)
    return root
