"""
DepthEstimator - the primary entry point for estimating fixated-point depth.

This class orchestrates the estimation pipeline:
1. Integrates the gyro into the fixed start-of-service orientation
2. Rotates the accelerometer into that frame
3. Measures frequency-of-contact (affine tracker, or the simulator oracle)
4. Solves the sliding-window tau constraint on the fusion grid
5. Runs the depth observer and reconstructs the fixated point in 3D
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from tau_depth.config import RunConfig
from tau_depth.core import (
    NS_PER_S,
    FocStream,
    SampleStream,
    Trajectory,
    TrajectoryFrame,
    interp_linear,
)
from tau_depth.dataset import Dataset, load_dataset, write_trajectory
from tau_depth.derotation import derotate_accel, estimate_gyro_bias, integrate_gyro
from tau_depth.errors import DatasetError, ObserverError, RangeError, TauDepthError
from tau_depth.observer import DepthObserver, reconstruct_xyz
from tau_depth.output import diagnostics_row, write_diagnostics
from tau_depth.solver import WindowGrid, solve_axes
from tau_depth.tracking import AffineTracker, FocResult, FocSource, OracleFocSource

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class EstimateResult:
    """Container for an estimation run."""

    def __init__(self, trajectory: Trajectory, diagnostics: List[List[Any]],
                 foc: FocResult, failure: Optional[TauDepthError] = None,
                 metadata: Optional[Dict[str, Any]] = None,
                 warnings: Optional[List[str]] = None):
        self.trajectory = trajectory
        self.diagnostics = diagnostics
        self.foc = foc
        self.failure = failure
        self.metadata = metadata or {}
        self.warnings = warnings or []

    @property
    def complete(self) -> bool:
        return self.failure is None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            'samples': len(self.trajectory),
            'windows': len(self.diagnostics),
            'failure': str(self.failure) if self.failure else None,
            'foc': self.foc.to_dict(),
            'metadata': self.metadata,
            'warnings': self.warnings,
        }

    def write(self, trajectory_path: PathLike,
              diagnostics_path: Optional[PathLike] = None) -> Path:
        """Write the trajectory (and optionally the diagnostics); partial runs included."""
        path = write_trajectory(trajectory_path, self.trajectory)
        if diagnostics_path is not None:
            write_diagnostics(diagnostics_path, self.diagnostics)
        return path


@dataclass
class _FusionLoop:
    """Accumulates observer output over the fusion grid."""
    times: List[int] = field(default_factory=list)
    positions: List[np.ndarray] = field(default_factory=list)
    diagnostics: List[List[Any]] = field(default_factory=list)


class DepthEstimator:
    """
    Estimates the trajectory of the fixated scene point from a dataset.

    Usage:
        from tau_depth import DepthEstimator, RunConfig

        estimator = DepthEstimator(RunConfig())
        result = estimator.estimate_dir("datasets/sinusoid-xz")
        result.write("estimate.csv", "diagnostics.csv")
    """

    def __init__(self, config: Optional[RunConfig] = None, oracle_foc: bool = False,
                 center: Optional[Tuple[float, float]] = None):
        """
        Args:
            config: Run configuration
            oracle_foc: Feed the simulator's exact F instead of tracking
            center: Patch centre in first-frame pixels; defaults to the
                scenario's fixation centre, else the principal point
        """
        self.config = config or RunConfig()
        self.oracle_foc = oracle_foc
        self.center = center

    def estimate_dir(self, root: PathLike) -> EstimateResult:
        return self.estimate(load_dataset(root))

    def estimate(self, dataset: Dataset) -> EstimateResult:
        """
        Run the whole pipeline on one dataset.

        Tracking loss and observer failure do not raise: the result carries
        the output up to the failure and the error in ``failure``.

        Raises:
            ConfigError: if the configuration does not fit the dataset
            DatasetError: if the IMU streams do not cover the frames
        """
        config = self.config
        frame_rate = dataset.frames.frame_rate
        config.validate(frame_rate)
        started = time.perf_counter()

        bias = None
        if config.gyro_bias_interval_s > 0:
            bias = estimate_gyro_bias(dataset.gyro, config.gyro_bias_interval_s)
            logger.info("gyro bias %s rad/s", np.array2string(bias, precision=5))
        t0 = int(dataset.frames.t_ns[0])
        try:
            track = integrate_gyro(dataset.gyro, bias, config.gyro_rate_max).relative_to(t0)
        except RangeError as err:
            raise DatasetError(f"gyro stream does not cover the first frame: {err}") from err
        accel = derotate_accel(dataset.accel.slice(*track.span), track)

        source = self._source(dataset, config.decimation_step(frame_rate))
        foc = source.measure(track)
        loop, failure = self._fuse(foc.stream, accel)
        failure = foc.failure or failure

        elapsed = time.perf_counter() - started
        duration = (int(dataset.frames.t_ns[-1]) - t0) / NS_PER_S
        metadata = {
            'source': foc.source_type,
            'frames': len(dataset.frames),
            'frame_rate_hz': frame_rate,
            'wall_time_s': elapsed,
            'realtime_factor': duration / elapsed if elapsed > 0 else float("inf"),
        }
        metadata.update(foc.metadata)
        logger.info("processed %.2f s of data in %.2f s (%.1fx realtime, %.1f frames/s)",
                    duration, elapsed, metadata['realtime_factor'],
                    len(dataset.frames) / elapsed if elapsed > 0 else float("inf"))

        warnings = list(foc.warnings)
        if not loop.times:
            warnings.append("no depth estimate: observer never initialized")
            logger.warning("no depth estimate: observer never initialized")
        trajectory = Trajectory(np.array(loop.times, dtype=np.int64),
                                np.array(loop.positions).reshape(-1, 3),
                                TrajectoryFrame.ESTIMATE, "estimate")
        return EstimateResult(trajectory, loop.diagnostics, foc, failure, metadata, warnings)

    def _source(self, dataset: Dataset, decimation: int) -> FocSource:
        if self.oracle_foc:
            return OracleFocSource(dataset.oracle_foc(), decimation)
        config = self.config
        return AffineTracker(
            dataset.frames,
            dataset.intrinsics,
            options=config.tracker_options(),
            center=self.center or _scenario_center(dataset),
            patch_size=config.patch_size,
            sample_count=config.sample_count,
            seed=config.seed,
            decimation=decimation,
            median_filter=config.median_filter,
            ratio_eps=config.ratio_eps,
        )

    def _fuse(self, foc: FocStream, accel: SampleStream) -> Tuple[_FusionLoop, Optional[TauDepthError]]:
        """Solve windows on the fusion grid and drive the observer."""
        config = self.config
        options = config.solver_options()
        observer = DepthObserver(config.gain())
        loop = _FusionLoop()
        if len(foc) < 2:
            return loop, None

        window_ns = int(round(config.window_s * NS_PER_S))
        step_ns = int(round(NS_PER_S / config.fusion_rate_hz))
        first = max(int(foc.t_ns[0]), int(accel.t_ns[0])) + window_ns
        last = min(int(foc.t_ns[-1]), int(accel.t_ns[-1]))
        F, points = foc.foc, foc.point_stream
        dt = 1.0 / config.fusion_rate_hz

        for t_now in range(first, last + 1, step_ns):
            grid = WindowGrid.sample(F, accel, t_now, config.window_s, config.fusion_rate_hz)
            window = solve_axes(grid, options)
            try:
                state = observer.update(window, dt)
            except ObserverError as err:
                logger.error("%s", err)
                return loop, err
            loop.diagnostics.append(diagnostics_row(window, state.mode.value if state else None))
            if state is not None:
                loop.times.append(t_now)
                loop.positions.append(reconstruct_xyz(state, interp_linear(points, t_now)))
        logger.debug("fused %d windows, %d estimates", len(loop.diagnostics), len(loop.times))
        return loop, None


def _scenario_center(dataset: Dataset) -> Optional[Tuple[float, float]]:
    scenario = dataset.scenario()
    if not scenario:
        return None
    center = scenario.get("fixation", {}).get("center")
    return tuple(center) if center else None
