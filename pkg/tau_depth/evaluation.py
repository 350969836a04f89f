"""
Trajectory alignment and average trajectory error.

Estimates are resampled linearly onto the ground-truth clock over the window
where all sources are available, then aligned with a closed-form rigid
(rotation + translation, no scale) least-squares fit.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from tau_depth.core import Timestamp, Trajectory
from tau_depth.errors import AlignmentError, InputError

logger = logging.getLogger(__name__)

COLLINEAR_EPS = 1e-9
M_TO_CM = 100.0


@dataclass(frozen=True, eq=False)
class AlignedPair:
    """Estimate resampled on the truth clock and mapped by a rigid transform."""
    rotation: np.ndarray         # (3, 3)
    translation: np.ndarray      # (3,)
    t_ns: np.ndarray             # truth timestamps inside the window
    truth: np.ndarray            # (N, 3)
    estimate: np.ndarray         # (N, 3), after the transform
    window: Tuple[Timestamp, Timestamp]

    @property
    def errors_m(self) -> np.ndarray:
        """Per-sample l2 distance (m)."""
        return np.linalg.norm(self.estimate - self.truth, axis=1)


def evaluation_window(truth: Trajectory, *estimates: Trajectory) -> Tuple[Timestamp, Timestamp]:
    """
    Intersection of the availability spans of all sources.

    Raises:
        InputError: if the spans do not overlap
    """
    spans = [truth.span] + [e.span for e in estimates]
    start = max(s[0] for s in spans)
    end = min(s[1] for s in spans)
    if start >= end:
        raise InputError("trajectories have no overlapping time window")
    return start, end


def rigid_fit(source: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rotation R and translation t minimising sum ||target - (R source + t)||^2.

    Umeyama's closed form with the scale fixed to one.
    """
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    cov = (target - mu_t).T @ (source - mu_s) / source.shape[0]
    U, _, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    return R, mu_t - R @ mu_s


def _check_geometry(points: np.ndarray) -> None:
    if points.shape[0] < 3:
        raise AlignmentError(f"rigid alignment needs at least 3 points, got {points.shape[0]}")
    sv = np.linalg.svd(points - points.mean(axis=0), compute_uv=False)
    if sv[0] <= 0 or sv[1] <= COLLINEAR_EPS * sv[0]:
        raise AlignmentError("ground-truth points are collinear; rigid alignment is undetermined")


def _associate(estimate: Trajectory, truth: Trajectory,
               window: Optional[Tuple[Timestamp, Timestamp]]) -> Tuple[Tuple[Timestamp, Timestamp], Trajectory, np.ndarray]:
    window = window or evaluation_window(truth, estimate)
    truth_w = truth.window(*window)
    if len(truth_w) == 0:
        raise InputError("evaluation window holds no ground-truth samples")
    return window, truth_w, estimate.resample(truth_w.t_ns)


def align_rigid(estimate: Trajectory, truth: Trajectory,
                window: Optional[Tuple[Timestamp, Timestamp]] = None) -> AlignedPair:
    """
    Align ``estimate`` to ``truth`` over ``window`` (default: common span).

    Raises:
        AlignmentError: if the truth points in the window are collinear or too few
        InputError: if the window is empty
    """
    window, truth_w, est = _associate(estimate, truth, window)
    _check_geometry(truth_w.positions)
    R, t = rigid_fit(est, truth_w.positions)
    return AlignedPair(R, t, truth_w.t_ns, truth_w.positions, est @ R.T + t, window)


def unaligned_pair(estimate: Trajectory, truth: Trajectory,
                   window: Optional[Tuple[Timestamp, Timestamp]] = None) -> AlignedPair:
    """Time association only (identity transform)."""
    window, truth_w, est = _associate(estimate, truth, window)
    return AlignedPair(np.eye(3), np.zeros(3), truth_w.t_ns, truth_w.positions, est, window)


def ate(pair: AlignedPair) -> float:
    """
    Average trajectory error in centimetres: sqrt(mean ||X - X_est||^2).

    Raises:
        InputError: on an empty pair
    """
    if pair.truth.shape[0] == 0:
        raise InputError("cannot compute ATE over an empty window")
    return float(np.sqrt(np.mean(pair.errors_m ** 2)) * M_TO_CM)


@dataclass
class SequenceReport:
    """Per-sequence numbers: duration, path length and one ATE per estimate."""
    duration_s: float
    path_length_m: float
    ate_cm: Dict[str, float] = field(default_factory=dict)
    pairs: Dict[str, AlignedPair] = field(default_factory=dict)

    def to_rows(self) -> Sequence[Tuple[str, float]]:
        rows = [("duration [s]", self.duration_s), ("path length [m]", self.path_length_m)]
        rows.extend((f"ATE {name} [cm]", value) for name, value in self.ate_cm.items())
        return rows


def evaluate_sequence(truth: Trajectory, estimates: Dict[str, Trajectory],
                      align: bool = True) -> SequenceReport:
    """
    Evaluate every estimate over the window where all sources are available.

    Duration and path length are those of the ground truth inside that window.
    """
    if not estimates:
        raise InputError("no estimates to evaluate")
    window = evaluation_window(truth, *estimates.values())
    truth_w = truth.window(*window)
    report = SequenceReport(duration_s=truth_w.duration_s, path_length_m=truth_w.path_length())
    for name, est in estimates.items():
        pair = align_rigid(est, truth, window) if align else unaligned_pair(est, truth, window)
        report.pairs[name] = pair
        report.ate_cm[name] = ate(pair)
        logger.info("%s: ATE %.2f cm over %.2f s", name, report.ate_cm[name], report.duration_s)
    return report
