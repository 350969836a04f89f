"""
Validation of dataset directories before estimation.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from tau_depth.core import NS_PER_S, SampleStream
from tau_depth.errors import ConfigError, DatasetError


@dataclass
class ValidationResult:
    """Result of validating a dataset."""
    is_valid: bool
    errors: List[str]
    warnings: List[str]
    summary: Dict[str, Any] = field(default_factory=dict)


def _rate(stream: SampleStream) -> float:
    return float(NS_PER_S / np.median(np.diff(stream.t_ns)))


def validate_dataset(dataset, config=None) -> ValidationResult:
    """
    Check that a dataset can be processed end to end.

    Checks:
    - At least two frames, all listed frame files present
    - First frame matches the intrinsics image size
    - Gyro and accel streams cover the frame span
    - Decimation divides the frame rate (when a config is given)

    Warnings flag sequences shorter than one solver window, accelerometer
    rates below the fusion rate and irregular frame spacing.

    Args:
        dataset: Dataset opened with ``load_dataset``
        config: Optional RunConfig

    Returns:
        ValidationResult with validation status and messages
    """
    errors: List[str] = []
    warnings: List[str] = []
    summary: Dict[str, Any] = {"kind": dataset.kind.value}

    frames = dataset.frames
    if len(frames) < 2:
        errors.append(f"need at least two frames, found {len(frames)}")
        return ValidationResult(False, errors, warnings, summary)

    missing = frames.missing()
    if missing:
        errors.append(f"{len(missing)} frame file(s) missing, first: {missing[0]}")

    frame_span = (int(frames.t_ns[0]), int(frames.t_ns[-1]))
    frame_rate = frames.frame_rate
    summary.update({
        "frames": len(frames),
        "frame_rate_hz": frame_rate,
        "duration_s": (frame_span[1] - frame_span[0]) / NS_PER_S,
    })

    if not missing:
        try:
            first = next(iter(frames))[1]
        except DatasetError as err:
            errors.append(str(err))
        else:
            intr = dataset.intrinsics
            if first.shape != (intr.height, intr.width):
                errors.append(
                    f"frame size {first.shape[1]}x{first.shape[0]} does not match "
                    f"intrinsics {intr.width}x{intr.height}")

    for name, stream in (("gyro", dataset.gyro), ("accel", dataset.accel)):
        if len(stream) < 2:
            errors.append(f"{name} stream has fewer than two samples")
            continue
        summary[f"{name}_rate_hz"] = _rate(stream)
        if not stream.covers(*frame_span):
            errors.append(
                f"{name} stream [{stream.t_ns[0]}, {stream.t_ns[-1]}] ns does not cover "
                f"the frames [{frame_span[0]}, {frame_span[1]}] ns")

    steps = np.diff(frames.t_ns)
    if steps.max() > 1.5 * steps.min():
        warnings.append(
            f"irregular frame spacing: {steps.min() / 1e6:.2f} to {steps.max() / 1e6:.2f} ms")

    if config is not None:
        try:
            config.validate(frame_rate)
        except ConfigError as err:
            errors.append(str(err))
        if summary["duration_s"] <= config.window_s:
            warnings.append(
                f"sequence of {summary['duration_s']:.2f} s is not longer than the "
                f"{config.window_s} s solver window; no depth will be estimated")
        accel_rate: Optional[float] = summary.get("accel_rate_hz")
        if accel_rate is not None and accel_rate < config.fusion_rate_hz:
            warnings.append(
                f"accelerometer rate {accel_rate:.1f} Hz is below the "
                f"{config.fusion_rate_hz} Hz fusion rate")

    return ValidationResult(not errors, errors, warnings, summary)
