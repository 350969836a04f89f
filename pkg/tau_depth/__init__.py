"""
tau-depth

Depth of a fixated scene point from a monocular camera and an IMU, via the
time-to-contact (tau) constraint, plus a planar-scene simulator with exact
oracles and trajectory evaluation.

Usage:
    from tau_depth import DepthEstimator, RunConfig

    estimator = DepthEstimator(RunConfig())
    result = estimator.estimate_dir("datasets/sinusoid-xz")
    result.write("estimate.csv")
"""

from .config import RunConfig, load_config
from .dataset import DatasetKind, detect_dataset_kind, load_dataset
from .errors import InputError, TauDepthError, TrackingLostError
from .evaluation import ate, evaluate_sequence
from .pipeline import DepthEstimator, EstimateResult

__version__ = "0.2.0"
__all__ = [
    "DatasetKind",
    "DepthEstimator",
    "EstimateResult",
    "InputError",
    "RunConfig",
    "TauDepthError",
    "TrackingLostError",
    "ate",
    "detect_dataset_kind",
    "evaluate_sequence",
    "load_config",
    "load_dataset",
]
