"""Frequency-of-contact sources: affine patch tracking and the simulator oracle."""

from tau_depth.tracking.affine import (
    AffineTracker,
    PatchTemplate,
    TrackerOptions,
    track_frame,
)
from tau_depth.tracking.base import FocResult, FocSource
from tau_depth.tracking.flow import (
    AffineFlow,
    AffineWarp,
    flow_to_foc,
    median3_filter,
    midpoint_warp,
    warp_to_flow,
)
from tau_depth.tracking.oracle import OracleFocSource

__all__ = [
    "AffineFlow",
    "AffineTracker",
    "AffineWarp",
    "FocResult",
    "FocSource",
    "OracleFocSource",
    "PatchTemplate",
    "TrackerOptions",
    "flow_to_foc",
    "median3_filter",
    "midpoint_warp",
    "track_frame",
    "warp_to_flow",
]
