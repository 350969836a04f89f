"""
Exact frequency-of-contact replayed from a simulated dataset, bypassing the tracker.
"""

import logging

from tau_depth.core import FocStream
from tau_depth.derotation import OrientationTrack
from tau_depth.errors import InputError
from tau_depth.tracking.base import FocResult, FocSource

logger = logging.getLogger(__name__)


class OracleFocSource(FocSource):
    """Replays oracle F and fixation points, keeping every ``decimation``-th sample."""

    source_type = "oracle"

    def __init__(self, oracle: FocStream, decimation: int = 1):
        if decimation < 1:
            raise InputError(f"decimation step must be >= 1, got {decimation}")
        if len(oracle) == 0:
            raise InputError("oracle frequency-of-contact stream is empty")
        self.oracle = oracle
        self.decimation = decimation

    def measure(self, track: OrientationTrack) -> FocResult:
        # the first frame carries no finite-difference flow in tracker mode; drop it here too
        samples = self._decimate(self.oracle.samples(), self.decimation)[1:]
        logger.info("replaying %d oracle F samples", len(samples))
        return FocResult(
            samples=samples,
            source_type=self.source_type,
            metadata={'decimation': self.decimation},
        )
