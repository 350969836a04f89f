"""
Base class for frequency-of-contact sources.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from tau_depth.core import FocSample, FocStream
from tau_depth.derotation import OrientationTrack
from tau_depth.errors import TrackingLostError
from tau_depth.tracking.flow import AffineWarp


@dataclass
class FocResult:
    """Result of measuring frequency-of-contact over a sequence."""
    samples: List[FocSample]
    source_type: str
    warps: List[AffineWarp] = field(default_factory=list)
    failure: Optional[TrackingLostError] = None
    metadata: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def stream(self) -> FocStream:
        if not self.samples:
            return FocStream(np.zeros(0, dtype=np.int64), np.zeros((0, 3)), np.zeros((0, 2)))
        return FocStream.from_samples(self.samples)

    @property
    def complete(self) -> bool:
        return self.failure is None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            'source_type': self.source_type,
            'sample_count': len(self.samples),
            'failure': str(self.failure) if self.failure else None,
            'metadata': self.metadata,
            'warnings': self.warnings,
        }


class FocSource(ABC):
    """
    Abstract base class for frequency-of-contact sources.

    A source turns one sequence into a stream of FocSamples in the fixed
    start-of-service frame.
    """

    source_type: str = "base"

    @abstractmethod
    def measure(self, track: OrientationTrack) -> FocResult:
        """Measure F over the sequence, given the orientation track."""

    @staticmethod
    def _decimate(items: list, step: int) -> list:
        """Keep every ``step``-th item, starting with the first."""
        return items[::step]
