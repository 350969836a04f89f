"""
Exception hierarchy for the tau-depth pipeline.

Input-type errors subclass ``ValueError`` so callers that only catch
``ValueError`` keep working.
"""

from typing import Optional


class TauDepthError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TauDepthError, ValueError):
    """Invalid argument, stream or file content."""


class RangeError(InputError):
    """Query outside the span covered by a stream."""


class ConfigError(InputError):
    """Invalid run configuration."""


class ScenarioError(InputError):
    """Simulation scenario is invalid or leaves its validity envelope."""


class DatasetError(InputError):
    """Dataset directory is missing files or malformed."""


class DegeneracyError(TauDepthError, ArithmeticError):
    """A geometric quantity is singular (collapsed warp, vanishing ratios)."""


class NumericError(TauDepthError, ArithmeticError):
    """Non-finite intermediate result."""


class ContractError(TauDepthError, RuntimeError):
    """An operation was called on an object that does not satisfy its precondition."""


class ObserverError(TauDepthError, RuntimeError):
    """Observer state left its admissible region (e.g. depth crossed zero)."""


class AlignmentError(TauDepthError, ValueError):
    """Trajectory alignment is undetermined (too few or collinear points)."""


class TrackingLostError(TauDepthError, RuntimeError):
    """The patch tracker could not follow the template any more."""

    def __init__(self, reason: str, t_ns: Optional[int] = None):
        self.reason = reason
        self.t_ns = t_ns
        where = f" at t={t_ns} ns" if t_ns is not None else ""
        super().__init__(f"tracking lost{where}: {reason}")
