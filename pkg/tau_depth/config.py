"""
Run configuration: defaults, ``key = value`` files and command-line overrides.
"""

import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from tau_depth.errors import ConfigError
from tau_depth.observer import ObserverGain
from tau_depth.solver import SolverOptions
from tau_depth.tracking.affine import TrackerOptions

logger = logging.getLogger(__name__)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class RunConfig:
    """Options for one estimation run."""
    window_s: float = 2.0             # solver window length
    fusion_rate_hz: float = 100.0     # window grid and observer rate
    gate_threshold: float = 2.0       # mean-removed RMS acceleration (m/s^2)
    observer_l1: float = 2.0          # depth gain
    observer_l2: float = 20.0         # depth-rate gain
    patch_size: int = 100             # template side (px)
    sample_count: int = 4000          # template pixels kept
    decimate_hz: Optional[float] = None   # tracker output rate, None = frame rate
    detq_rel: float = 1e-8            # posedness threshold relative to Q11 Q22
    ratio_eps: float = 1e-8           # axial-motion threshold on a3, a6
    z_min: float = 0.05               # smallest admissible depth (m)
    det_min: float = 1e-6             # smallest admissible warp determinant
    max_iters: int = 20               # tracker iterations per frame
    tol: float = 1e-4                 # tracker convergence threshold
    max_rms_residual: float = 0.25    # tracker photometric RMS limit
    median_filter: bool = False       # median-of-3 on the affine flow
    gyro_bias_interval_s: float = 0.0  # stationary interval for gyro bias, 0 = off
    gyro_rate_max: float = 10.0       # gyro sanity bound (rad/s)
    seed: int = 0                     # template subsampling seed

    def validate(self, frame_rate: Optional[float] = None) -> "RunConfig":
        """
        Check value ranges and, given the frame rate, that decimation divides it.

        Raises:
            ConfigError: on the first violation
        """
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or value is None:
                continue
            if f.name in ("gyro_bias_interval_s", "seed"):
                if value < 0:
                    raise ConfigError(f"{f.name} must be non-negative, got {value}")
            elif not value > 0:
                raise ConfigError(f"{f.name} must be positive, got {value}")
        if self.sample_count < 6:
            raise ConfigError("sample_count must be at least 6")
        self.gain()
        if frame_rate is not None:
            self.decimation_step(frame_rate)
        return self

    def decimation_step(self, frame_rate: float) -> int:
        """Number of frames between emitted warps."""
        if self.decimate_hz is None:
            return 1
        ratio = frame_rate / self.decimate_hz
        step = int(round(ratio))
        if step < 1 or abs(ratio - step) > 1e-6:
            raise ConfigError(
                f"decimation rate {self.decimate_hz} Hz does not divide the frame rate {frame_rate} Hz")
        return step

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            window_s=self.window_s,
            rate_hz=self.fusion_rate_hz,
            gate_threshold=self.gate_threshold,
            z_min=self.z_min,
            detq_rel=self.detq_rel,
        )

    def tracker_options(self) -> TrackerOptions:
        return TrackerOptions(
            max_iters=self.max_iters,
            tol=self.tol,
            det_min=self.det_min,
            max_rms_residual=self.max_rms_residual,
        )

    def gain(self) -> ObserverGain:
        return ObserverGain(self.observer_l1, self.observer_l2)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with the given values replaced; ``None`` values are ignored."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _convert(name: str, raw: str, default: Any) -> Any:
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if text.lower() in ("none", ""):
            return None
        return float(text)
    except ValueError:
        raise ConfigError(f"invalid value for {name}: {raw!r}") from None


def parse_config_text(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """
    Parse ``key = value`` lines; ``#`` starts a comment.

    Raises:
        ConfigError: on malformed lines, unknown keys or bad values
    """
    config = base or RunConfig()
    defaults = config.to_dict()
    values: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in defaults:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        values[key] = _convert(key, raw, RunConfig.__dataclass_fields__[key].default)
    return replace(config, **values)


def load_config(path: Union[str, Path, None] = None, **overrides: Any) -> RunConfig:
    """
    Defaults, then the file at ``path`` (if any), then non-None ``overrides``.
    """
    config = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"configuration file not found: {path}")
        config = parse_config_text(path.read_text(encoding="utf-8"), config)
        logger.debug("loaded configuration from %s", path)
    return config.with_overrides(**overrides)
