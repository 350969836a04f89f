"""
Luenberger observer on depth and depth rate, with dead reckoning through
F_z when no window solution qualifies, and 3D reconstruction of the
fixated point.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from tau_depth.core import NS_PER_S, Timestamp
from tau_depth.errors import ConfigError, InputError, ObserverError
from tau_depth.solver import WindowResult, WindowSolution, window_depth_now

logger = logging.getLogger(__name__)


class ObserverMode(Enum):
    """How the last observer step was driven."""
    MEASURED = "measured"
    DEAD_RECKONING = "dead-reckoning"


@dataclass(frozen=True)
class ObserverGain:
    """
    Diagonal injection gain L = diag(l1, l2) on the (Z, Z_dot) innovation.

    The error dynamics e' = (A - L) e with A = [[0, 1], [0, 0]] must be
    stable; this is checked at construction.
    """
    l1: float = 2.0
    l2: float = 20.0

    def __post_init__(self):
        eig = np.linalg.eigvals(self.closed_loop_matrix)
        if not np.all(eig.real < 0):
            raise ConfigError(
                f"observer gain diag({self.l1}, {self.l2}) is not stabilising "
                f"(closed-loop eigenvalues {eig})")

    @property
    def closed_loop_matrix(self) -> np.ndarray:
        return np.array([[-self.l1, 1.0], [0.0, -self.l2]])

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.sort(np.linalg.eigvals(self.closed_loop_matrix).real)


@dataclass(frozen=True, eq=False)
class ObserverState:
    """Depth estimate, its rate and the latched gravity estimate (fixed frame)."""
    Z: float
    Z_dot: float
    t: Timestamp
    g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mode: ObserverMode = ObserverMode.MEASURED

    def __post_init__(self):
        if not (np.isfinite(self.Z) and np.isfinite(self.Z_dot)):
            raise ObserverError(f"non-finite observer state at t={self.t} ns")


def _advance(t: Timestamp, dt: float) -> Timestamp:
    return t + int(round(dt * NS_PER_S))


def _check_positive(state: ObserverState) -> ObserverState:
    if not state.Z > 0:
        raise ObserverError(f"depth estimate {state.Z:.4g} m crossed zero at t={state.t} ns")
    return state


def observer_step(state: ObserverState, dt: float, a_z_fixed: float,
                  measurement: Optional[Tuple[float, float]], g_z: float,
                  gain: Optional[ObserverGain] = None) -> ObserverState:
    """
    One explicit-Euler step of the observer.

    Prediction uses Z'' = g_z - a^m_z (a^m = -X'' + g); the correction
    L (measurement - estimate) is added when a measurement is present.

    Args:
        state: Current state
        dt: Step length in seconds
        a_z_fixed: Fixed-frame accelerometer z component (m/s^2)
        measurement: Optional fused (Z, Z_dot)
        g_z: Gravity z component as it appears in a^m
        gain: Injection gain

    Raises:
        InputError: if dt is not positive
        ObserverError: if the depth estimate crosses zero
    """
    if not dt > 0:
        raise InputError(f"observer step must be positive, got {dt}")
    gain = gain or ObserverGain()
    z_ddot = g_z - a_z_fixed
    dz = state.Z_dot
    dz_dot = z_ddot
    if measurement is not None:
        z_meas, z_dot_meas = measurement
        dz += gain.l1 * (z_meas - state.Z)
        dz_dot += gain.l2 * (z_dot_meas - state.Z_dot)
    new_state = replace(
        state,
        Z=state.Z + dt * dz,
        Z_dot=state.Z_dot + dt * dz_dot,
        t=_advance(state.t, dt),
        mode=ObserverMode.MEASURED,
    )
    return _check_positive(new_state)


def dead_reckon(state: ObserverState, F_z: float, dt: float) -> ObserverState:
    """
    Propagate depth through the frequency-of-contact alone.

    Z <- Z exp(F_z dt), Z_dot <- F_z Z.
    """
    if not dt > 0:
        raise InputError(f"dead-reckoning step must be positive, got {dt}")
    z = state.Z * float(np.exp(F_z * dt))
    new_state = replace(state, Z=z, Z_dot=F_z * z, t=_advance(state.t, dt),
                        mode=ObserverMode.DEAD_RECKONING)
    return _check_positive(new_state)


def fuse_axes(solutions: Sequence[WindowSolution], phi_end: float, F_now: Sequence[float],
              gated: Optional[Sequence[bool]] = None) -> Optional[Tuple[float, float]]:
    """
    Average (Z, Z_dot) at the window end over the qualifying axes.

    An axis qualifies when its solution is valid (posed, Z0 above the minimum)
    and it passed the excitation gate.

    Returns:
        (Z, Z_dot), or None when no axis qualifies
    """
    gated = gated if gated is not None else [True] * len(solutions)
    fz_now = float(F_now[2])
    depths = []
    for sol, ok in zip(solutions, gated):
        if sol.valid and ok:
            z_t, _, _ = window_depth_now(sol, phi_end, fz_now)
            depths.append(z_t)
    if not depths:
        return None
    z = float(np.mean(depths))
    return z, fz_now * z


def reconstruct_xyz(state: ObserverState, point: Sequence[float]) -> np.ndarray:
    """Fixed-frame position (x Z, y Z, Z) of the fixated point."""
    x, y = point
    return np.array([x * state.Z, y * state.Z, state.Z])


class DepthObserver:
    """
    Stateful observer fed one window result per fusion step.

    Emits nothing until the first usable window solution initializes it.
    """

    def __init__(self, gain: Optional[ObserverGain] = None):
        self.gain = gain or ObserverGain()
        self.state: Optional[ObserverState] = None
        self._g = np.full(3, np.nan)

    @property
    def initialized(self) -> bool:
        return self.state is not None

    def _latch_gravity(self, window: WindowResult) -> np.ndarray:
        for k, (sol, usable) in enumerate(zip(window.solutions, window.usable)):
            if usable:
                self._g[k] = sol.g
        return np.where(np.isfinite(self._g), self._g, window.accel_mean)

    def update(self, window: WindowResult, dt: float) -> Optional[ObserverState]:
        """
        Advance the observer to the end of ``window``.

        Args:
            window: Solved window ending at the current fusion time
            dt: Time since the previous update (s)

        Returns:
            The new state, or None before initialization
        """
        g = self._latch_gravity(window)
        measurement = fuse_axes(window.solutions, window.effect.phi_end, window.F_now, window.gated)

        if self.state is None:
            if measurement is None:
                return None
            z, z_dot = measurement
            self.state = _check_positive(ObserverState(z, z_dot, window.t_now, g.copy()))
            logger.info("observer initialized at t=%d ns with Z=%.3f m", window.t_now, z)
            return self.state

        if measurement is None:
            state = dead_reckon(self.state, float(window.F_now[2]), dt)
        else:
            state = observer_step(self.state, dt, float(window.accel_now[2]), measurement,
                                  float(g[2]), self.gain)
        if state.mode != self.state.mode:
            logger.debug("observer switched to %s at t=%d ns", state.mode.value, window.t_now)
        self.state = replace(state, t=window.t_now, g=g.copy())
        return self.state


__all__ = [
    "DepthObserver",
    "ObserverGain",
    "ObserverMode",
    "ObserverState",
    "dead_reckon",
    "fuse_axes",
    "observer_step",
    "reconstruct_xyz",
]
