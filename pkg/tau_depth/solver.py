"""
Sliding-window tau-constraint least squares.

Over a window of length T_w the frequency-of-contact F(t) and the
fixed-frame accelerometer a^m(t) = -X''(t) + g are resampled on a uniform
grid. With the action's effect E(t) computed from F alone, depth and gravity
per axis solve

    min_{Z0, g}  || Z0 E(t) + D{a^m}(t) - g D{1}(t) ||^2

where D is the cumulative double integral starting at the window start.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from tau_depth.core import NS_PER_S, SampleStream, Timestamp
from tau_depth.errors import ContractError, InputError, NumericError, RangeError

logger = logging.getLogger(__name__)

AXES = ("x", "y", "z")

DEFAULT_WINDOW_S = 2.0
DEFAULT_RATE_HZ = 100.0
DEFAULT_GATE_THRESHOLD = 2.0   # m/s^2, mean-removed RMS
DEFAULT_Z_MIN = 0.05           # m
DEFAULT_DETQ_REL = 1e-8


@dataclass
class SolverOptions:
    """Options for the window solver."""
    window_s: float = DEFAULT_WINDOW_S
    rate_hz: float = DEFAULT_RATE_HZ
    gate_threshold: float = DEFAULT_GATE_THRESHOLD
    z_min: float = DEFAULT_Z_MIN
    detq_rel: float = DEFAULT_DETQ_REL


@dataclass(frozen=True, eq=False)
class WindowGrid:
    """F and fixed-frame acceleration resampled on a uniform window grid."""
    t_ns: np.ndarray   # (n,) absolute timestamps, t_ns[-1] = t_now
    F: np.ndarray      # (n, 3)
    accel: np.ndarray  # (n, 3)
    dt: float          # seconds

    def __len__(self) -> int:
        return int(self.t_ns.shape[0])

    @property
    def t_s(self) -> np.ndarray:
        """Seconds since the window start."""
        return np.arange(len(self)) * self.dt

    @property
    def t_now(self) -> Timestamp:
        return int(self.t_ns[-1])

    @classmethod
    def uniform_times(cls, t_now: Timestamp, window_s: float, rate_hz: float) -> Tuple[np.ndarray, float]:
        """Grid timestamps covering [t_now - window_s, t_now] and the spacing in seconds."""
        if window_s <= 0 or rate_hz <= 0:
            raise InputError("window length and rate must be positive")
        steps = int(round(window_s * rate_hz))
        if steps < 2:
            raise InputError(f"window of {window_s} s at {rate_hz} Hz has fewer than 3 samples")
        window_ns = int(round(window_s * NS_PER_S))
        offsets = np.rint(np.linspace(0.0, window_ns, steps + 1)).astype(np.int64)
        return t_now - window_ns + offsets, window_s / steps

    @classmethod
    def sample(cls, foc: SampleStream, accel: SampleStream, t_now: Timestamp,
               window_s: float = DEFAULT_WINDOW_S,
               rate_hz: float = DEFAULT_RATE_HZ) -> "WindowGrid":
        """
        Resample F and fixed-frame acceleration onto the window ending at ``t_now``.

        Raises:
            RangeError: if either stream does not cover the window
        """
        t_ns, dt = cls.uniform_times(t_now, window_s, rate_hz)
        if not (foc.covers(int(t_ns[0]), int(t_ns[-1])) and accel.covers(int(t_ns[0]), int(t_ns[-1]))):
            raise RangeError(f"window [{t_ns[0]}, {t_ns[-1]}] ns not covered by F and accel")
        return cls(t_ns, foc.resample(t_ns), accel.resample(t_ns), dt)


@dataclass(frozen=True, eq=False)
class ActionEffect:
    """E(t), Phi(t) = exp(int F_z) and the window-start F on the grid."""
    E: np.ndarray    # (n, 3), E[0] = 0
    phi: np.ndarray  # (n,),  phi[0] = 1
    F0: np.ndarray   # (3,)

    @property
    def phi_end(self) -> float:
        return float(self.phi[-1])


@dataclass(frozen=True)
class WindowSolution:
    """Depth at the window start and the gravity component for one axis."""
    axis: str
    Z0: float
    g: float
    detQ: float
    cond: float
    residual: float
    posed: bool
    valid: bool

    @classmethod
    def unposed(cls, axis: str, detQ: float, residual: float = float("nan")) -> "WindowSolution":
        return cls(axis, float("nan"), float("nan"), detQ, float("inf"), residual, False, False)


@dataclass(frozen=True, eq=False)
class WindowResult:
    """Per-axis solutions and gating decisions of one window."""
    t_now: Timestamp
    effect: ActionEffect
    solutions: Tuple[WindowSolution, WindowSolution, WindowSolution]
    gated: Tuple[bool, bool, bool]   # True when the axis has enough excitation
    F_now: np.ndarray
    accel_now: np.ndarray
    accel_mean: np.ndarray

    @property
    def usable(self) -> Tuple[bool, bool, bool]:
        return tuple(s.valid and g for s, g in zip(self.solutions, self.gated))


def double_integral(f: np.ndarray, dt: float) -> np.ndarray:
    """
    Cumulative double integral on a uniform grid (trapezoid rule twice).

    Works along axis 0; the result starts at zero.
    """
    f = np.asarray(f, dtype=np.float64)
    inner = cumulative_trapezoid(f, dx=dt, axis=0, initial=0)
    return cumulative_trapezoid(inner, dx=dt, axis=0, initial=0)


def action_effect(F: np.ndarray, dt: float) -> ActionEffect:
    """
    Action's effect of a frequency-of-contact series.

    Phi(t) = exp(int_0^t F_z), E_xy(t) = int_0^t F_xy Phi - t F_xy(0),
    E_z(t) = Phi(t) - 1 - t F_z(0).

    Raises:
        NumericError: if Phi overflows or F is not finite
    """
    F = np.asarray(F, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(F)):
        raise NumericError("frequency-of-contact window has non-finite samples")
    with np.errstate(over="ignore"):
        phi = np.exp(cumulative_trapezoid(F[:, 2], dx=dt, initial=0))
    if not np.all(np.isfinite(phi)):
        raise NumericError("exp(int F_z) overflowed over the window")

    t = np.arange(F.shape[0]) * dt
    E = np.empty_like(F)
    E[:, :2] = cumulative_trapezoid(F[:, :2] * phi[:, None], dx=dt, axis=0, initial=0) - np.outer(t, F[0, :2])
    E[:, 2] = phi - 1.0 - t * F[0, 2]
    return ActionEffect(E, phi, F[0].copy())


def _inner(u: np.ndarray, v: np.ndarray, dt: float) -> float:
    return float(np.dot(u, v) * dt)


def assemble_normal_system(E_axis: np.ndarray, accel_axis: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadratic form of the window cost in p = (Z0, g): cost = p^T Q p + c^T p + const.

    Returns:
        (Q, c) with Q symmetric positive semidefinite
    """
    e = np.asarray(E_axis, dtype=np.float64)
    d1 = double_integral(np.ones_like(e), dt)
    da = double_integral(np.asarray(accel_axis, dtype=np.float64), dt)
    e_d1 = _inner(e, d1, dt)
    Q = np.array([[_inner(e, e, dt), -e_d1],
                  [-e_d1, _inner(d1, d1, dt)]])
    c = 2.0 * np.array([_inner(e, da, dt), -_inner(d1, da, dt)])
    return Q, c


def solve_window(Q: np.ndarray, c: np.ndarray, axis: str = "z",
                 z_min: float = DEFAULT_Z_MIN,
                 detq_rel: float = DEFAULT_DETQ_REL) -> WindowSolution:
    """
    Closed-form minimiser [Z0, g] = -1/2 Q^-1 c.

    The system counts as posed when det Q > detq_rel * max(Q11 Q22, 1e-30).
    A posed solution with Z0 <= z_min is kept but flagged invalid.
    """
    Q = np.asarray(Q, dtype=np.float64)
    det_q = float(Q[0, 0] * Q[1, 1] - Q[0, 1] * Q[1, 0])
    if not det_q > detq_rel * max(Q[0, 0] * Q[1, 1], 1e-30):
        return WindowSolution.unposed(axis, det_q)

    z0, g = -0.5 * np.linalg.solve(Q, np.asarray(c, dtype=np.float64))
    if not (np.isfinite(z0) and np.isfinite(g)):
        return WindowSolution.unposed(axis, det_q)
    return WindowSolution(
        axis=axis,
        Z0=float(z0),
        g=float(g),
        detQ=det_q,
        cond=float(np.linalg.cond(Q)),
        residual=float("nan"),
        posed=True,
        valid=bool(z0 > z_min),
    )


def gate_axis(accel_axis: np.ndarray, threshold: float = DEFAULT_GATE_THRESHOLD) -> bool:
    """True iff the mean-removed RMS of the axis acceleration reaches ``threshold``."""
    a = np.asarray(accel_axis, dtype=np.float64)
    return bool(np.sqrt(np.mean((a - a.mean()) ** 2)) >= threshold)


def window_depth_now(sol: WindowSolution, phi_end: float, fz_now: float) -> Tuple[float, float, float]:
    """
    Propagate the window-start depth to the window end.

    Returns:
        (Z_t, Z_dot_t, F_z_now) with Z_t = Z0 * phi_end and Z_dot_t = F_z_now * Z_t

    Raises:
        ContractError: if the solution is not posed
    """
    if not sol.posed:
        raise ContractError(f"axis {sol.axis}: window solution is not posed")
    z_t = sol.Z0 * phi_end
    return z_t, fz_now * z_t, fz_now


def _rms_residual(E_axis: np.ndarray, accel_axis: np.ndarray, dt: float, z0: float, g: float) -> float:
    d1 = double_integral(np.ones_like(E_axis), dt)
    r = z0 * E_axis + double_integral(accel_axis, dt) - g * d1
    return float(np.sqrt(np.mean(r ** 2)))


def solve_axes(grid: WindowGrid, options: Optional[SolverOptions] = None) -> WindowResult:
    """
    Solve the three axes of one window independently (order x, y, z).

    Args:
        grid: Resampled window
        options: Solver options

    Returns:
        WindowResult with per-axis solutions and gating flags
    """
    opts = options or SolverOptions()
    effect = action_effect(grid.F, grid.dt)
    solutions = []
    gated = []
    for k, axis in enumerate(AXES):
        Q, c = assemble_normal_system(effect.E[:, k], grid.accel[:, k], grid.dt)
        sol = solve_window(Q, c, axis, opts.z_min, opts.detq_rel)
        if sol.posed:
            res = _rms_residual(effect.E[:, k], grid.accel[:, k], grid.dt, sol.Z0, sol.g)
            sol = WindowSolution(sol.axis, sol.Z0, sol.g, sol.detQ, sol.cond, res, sol.posed, sol.valid)
        solutions.append(sol)
        gated.append(gate_axis(grid.accel[:, k], opts.gate_threshold))
    return WindowResult(
        t_now=grid.t_now,
        effect=effect,
        solutions=tuple(solutions),
        gated=tuple(gated),
        F_now=grid.F[-1].copy(),
        accel_now=grid.accel[-1].copy(),
        accel_mean=grid.accel.mean(axis=0),
    )
