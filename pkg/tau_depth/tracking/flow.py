"""
Affine warp and affine flow types, the warp-to-flow finite difference and
the recovery of frequency-of-contact from affine flow parameters.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from tau_depth.core import FocSample, Timestamp
from tau_depth.errors import DegeneracyError, InputError

DEFAULT_DET_MIN = 1e-6
DEFAULT_RATIO_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class AffineWarp:
    """
    Affine homography W(t) on calibrated coordinates.

    ``params`` holds (w1..w6), the top two rows of
    [[w1, w2, w3], [w4, w5, w6], [0, 0, 1]].
    """
    params: np.ndarray
    t: Timestamp = 0

    def __post_init__(self):
        p = np.asarray(self.params, dtype=np.float64).reshape(-1)
        if p.shape != (6,):
            raise InputError(f"affine warp needs 6 parameters, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InputError("affine warp has non-finite parameters")
        object.__setattr__(self, "params", p)

    @classmethod
    def identity(cls, t: Timestamp = 0) -> "AffineWarp":
        return cls(np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), t)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, t: Timestamp = 0) -> "AffineWarp":
        m = np.asarray(matrix, dtype=np.float64)
        return cls(m[:2, :3].reshape(-1), t)

    @property
    def matrix(self) -> np.ndarray:
        """Homogeneous 3x3 form."""
        return np.vstack([self.params.reshape(2, 3), [0.0, 0.0, 1.0]])

    @property
    def det(self) -> float:
        """Determinant of the 2x2 linear part."""
        w = self.params
        return float(w[0] * w[4] - w[1] * w[3])

    def apply(self, points) -> np.ndarray:
        """Map (N, 2) or (2,) calibrated points."""
        pts = np.asarray(points, dtype=np.float64)
        m = self.params.reshape(2, 3)
        return pts @ m[:, :2].T + m[:, 2]


@dataclass(frozen=True, eq=False)
class AffineFlow:
    """Affine flow A(t): top two rows (a1..a6) of the flow matrix, bottom row zero."""
    params: np.ndarray
    t: Timestamp = 0

    def __post_init__(self):
        p = np.asarray(self.params, dtype=np.float64).reshape(-1)
        if p.shape != (6,):
            raise InputError(f"affine flow needs 6 parameters, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InputError("affine flow has non-finite parameters")
        object.__setattr__(self, "params", p)

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([self.params.reshape(2, 3), np.zeros(3)])

    @classmethod
    def from_motion(cls, velocity, normal, t: Timestamp = 0) -> "AffineFlow":
        """
        Flow induced by scene velocity X_dot = (X', Y', Z') on the plane
        1/Z_x = n . x (rotation-free, quadratic term dropped).
        """
        vx, vy, vz = np.asarray(velocity, dtype=np.float64)
        nx, ny, nz = np.asarray(normal, dtype=np.float64)
        return cls(np.array([
            vx * nx - vz * nz, vx * ny, vx * nz,
            vy * nx, vy * ny - vz * nz, vy * nz,
        ]), t)


def warp_to_flow(w_t: AffineWarp, w_prev: AffineWarp, T: float,
                 centered: bool = False) -> AffineFlow:
    """
    Finite-difference affine flow: A = (W(t) - W(t - T)) W(t)^-1 / T.

    With ``centered`` the difference is taken about the interval midpoint:
    W(t)^-1 is replaced by the inverse of (W(t) + W(t - T)) / 2 and the flow
    is stamped at t - T/2, which removes the half-baseline lag.

    Args:
        w_t: Warp at the current time
        w_prev: Warp T seconds earlier
        T: Baseline in seconds
        centered: Evaluate at the interval midpoint instead of at t

    Raises:
        InputError: if T is not positive
        DegeneracyError: if the warp being inverted is singular
    """
    if not T > 0:
        raise InputError(f"finite-difference baseline must be positive, got {T}")
    m_t = w_t.matrix
    diff = m_t - w_prev.matrix
    t = w_t.t
    if centered:
        m_t = (m_t + w_prev.matrix) / 2.0
        t = (w_t.t + w_prev.t) // 2
    if abs(np.linalg.det(m_t[:2, :2])) < 1e-15:
        raise DegeneracyError("current warp is singular")
    a = diff @ np.linalg.inv(m_t) / T
    return AffineFlow(a[:2, :].reshape(-1), t)


def midpoint_warp(w_t: AffineWarp, w_prev: AffineWarp) -> AffineWarp:
    """Average of two warps, stamped halfway between them."""
    return AffineWarp((w_t.params + w_prev.params) / 2.0, (w_t.t + w_prev.t) // 2)


def _eta_and_slopes(a: np.ndarray, ratio_eps: float) -> Tuple[float, float, float]:
    """
    Return (eta, n_x/n_z, n_y/n_z) from flow parameters.

    eta = a4 a3 / a6 - a1 = a2 a6 / a3 - a5 (both equal Z' n_z); each ratio is
    evaluated through whichever algebraic form has the larger denominator.
    """
    a1, a2, a3, a4, a5, a6 = a
    if max(abs(a3), abs(a6)) < ratio_eps:
        # axial motion: X' = Y' = 0 leaves a1 = a5 = -Z' n_z
        if abs(a1 - a5) > ratio_eps:
            raise DegeneracyError(
                f"a3, a6 vanish but a1={a1:.6g} and a5={a5:.6g} disagree")
        return -(a1 + a5) / 2.0, 0.0, 0.0

    if abs(a6) >= abs(a3):
        eta = a4 * a3 / a6 - a1
    else:
        eta = a2 * a6 / a3 - a5

    # n_x/n_z = a4/a6 = (a1 + eta)/a3 ; n_y/n_z = a2/a3 = (a5 + eta)/a6
    slope_x = a4 / a6 if abs(a6) >= abs(a3) else (a1 + eta) / a3
    slope_y = a2 / a3 if abs(a3) >= abs(a6) else (a5 + eta) / a6
    return eta, slope_x, slope_y


def foc_matrix(flow: AffineFlow, ratio_eps: float = DEFAULT_RATIO_EPS) -> np.ndarray:
    """3x3 matrix M with X_dot / Z_x = M [x, y, 1]^T."""
    a1, a2, a3, a4, a5, a6 = flow.params
    eta, slope_x, slope_y = _eta_and_slopes(flow.params, ratio_eps)
    return np.array([
        [a1 + eta, a2, a3],
        [a4, a5 + eta, a6],
        [eta * slope_x, eta * slope_y, eta],
    ])


def flow_to_foc(flow: AffineFlow, point, ratio_eps: float = DEFAULT_RATIO_EPS) -> FocSample:
    """
    Frequency-of-contact at the fixation point from affine flow.

    Args:
        flow: Affine flow at time t
        point: Fixation point (x, y) in calibrated coordinates
        ratio_eps: Below this, a3 and a6 count as zero (axial fallback)

    Returns:
        FocSample with F = X_dot / Z at ``point``

    Raises:
        DegeneracyError: if the ratios vanish and the axial fallback is inconsistent
    """
    x, y = (float(v) for v in point)
    F = foc_matrix(flow, ratio_eps) @ np.array([x, y, 1.0])
    return FocSample(flow.t, F, (x, y))


def eta_forms(flow: AffineFlow) -> Tuple[float, float]:
    """Both algebraic forms of eta, for consistency checks."""
    a1, a2, a3, a4, a5, a6 = flow.params
    return a4 * a3 / a6 - a1, a2 * a6 / a3 - a5


def median3_filter(flows: Sequence[AffineFlow]) -> List[AffineFlow]:
    """
    Componentwise running median over three consecutive flows.

    The first and last flow are passed through.
    """
    flows = list(flows)
    if len(flows) < 3:
        return flows
    stacked = np.stack([f.params for f in flows])
    windows = np.stack([stacked[:-2], stacked[1:-1], stacked[2:]])
    middle = np.median(windows, axis=0)
    out = [flows[0]]
    out.extend(AffineFlow(p, f.t) for p, f in zip(middle, flows[1:-1]))
    out.append(flows[-1])
    return out
