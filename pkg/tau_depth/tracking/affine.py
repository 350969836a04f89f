"""
Inverse-compositional Lucas-Kanade tracking of a planar patch with an
affine warp on de-rotated coordinates.

The template is taken from the first frame. Internally the warp maps
template pixel offsets (relative to the patch centre) to de-rotated pixel
coordinates, so translation updates are in pixels and the linear part is
dimensionless; the public :class:`AffineWarp` acts on calibrated
coordinates and is the identity at the first frame.
"""

import logging
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.spatial.transform import Rotation

from tau_depth.core import NS_PER_S, CameraIntrinsics, FocSample, Timestamp, to_calibrated
from tau_depth.derotation import OrientationTrack, derotation_homography
from tau_depth.errors import DegeneracyError, InputError, TrackingLostError
from tau_depth.tracking.base import FocResult, FocSource
from tau_depth.tracking.flow import (
    DEFAULT_DET_MIN,
    DEFAULT_RATIO_EPS,
    AffineWarp,
    flow_to_foc,
    median3_filter,
    midpoint_warp,
    warp_to_flow,
)

logger = logging.getLogger(__name__)

DEFAULT_PATCH_SIZE = 100
DEFAULT_SAMPLE_COUNT = 4000


@dataclass
class TrackerOptions:
    """Options for the patch tracker."""
    max_iters: int = 20               # Gauss-Newton iterations per frame
    tol: float = 1e-4                 # update norm (px / dimensionless) for convergence
    det_min: float = DEFAULT_DET_MIN  # smallest admissible warp determinant
    min_valid_fraction: float = 0.5   # template pixels that must stay inside the frame
    max_rms_residual: float = 0.25    # photometric RMS (intensity in [0, 1]) before loss


def normalize_frame(frame: np.ndarray) -> np.ndarray:
    """8-bit (or float) grayscale frame as float64 intensities in [0, 1]."""
    img = np.asarray(frame)
    if img.ndim != 2:
        raise InputError(f"expected a grayscale frame, got shape {img.shape}")
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255.0
    return img.astype(np.float64)


def _central_gradients(image: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    gx = (image[rows, cols + 1] - image[rows, cols - 1]) / 2.0
    gy = (image[rows + 1, cols] - image[rows - 1, cols]) / 2.0
    return gx, gy


@dataclass(frozen=True, eq=False)
class PatchTemplate:
    """
    Reference intensities at subsampled patch pixels of the first frame.

    Precomputes steepest-descent images and the Gauss-Newton Hessian of the
    inverse-compositional formulation.
    """
    intrinsics: CameraIntrinsics
    center: np.ndarray          # patch centre (u, v) in pixels
    offsets: np.ndarray         # (N, 2) template pixel offsets from the centre
    intensities: np.ndarray     # (N,)
    steepest_descent: np.ndarray  # (N, 6)
    hessian: np.ndarray         # (6, 6)
    size: int

    def __len__(self) -> int:
        return int(self.offsets.shape[0])

    @property
    def center_calibrated(self) -> np.ndarray:
        """Fixation point at the first frame in calibrated coordinates."""
        return to_calibrated(self.center, self.intrinsics)

    @classmethod
    def from_frame(cls, frame: np.ndarray, intrinsics: CameraIntrinsics,
                   center: Optional[Tuple[float, float]] = None,
                   size: int = DEFAULT_PATCH_SIZE,
                   sample_count: int = DEFAULT_SAMPLE_COUNT,
                   seed: int = 0) -> "PatchTemplate":
        """
        Build a template from the first frame.

        Args:
            frame: First frame (uint8 or float grayscale)
            intrinsics: Camera intrinsics matching the frame
            center: Patch centre in pixels (defaults to the principal point)
            size: Side length of the square patch in pixels
            sample_count: Number of patch pixels kept (seeded random subset)
            seed: Seed of the subsampling

        Raises:
            InputError: if the frame does not match the intrinsics, the patch
                leaves the frame or fewer than 6 samples are requested
        """
        image = normalize_frame(frame)
        if image.shape != (intrinsics.height, intrinsics.width):
            raise InputError(
                f"frame shape {image.shape} does not match intrinsics "
                f"{intrinsics.height}x{intrinsics.width}")
        if sample_count < 6:
            raise InputError("an affine template needs at least 6 samples")

        cu, cv = (intrinsics.cx, intrinsics.cy) if center is None else center
        u0 = int(round(cu - size / 2.0))
        v0 = int(round(cv - size / 2.0))
        if u0 < 1 or v0 < 1 or u0 + size > intrinsics.width - 1 or v0 + size > intrinsics.height - 1:
            raise InputError(f"patch of {size} px at ({cu}, {cv}) does not fit inside the frame")

        cols, rows = np.meshgrid(np.arange(u0, u0 + size), np.arange(v0, v0 + size))
        cols, rows = cols.ravel(), rows.ravel()
        if sample_count < cols.size:
            rng = np.random.default_rng(seed)
            keep = np.sort(rng.choice(cols.size, size=sample_count, replace=False))
            cols, rows = cols[keep], rows[keep]

        gx, gy = _central_gradients(image, rows, cols)
        x = cols - cu
        y = rows - cv
        sd = np.column_stack([gx * x, gx * y, gx, gy * x, gy * y, gy])
        hessian = sd.T @ sd
        if np.linalg.matrix_rank(hessian) < 6:
            raise InputError("template has no texture in some warp direction")

        return cls(
            intrinsics=intrinsics,
            center=np.array([cu, cv], dtype=np.float64),
            offsets=np.column_stack([x, y]).astype(np.float64),
            intensities=image[rows, cols],
            steepest_descent=sd,
            hessian=hessian,
            size=size,
        )

    # conversions between the public calibrated warp and the internal pixel warp

    def _centering(self) -> np.ndarray:
        return np.array([[1.0, 0.0, -self.center[0]],
                         [0.0, 1.0, -self.center[1]],
                         [0.0, 0.0, 1.0]])

    def to_internal(self, warp: AffineWarp) -> np.ndarray:
        k = self.intrinsics.matrix
        k_inv = self.intrinsics.inverse_matrix
        return k @ warp.matrix @ k_inv @ np.linalg.inv(self._centering())

    def from_internal(self, matrix: np.ndarray, t: Timestamp) -> AffineWarp:
        k = self.intrinsics.matrix
        k_inv = self.intrinsics.inverse_matrix
        return AffineWarp.from_matrix(k_inv @ matrix @ self._centering() @ k, t)


def _residuals(template: PatchTemplate, image: np.ndarray, warp_px: np.ndarray,
               lookup: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Photometric residual I(W(x)) - T(x) and the mask of in-frame samples."""
    q = template.offsets
    derotated = q @ warp_px[:2, :2].T + warp_px[:2, 2]
    h = derotated @ lookup[:, :2].T + lookup[:, 2]
    w = h[:, 2]
    ahead = w > 1e-12
    safe_w = np.where(ahead, w, 1.0)
    u = h[:, 0] / safe_w
    v = h[:, 1] / safe_w
    sampled = map_coordinates(image, [v, u], order=1, mode="constant", cval=np.nan)
    valid = ahead & np.isfinite(sampled)
    residual = np.where(valid, sampled - template.intensities, 0.0)
    return residual, valid


def track_frame(template: PatchTemplate, frame: np.ndarray, rotation: Rotation,
                prev: AffineWarp, options: Optional[TrackerOptions] = None,
                t: Optional[Timestamp] = None) -> AffineWarp:
    """
    Fit the affine warp of ``frame`` against the template.

    Frame lookups go through the de-rotation homography of ``rotation`` and
    the fit is warm-started from ``prev``. Accepted iterations never increase
    the photometric residual; a rejected update is retried at half length.

    Args:
        template: Patch template from the first frame
        frame: Current grayscale frame
        rotation: Orientation of the current frame relative to the first
        prev: Warp of the previous frame
        options: Tracker options
        t: Timestamp of ``frame`` (defaults to ``prev.t``)

    Returns:
        AffineWarp W(t) in calibrated coordinates

    Raises:
        TrackingLostError: on divergence, warp collapse, loss of the patch from
            the frame or an excessive final residual
    """
    opts = options or TrackerOptions()
    t = prev.t if t is None else t
    image = normalize_frame(frame)
    intr = template.intrinsics
    if image.shape != (intr.height, intr.width):
        raise InputError(f"frame shape {image.shape} does not match intrinsics")

    # de-rotated pixel -> current pixel: K R^T K^-1
    lookup = intr.matrix @ derotation_homography(rotation).T @ intr.inverse_matrix
    n = len(template)

    warp_px = template.to_internal(prev)
    residual, valid = _residuals(template, image, warp_px, lookup)
    if valid.sum() < opts.min_valid_fraction * n:
        raise TrackingLostError("patch left the frame", t)
    cost = float(np.mean(residual[valid] ** 2))

    accepted = 0
    converged = False
    step_scale = 1.0
    for _ in range(opts.max_iters):
        sd = template.steepest_descent
        if valid.all():
            hessian = template.hessian
            b = sd.T @ residual
        else:
            sd = sd[valid]
            hessian = sd.T @ sd
            b = sd.T @ residual[valid]
        dp = np.linalg.solve(hessian, b) * step_scale
        if np.linalg.norm(dp) < opts.tol:
            converged = True
            break

        increment = np.array([[1.0 + dp[0], dp[1], dp[2]],
                              [dp[3], 1.0 + dp[4], dp[5]],
                              [0.0, 0.0, 1.0]])
        candidate = warp_px @ np.linalg.inv(increment)
        if np.linalg.det(candidate[:2, :2]) < opts.det_min:
            raise TrackingLostError("patch collapsed (warp determinant below minimum)", t)

        cand_residual, cand_valid = _residuals(template, image, candidate, lookup)
        if cand_valid.sum() < opts.min_valid_fraction * n:
            raise TrackingLostError("patch left the frame", t)
        cand_cost = float(np.mean(cand_residual[cand_valid] ** 2))

        if cand_cost <= cost:
            warp_px, residual, valid, cost = candidate, cand_residual, cand_valid, cand_cost
            accepted += 1
            step_scale = 1.0
        else:
            step_scale *= 0.5

    if not converged and accepted == 0:
        raise TrackingLostError("diverged: no update reduced the residual", t)
    if np.sqrt(cost) > opts.max_rms_residual:
        raise TrackingLostError(f"photometric RMS {np.sqrt(cost):.3f} above limit", t)

    warp = template.from_internal(warp_px, t)
    if warp.det < opts.det_min:
        raise TrackingLostError("patch collapsed (warp determinant below minimum)", t)
    return warp


class AffineTracker(FocSource):
    """
    Frequency-of-contact from affine patch tracking.

    The tracker follows the patch on every frame; every ``decimation``-th warp
    is emitted and differenced with baseline T = decimation / frame_rate,
    centered on the interval midpoint where each sample is stamped.

    Usage:
        tracker = AffineTracker(frames, intrinsics)
        result = tracker.measure(track)
        for sample in result.samples:
            print(sample.t, sample.F)
    """

    source_type = "tracker"

    def __init__(self, frames: Iterable[Tuple[Timestamp, np.ndarray]],
                 intrinsics: CameraIntrinsics,
                 options: Optional[TrackerOptions] = None,
                 center: Optional[Tuple[float, float]] = None,
                 patch_size: int = DEFAULT_PATCH_SIZE,
                 sample_count: int = DEFAULT_SAMPLE_COUNT,
                 seed: int = 0,
                 decimation: int = 1,
                 median_filter: bool = False,
                 ratio_eps: float = DEFAULT_RATIO_EPS):
        if decimation < 1:
            raise InputError(f"decimation step must be >= 1, got {decimation}")
        self.frames = frames
        self.intrinsics = intrinsics
        self.options = options or TrackerOptions()
        self.center = center
        self.patch_size = patch_size
        self.sample_count = sample_count
        self.seed = seed
        self.decimation = decimation
        self.median_filter = median_filter
        self.ratio_eps = ratio_eps

    def measure(self, track: OrientationTrack) -> FocResult:
        frames = iter(self.frames)
        try:
            t0, first = next(frames)
        except StopIteration:
            raise InputError("no frames to track") from None

        template = PatchTemplate.from_frame(first, self.intrinsics, self.center,
                                            self.patch_size, self.sample_count, self.seed)
        track = track.relative_to(t0)
        warps = [AffineWarp.identity(t0)]
        failure = None

        started = time.perf_counter()
        for t, frame in frames:
            try:
                warp = track_frame(template, frame, track.at(t), warps[-1], self.options, t=t)
            except TrackingLostError as err:
                failure = err
                logger.error("%s", err)
                break
            warps.append(warp)
        elapsed = time.perf_counter() - started
        fps = (len(warps) - 1) / elapsed if elapsed > 0 else float("inf")
        logger.info("tracked %d frames at %.1f frames/s", len(warps), fps)

        samples, warnings = self._to_foc(template, warps)
        if failure is None and warnings:
            failure = TrackingLostError("degenerate affine flow", samples[-1].t if samples else t0)

        return FocResult(
            samples=samples,
            source_type=self.source_type,
            warps=warps,
            failure=failure,
            metadata={
                'frames_tracked': len(warps),
                'tracking_fps': fps,
                'decimation': self.decimation,
                'template_samples': len(template),
            },
            warnings=warnings,
        )

    def _to_foc(self, template: PatchTemplate,
                warps: List[AffineWarp]) -> Tuple[List[FocSample], List[str]]:
        emitted = self._decimate(warps, self.decimation)
        pairs = list(zip(emitted, emitted[1:]))
        flows = [warp_to_flow(cur, prev, (cur.t - prev.t) / NS_PER_S, centered=True)
                 for prev, cur in pairs]
        if self.median_filter:
            flows = median3_filter(flows)

        origin = template.center_calibrated
        samples: List[FocSample] = []
        warnings: List[str] = []
        for (prev, cur), flow in zip(pairs, flows):
            warp = midpoint_warp(cur, prev)
            try:
                samples.append(flow_to_foc(flow, warp.apply(origin), self.ratio_eps))
            except DegeneracyError as err:
                warnings.append(f"t={warp.t}: {err}")
                logger.error("degenerate affine flow at t=%d ns: %s", warp.t, err)
                break
        return samples, warnings
