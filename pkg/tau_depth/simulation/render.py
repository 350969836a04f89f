"""
Inverse-homography rendering of the textured plane through a pinhole camera.

Each output pixel averages ``supersample``^2 rays. A ray through calibrated
point d_c of the camera at pose (R, p) travels along d = R d_c, meets the
plane n^T P = 1 at P = p + s d with s = (1 - n^T p) / (n^T d), and picks up
the texture at P's first-frame pixel position.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from tau_depth.core import CameraIntrinsics
from tau_depth.errors import InputError
from tau_depth.simulation.scene import PlanarScene, texture_raster

logger = logging.getLogger(__name__)

DEFAULT_SUPERSAMPLE = 4
DEFAULT_WORKERS = 4
BACKGROUND = 0.0


class PlaneRenderer:
    """Renders 8-bit grayscale frames of one scene for one camera."""

    def __init__(self, scene: PlanarScene, intrinsics: CameraIntrinsics,
                 supersample: int = DEFAULT_SUPERSAMPLE):
        if supersample < 1:
            raise InputError(f"supersample factor must be >= 1, got {supersample}")
        self.scene = scene
        self.intrinsics = intrinsics
        self.supersample = supersample
        self.raster = texture_raster(scene.texture)

        fine = intrinsics.scaled(supersample)
        u, v = np.meshgrid(np.arange(fine.width, dtype=np.float64),
                           np.arange(fine.height, dtype=np.float64))
        self._rays = np.stack([
            (u.ravel() - fine.cx) / fine.fx,
            (v.ravel() - fine.cy) / fine.fy,
            np.ones(u.size),
        ], axis=1)

    def render_intensity(self, rotation: Rotation, position: np.ndarray) -> np.ndarray:
        """Float image in [0, 1] for camera orientation ``rotation`` at ``position``."""
        intr = self.intrinsics
        n = self.scene.n
        p = np.asarray(position, dtype=np.float64).reshape(3)
        d = self._rays @ rotation.as_matrix().T
        nd = d @ n
        offset = 1.0 - float(n @ p)
        hit = nd * offset > 0
        s = np.where(hit, offset / np.where(hit, nd, 1.0), 0.0)
        point = p + s[:, None] * d
        z = np.where(hit, point[:, 2], 1.0)
        u0 = point[:, 0] / z * intr.fx + intr.cx
        v0 = point[:, 1] / z * intr.fy + intr.cy
        values = np.where(hit, self.raster.sample(u0, v0), BACKGROUND)

        k = self.supersample
        fine = values.reshape(intr.height * k, intr.width * k)
        return fine.reshape(intr.height, k, intr.width, k).mean(axis=(1, 3))

    def render(self, rotation: Rotation, position: np.ndarray) -> np.ndarray:
        """8-bit frame for one pose."""
        img = self.render_intensity(rotation, position)
        return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)

    def render_many(self, rotations: Rotation, positions: Sequence[np.ndarray],
                    workers: Optional[int] = None) -> List[np.ndarray]:
        """Render frames in parallel; output order follows the input poses."""
        workers = workers or min(DEFAULT_WORKERS, os.cpu_count() or 1)
        poses = [(rotations[i], positions[i]) for i in range(len(positions))]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            frames = list(pool.map(lambda pose: self.render(*pose), poses))
        logger.debug("rendered %d frames at %dx supersampling", len(frames), self.supersample)
        return frames
