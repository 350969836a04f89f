"""
Textured planar scene.

The plane is given in world coordinates (camera frame at t = 0) by
n^T P = 1, equivalently 1/Z = n^T x for calibrated image points x of the
first frame. Texture is parametrized by first-frame pixel coordinates, so
the first rendered frame shows it undistorted.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.ndimage import map_coordinates, zoom

from tau_depth.core import as_vec3
from tau_depth.errors import ScenarioError

logger = logging.getLogger(__name__)

TEXTURE_KINDS = ("noise", "checker")


@dataclass(frozen=True)
class TextureSpec:
    """
    Procedural texture.

    ``noise`` is multi-octave value noise (cubic-spline interpolated random
    lattices, each octave half the cell size and half the weight of the
    previous one); ``checker`` is a checkerboard of ``cell`` pixels.
    Intensities span 0.5 +/- contrast / 2.
    """
    kind: str = "noise"
    seed: int = 0
    octaves: int = 4
    contrast: float = 0.8
    cell: float = 16.0          # first-frame pixels per lattice cell (finest octave: cell / 2^(octaves-1))
    period: float = 1024.0      # texture repeats every ``period`` first-frame pixels
    resolution: float = 0.5     # raster spacing in first-frame pixels

    def __post_init__(self):
        if self.kind not in TEXTURE_KINDS:
            raise ScenarioError(f"texture kind must be one of {TEXTURE_KINDS}, got {self.kind!r}")
        if not 0 < self.contrast <= 1:
            raise ScenarioError(f"texture contrast must be in (0, 1], got {self.contrast}")
        if self.octaves < 1 or self.cell <= 0 or self.resolution <= 0:
            raise ScenarioError("texture octaves, cell and resolution must be positive")
        lattice = self.period / self.cell * 2 ** (self.octaves - 1)
        if self.kind == "noise" and (lattice != int(lattice) or self.period / self.resolution != int(self.period / self.resolution)):
            raise ScenarioError("texture period must hold whole lattice cells and raster samples")

    @classmethod
    def high_contrast(cls, seed: int = 0) -> "TextureSpec":
        return cls(kind="noise", seed=seed, contrast=1.0)

    @classmethod
    def checkerboard(cls, cell: float = 16.0, contrast: float = 1.0) -> "TextureSpec":
        return cls(kind="checker", cell=cell, contrast=contrast)


class TextureRaster:
    """Texture sampled on a periodic raster; lookups are bilinear with wrap-around."""

    def __init__(self, spec: TextureSpec):
        self.spec = spec
        self.values: Optional[np.ndarray] = None
        if spec.kind == "noise":
            self.values = self._value_noise(spec)

    @staticmethod
    def _value_noise(spec: TextureSpec) -> np.ndarray:
        size = int(round(spec.period / spec.resolution))
        rng = np.random.default_rng(spec.seed)
        total = np.zeros((size, size))
        weight = 1.0
        for k in range(spec.octaves):
            cells = int(round(spec.period / spec.cell * 2 ** k))
            lattice = rng.uniform(-1.0, 1.0, size=(cells, cells))
            total += weight * zoom(lattice, size / cells, order=3, mode="grid-wrap", grid_mode=True)
            weight *= 0.5
        total -= total.mean()
        peak = np.abs(total).max()
        if peak > 0:
            total /= peak
        logger.debug("built %dx%d texture raster (%d octaves)", size, size, spec.octaves)
        return 0.5 + 0.5 * spec.contrast * total

    def sample(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Intensities in [0, 1] at first-frame pixel coordinates (u, v)."""
        spec = self.spec
        if self.values is None:
            s = np.sign(np.sin(np.pi * (u + 0.5) / spec.cell) * np.sin(np.pi * (v + 0.5) / spec.cell))
            return 0.5 + 0.5 * spec.contrast * s
        coords = [np.asarray(v) / spec.resolution, np.asarray(u) / spec.resolution]
        out = map_coordinates(self.values, coords, order=1, mode="grid-wrap")
        return np.clip(out, 0.0, 1.0)


@lru_cache(maxsize=4)
def texture_raster(spec: TextureSpec) -> TextureRaster:
    """Shared raster per texture spec."""
    return TextureRaster(spec)


@dataclass(frozen=True)
class PlanarScene:
    """Plane n^T P = 1 (world frame) carrying a procedural texture."""
    normal: Tuple[float, float, float]
    texture: TextureSpec = field(default_factory=TextureSpec)

    def __post_init__(self):
        n = as_vec3(self.normal, "plane normal")
        if abs(n[2]) < 1e-9:
            raise ScenarioError("plane is edge-on at t = 0 (n_z = 0)")
        object.__setattr__(self, "normal", tuple(float(c) for c in n))

    @classmethod
    def fronto_parallel(cls, depth: float, texture: Optional[TextureSpec] = None,
                        slope: Tuple[float, float] = (0.0, 0.0)) -> "PlanarScene":
        """Plane through (0, 0, depth); ``slope`` gives n_x/n_z and n_y/n_z."""
        if not depth > 0:
            raise ScenarioError(f"plane depth must be positive, got {depth}")
        sx, sy = slope
        return cls((sx / depth, sy / depth, 1.0 / depth), texture or TextureSpec())

    @property
    def n(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=np.float64)

    def point_at(self, x: float, y: float) -> np.ndarray:
        """World point seen at calibrated (x, y) in the first frame."""
        ray = np.array([x, y, 1.0])
        denom = float(self.n @ ray)
        if not denom > 0:
            raise ScenarioError(f"plane not visible in front of the camera at ({x}, {y})")
        return ray / denom

    def normal_at(self, camera_position: np.ndarray) -> np.ndarray:
        """Plane normal in the translated camera frame: n / (1 - n^T p)."""
        return self.n / (1.0 - float(self.n @ camera_position))

    def to_dict(self) -> Dict[str, Any]:
        t = self.texture
        return {
            "normal": list(self.normal),
            "texture": {"kind": t.kind, "seed": t.seed, "octaves": t.octaves, "contrast": t.contrast,
                        "cell": t.cell, "period": t.period, "resolution": t.resolution},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PlanarScene":
        texture_data = dict(data.get("texture", {}))
        preset = texture_data.pop("preset", None)
        factories = {
            None: TextureSpec,
            "checkerboard": TextureSpec.checkerboard,
            "high-contrast": TextureSpec.high_contrast,
        }
        if preset not in factories:
            raise ScenarioError(f"unknown texture preset {preset!r}")
        try:
            texture = factories[preset](**texture_data)
        except TypeError as err:
            raise ScenarioError(f"bad texture entry: {err}") from err

        if "normal" in data:
            return cls(tuple(data["normal"]), texture)
        if "depth" in data:
            return cls.fronto_parallel(float(data["depth"]), texture, tuple(data.get("slope", (0.0, 0.0))))
        raise ScenarioError("scene needs either 'normal' or 'depth'")
