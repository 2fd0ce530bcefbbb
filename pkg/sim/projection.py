"""
Orthographic two-view camera model.

The top-down camera maps workspace points to (u, v) pixels, the side
camera maps them to the height coordinate w. Both maps are affine with
optional additive Gaussian pixel noise.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from core.geometry import PixelPoint3
from .world import WorldState

logger = logging.getLogger(__name__)

SeedLike = Union[int, Sequence[int], np.random.Generator, None]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Projection:
    """Per-view affine workspace-to-pixel maps plus pixel noise."""
    top_matrix: Tuple[Tuple[float, float, float], Tuple[float, float, float]] = ((100.0, 0.0, 0.0), (0.0, 100.0, 0.0))
    top_offset: Tuple[float, float] = (0.0, 0.0)
    side_vector: Tuple[float, float, float] = (0.0, 0.0, 100.0)
    side_offset: float = 0.0
    noise_std: float = 0.0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError(f"noise std must be >= 0, got {self.noise_std}")
        if abs(np.linalg.det(self.matrix)) < 1e-12:
            raise ValueError("projection is not invertible on the workspace")

    @property
    def matrix(self) -> np.ndarray:
        """Stacked 3x3 map workspace -> (u, v, w)."""
        return np.vstack([np.asarray(self.top_matrix, dtype=float), np.asarray(self.side_vector, dtype=float)])

    @property
    def offset(self) -> np.ndarray:
        return np.array([self.top_offset[0], self.top_offset[1], self.side_offset], dtype=float)

    def noiseless(self) -> "Projection":
        return Projection(self.top_matrix, self.top_offset, self.side_vector, self.side_offset, 0.0)


@dataclass(frozen=True)
class ProjectedFrame:
    """Pixel positions of the robot and every object."""
    robot: PixelPoint3
    objects: Dict[str, PixelPoint3] = field(default_factory=dict)


def project_point(proj: Projection, point: Sequence[float], rng: SeedLike = None) -> PixelPoint3:
    pixel = proj.matrix @ np.asarray(point, dtype=float) + proj.offset
    if proj.noise_std > 0:
        pixel = pixel + as_generator(rng).normal(0.0, proj.noise_std, size=3)
    return PixelPoint3.from_array(pixel)


def project(state: WorldState, proj: Projection, seed: SeedLike = None) -> ProjectedFrame:
    """Project the effector and all objects; noiseless and deterministic at std 0."""
    rng = as_generator(seed)
    robot = project_point(proj, state.effector, rng)
    objects = {obj.id: project_point(proj, obj.position, rng) for obj in state.objects}
    return ProjectedFrame(robot=robot, objects=objects)


def unproject(proj: Projection, pixel: PixelPoint3) -> np.ndarray:
    """Invert the noiseless map: pixel (u, v, w) -> workspace point."""
    return np.linalg.solve(proj.matrix, pixel.as_array() - proj.offset)


def calibration_pairs(proj: Projection, n: int, outlier_fraction: float = 0.0,
                      seed: SeedLike = None, outlier_scale: Tuple[float, float] = (20.0, 60.0)):
    """
    Effector positions and their observed pixels, as collected for camera calibration.

    A fraction of pairs is corrupted with gross pixel offsets, standing in for
    tracker failures.

    Returns:
        (points N x 3, top-down pixels N x 2, side pixels N)
    """
    rng = as_generator(seed)
    points = rng.uniform(0.0, 1.0, size=(n, 3))
    pixels = np.array([project_point(proj, p, rng).as_array() for p in points])
    n_out = int(round(outlier_fraction * n))
    if n_out:
        idx = rng.choice(n, size=n_out, replace=False)
        magnitude = rng.uniform(*outlier_scale, size=(n_out, 3))
        sign = rng.choice([-1.0, 1.0], size=(n_out, 3))
        pixels[idx] += magnitude * sign
    logger.debug(f"Generated {n} calibration pairs with {n_out} outliers")
    return points, pixels[:, :2], pixels[:, 2]
