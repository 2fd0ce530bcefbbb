"""
Dense waypoint-following reward.

The robot is rewarded for closing in on the block *after* the nearest
block of the VLM trajectory, with the pixel distance squashed through a
shifted, scaled tanh so the reward stays in (0, 1).
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.geometry import BlockSequence, GridSpec, PixelPoint3, sequence_to_pixels


@dataclass(frozen=True)
class RewardParams:
    """Scale lambda (1/pixels) and offset phi (pixels) of the shaping transform."""
    lam: float = 0.1
    phi: float = 15.0
    grid: GridSpec = GridSpec()

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.phi < 0:
            raise ValueError(f"phi must be >= 0, got {self.phi}")

    @classmethod
    def simulation(cls, grid: GridSpec = GridSpec()) -> "RewardParams":
        return cls(0.1, 15.0, grid)

    @classmethod
    def real_robot(cls, grid: GridSpec = GridSpec()) -> "RewardParams":
        return cls(0.02, 80.0, grid)

    @classmethod
    def unit(cls, grid: GridSpec = GridSpec()) -> "RewardParams":
        """0.5 * (1 - tanh(dist)): the unparametrised form."""
        return cls(1.0, 0.0, grid)


@dataclass(frozen=True)
class DenseResult:
    r_dense: float
    nearest_index: int
    target_index: int
    d_t: float


def shaping_transform(d: float, lam: float, phi: float) -> float:
    return 0.5 * (1.0 - math.tanh(lam * (d - phi)))


def nearest_block(p: PixelPoint3, seq: BlockSequence, grid: GridSpec) -> int:
    """Index of the block centroid closest to p; ties go to the lowest index."""
    centroids = sequence_to_pixels(seq, grid)
    sq = np.sum((centroids - p.as_array()) ** 2, axis=1)
    return int(np.argmin(sq))


def dense_reward(p: PixelPoint3, seq: BlockSequence, grid: GridSpec, params: RewardParams) -> DenseResult:
    """Distance-to-next-block reward; the target is clamped to the final block."""
    nearest = nearest_block(p, seq, grid)
    target = min(nearest + 1, len(seq) - 1)
    centroid = sequence_to_pixels(seq, grid)[target]
    d_t = float(np.linalg.norm(p.as_array() - centroid))
    return DenseResult(shaping_transform(d_t, params.lam, params.phi), nearest, target, d_t)


def object_reward(obj_pixel: PixelPoint3, seq_obj: BlockSequence, grid: GridSpec,
                  params: RewardParams) -> float:
    """The same kernel applied to a tracked object point and its own waypoint sequence."""
    return dense_reward(obj_pixel, seq_obj, grid, params).r_dense
