"""
RANSAC camera regressors.

Each camera view gets an affine map from robot effector state to pixel
coordinates, fitted robustly so that a handful of bad calibration pairs
(tracker dropouts, mislabeled frames) do not bend the map.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import LinearRegression, RANSACRegressor

from core.geometry import PixelPoint3

logger = logging.getLogger(__name__)

MIN_PAIRS = 4


class RansacFitError(ValueError):
    """Raised when no consensus set of at least the minimal size exists."""


class RegressorNotFittedError(RuntimeError):
    """Raised when an unfitted regressor is used for prediction."""


@dataclass
class CameraRegressor:
    """Affine workspace -> pixel map for one view."""
    inlier_threshold: float
    coef: Optional[np.ndarray] = None       # (outputs, 3)
    intercept: Optional[np.ndarray] = None  # (outputs,)
    inlier_mask: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def fitted(self) -> bool:
        return self.coef is not None

    def predict(self, points: Sequence[float]) -> np.ndarray:
        """Pixels for one point (outputs,) or a batch (N, outputs)."""
        if not self.fitted:
            raise RegressorNotFittedError("camera regressor used before fit_ransac")
        points = np.asarray(points, dtype=float)
        return points @ self.coef.T + self.intercept

    def residuals(self, points: np.ndarray, pixels: np.ndarray) -> np.ndarray:
        pixels = np.asarray(pixels, dtype=float).reshape(len(points), -1)
        return np.sum(np.abs(self.predict(points) - pixels), axis=1)


def fit_ransac(points: Sequence[Sequence[float]], pixels: Sequence, threshold: float = 4.0,
               iterations: int = 200, seed: Optional[int] = 0) -> CameraRegressor:
    """
    Fit an affine map with RANSAC.

    Minimal sets of four pairs are sampled, each fitted by least squares;
    pairs whose summed absolute pixel residual is within `threshold` count
    as inliers, and the best consensus set is refitted.

    Args:
        points: N x 3 workspace points
        pixels: N x k pixel coordinates (k=2 top-down, k=1 or flat for side)
        threshold: inlier threshold in pixels
        iterations: maximum number of sampled minimal sets
        seed: random state for deterministic sampling
    """
    X = np.asarray(points, dtype=float)
    y = np.asarray(pixels, dtype=float)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if len(X) < MIN_PAIRS:
        raise RansacFitError(f"need at least {MIN_PAIRS} calibration pairs, got {len(X)}")
    if len(X) != len(y):
        raise RansacFitError(f"{len(X)} points but {len(y)} pixel observations")

    ransac = RANSACRegressor(
        estimator=LinearRegression(),
        min_samples=MIN_PAIRS,
        residual_threshold=threshold,
        max_trials=iterations,
        random_state=seed,
    )
    try:
        ransac.fit(X, y)
    except ValueError as e:
        raise RansacFitError(f"RANSAC found no consensus set: {e}") from e

    inliers = np.asarray(ransac.inlier_mask_, dtype=bool)
    if inliers.sum() < MIN_PAIRS:
        raise RansacFitError(f"consensus set of {inliers.sum()} pairs is below the minimal size")

    estimator = ransac.estimator_
    regressor = CameraRegressor(
        inlier_threshold=threshold,
        coef=np.atleast_2d(np.asarray(estimator.coef_, dtype=float)),
        intercept=np.atleast_1d(np.asarray(estimator.intercept_, dtype=float)),
        inlier_mask=inliers,
    )
    logger.info(f"RANSAC fit: {int(inliers.sum())}/{len(X)} inliers, threshold {threshold}px")
    return regressor


def fit_camera_regressors(points: np.ndarray, top_pixels: np.ndarray, side_pixels: np.ndarray,
                          threshold: float = 4.0, iterations: int = 200,
                          seed: Optional[int] = 0) -> Tuple[CameraRegressor, CameraRegressor]:
    """One regressor per camera view: (top-down, side)."""
    top = fit_ransac(points, top_pixels, threshold, iterations, seed)
    side = fit_ransac(points, side_pixels, threshold, iterations, None if seed is None else seed + 1)
    return top, side


def robot_pixel(top: CameraRegressor, side: CameraRegressor, effector: Sequence[float]) -> PixelPoint3:
    """Robot position in image space: (u, v) from the top-down map, w from the side map."""
    u, v = top.predict(effector)[:2]
    w = side.predict(effector)[0]
    return PixelPoint3(float(u), float(v), float(w))
