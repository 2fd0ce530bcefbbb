"""
Reward engine for wayshape.

This package contains:
- RANSAC camera regressors (effector state -> pixels)
- Dense waypoint-following reward with the shifted tanh transform
- Simulated consensus success classifier
- Per-frame episode labeling under the three reward formulations
"""

from .dense import RewardParams, dense_reward, nearest_block, object_reward, shaping_transform
from .labeling import Formulation, LabeledFrame, MissingWaypointsError, RewardEngine, label_episode, label_frames
from .ransac import CameraRegressor, RansacFitError, RegressorNotFittedError, fit_camera_regressors, fit_ransac, robot_pixel
from .sparse import SparseClassifier, sample_consensus, sparse_reward

__all__ = [
    'RewardParams', 'dense_reward', 'nearest_block', 'object_reward', 'shaping_transform',
    'Formulation', 'LabeledFrame', 'MissingWaypointsError', 'RewardEngine', 'label_episode', 'label_frames',
    'CameraRegressor', 'RansacFitError', 'RegressorNotFittedError', 'fit_camera_regressors',
    'fit_ransac', 'robot_pixel',
    'SparseClassifier', 'sample_consensus', 'sparse_reward',
]
