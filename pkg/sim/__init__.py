"""
Desk-scale tabletop simulator for wayshape.

This package contains:
- Immutable world state and actions
- Reset-free forward/backward task pairs
- Two-view orthographic camera model
- Kinematic transition function and rollouts
- Scripted expert and failure generators
"""

from .env import TabletopEnv, begin_episode, reset, step
from .episode import Episode, Frame, rollout
from .expert import expert_episode, generate_failure, generate_failures, scripted_expert
from .projection import Projection, ProjectedFrame, calibration_pairs, project, unproject
from .tasks import Direction, TaskSpec, make_task_pair
from .world import ACTION_DIM, Action, Gripper, GripperCommand, ObjectState, WorldState

__all__ = [
    'TabletopEnv', 'begin_episode', 'reset', 'step',
    'Episode', 'Frame', 'rollout',
    'expert_episode', 'generate_failure', 'generate_failures', 'scripted_expert',
    'Projection', 'ProjectedFrame', 'calibration_pairs', 'project', 'unproject',
    'Direction', 'TaskSpec', 'make_task_pair',
    'ACTION_DIM', 'Action', 'Gripper', 'GripperCommand', 'ObjectState', 'WorldState',
]
