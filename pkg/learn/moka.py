"""
Open-loop waypoint executor.

Turns a block sequence straight into motions with no learning and no
feedback: every block centroid is mapped back to the workspace through
the camera model, the whole action plan is computed from the start
effector position, and the plan is replayed blindly. The gripper closes
once the first lowest block is reached and opens at the final block.
"""
import logging
from typing import List, Optional

import numpy as np

from core.geometry import BlockSequence, GridSpec, block_to_pixel3
from sim.env import begin_episode, step
from sim.projection import Projection, unproject
from sim.tasks import TaskSpec
from sim.world import DELTA_MAX, WORKSPACE_HIGH, WORKSPACE_LOW, Action, GripperCommand, WorldState, as_vec3

logger = logging.getLogger(__name__)

REACH_TOLERANCE = 1e-9


def waypoint_positions(seq: BlockSequence, grid: GridSpec, proj: Projection) -> np.ndarray:
    """Workspace positions of the block centroids (N x 3)."""
    return np.array([unproject(proj, block_to_pixel3(grid, block)) for block in seq])


def plan_actions(start_effector, waypoints: np.ndarray, grasp_index: int) -> List[Action]:
    """Straight clipped moves through every waypoint, with the grasp and release commands."""
    current = np.asarray(start_effector, dtype=float)
    actions: List[Action] = []
    last = len(waypoints) - 1
    for i, goal in enumerate(waypoints):
        while np.max(np.abs(goal - current)) > REACH_TOLERANCE:
            delta = np.clip(goal - current, -DELTA_MAX, DELTA_MAX)
            current = current + delta
            actions.append(Action(as_vec3(delta)))
        if i == grasp_index:
            actions.append(Action(gripper_command=GripperCommand.CLOSE))
        if i == last:
            actions.append(Action(gripper_command=GripperCommand.OPEN))
    return actions


def moka_executor(task: TaskSpec, seq: BlockSequence, grid: GridSpec, proj: Projection,
                  start: WorldState, horizon: Optional[int] = None) -> bool:
    """
    Execute the waypoint plan from `start` and report task success.

    A waypoint outside the workspace or a plan longer than the horizon is
    a failure.
    """
    if seq is None or len(seq) == 0:
        raise ValueError("open-loop executor needs a non-empty block sequence")
    horizon = task.horizon if horizon is None else horizon

    waypoints = waypoint_positions(seq, grid, proj.noiseless())
    if np.any(waypoints < WORKSPACE_LOW - 1e-9) or np.any(waypoints > WORKSPACE_HIGH + 1e-9):
        logger.warning(f"Waypoint outside the workspace for {task.name}, executor fails")
        return False

    lowest = min(block.z for block in seq)
    grasp_index = next(i for i, block in enumerate(seq) if block.z == lowest)
    actions = plan_actions(start.effector, waypoints, grasp_index)
    if len(actions) > horizon:
        logger.warning(f"Open-loop plan needs {len(actions)} steps, horizon is {horizon}")
        return False

    state = begin_episode(start)
    for action in actions:
        state, _ = step(state, action, task)
    return task.is_success(state)
