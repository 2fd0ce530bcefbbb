"""
Low-dimensional policy observations.

Layout (15 values): effector position (3), gripper closed bit (1),
object position (3), object minus effector (3), target minus object (3),
task one-hot (forward, backward).

Both offsets are measured in action steps (units of DELTA_MAX) and
clipped to +-RELATIVE_CLIP.
"""
import numpy as np

from sim.tasks import Direction, TaskSpec
from sim.world import DELTA_MAX, Gripper, WorldState

FEATURE_DIM = 15
RELATIVE_CLIP = 3.0


def relative_steps(offset: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(offset, dtype=float) / DELTA_MAX, -RELATIVE_CLIP, RELATIVE_CLIP)


def state_features(state: WorldState, task: TaskSpec) -> np.ndarray:
    effector = np.asarray(state.effector, dtype=float)
    obj = np.asarray(state.object(task.object_id).position, dtype=float)
    target = np.asarray(task.target_center, dtype=float)
    gripper = 1.0 if state.gripper is Gripper.CLOSED else 0.0
    one_hot = [1.0, 0.0] if task.direction is Direction.FORWARD else [0.0, 1.0]
    return np.concatenate([
        effector, [gripper], obj, relative_steps(obj - effector), relative_steps(target - obj), one_hot,
    ])
