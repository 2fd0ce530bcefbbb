"""
Forward/backward task definitions for the desk-scale Bin-Sorting setup.

A task pair is a mutual reset: the forward task's success region is the
backward task's nominal start, and vice versa, so the robot can practise
autonomously by alternating the two.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Tuple

import numpy as np

from .world import OBJECT_REST_Z, Gripper, ObjectState, Vec3, WorldState

logger = logging.getLogger(__name__)


class Direction(Enum):
    """Which half of a task pair."""
    FORWARD = "forward"
    BACKWARD = "backward"

    @property
    def other(self) -> "Direction":
        return Direction.BACKWARD if self is Direction.FORWARD else Direction.FORWARD


@dataclass(frozen=True)
class TaskSpec:
    """One direction of a reset-free task pair."""
    name: str
    instruction: str
    direction: Direction
    object_id: str
    nominal_objects: Tuple[Tuple[str, Vec3], ...]
    target_center: Vec3
    target_radius: float = 0.1
    perturb_radius: float = 0.06
    horizon: int = 60
    home_effector: Vec3 = (0.5, 0.5, 0.25)
    lift_height: float = 0.25
    grasp_source: str = "object"
    target_source: str = "left_bin"
    fixtures: Tuple[Tuple[str, Vec3], ...] = ()

    def is_success(self, state: WorldState) -> bool:
        """Object resting inside the target region with the gripper open."""
        obj = state.object(self.object_id)
        if obj.held or state.gripper is not Gripper.OPEN:
            return False
        dx = obj.position[0] - self.target_center[0]
        dy = obj.position[1] - self.target_center[1]
        return bool(np.hypot(dx, dy) <= self.target_radius)

    def nominal_state(self) -> WorldState:
        objects = tuple(ObjectState(obj_id, pos) for obj_id, pos in self.nominal_objects)
        return WorldState(effector=self.home_effector, gripper=Gripper.OPEN, objects=objects)

    def landmarks(self) -> Dict[str, Vec3]:
        """Fixture positions keyed by id, for prompt annotation."""
        return dict(self.fixtures)

    def is_reachable(self) -> bool:
        return all(0.0 <= c <= 1.0 for c in self.target_center[:2])

    def with_perturb_radius(self, radius: float) -> "TaskSpec":
        return replace(self, perturb_radius=radius)


# Cell centroids of the 6x6 grid in unit workspace coordinates
TRAY = (5.0 / 12.0, 3.0 / 12.0, OBJECT_REST_Z)
LEFT_BIN = (3.0 / 12.0, 9.0 / 12.0, OBJECT_REST_Z)
RIGHT_BIN = (9.0 / 12.0, 9.0 / 12.0, OBJECT_REST_Z)

FIXTURES = (("tray", TRAY), ("left_bin", LEFT_BIN), ("right_bin", RIGHT_BIN))

TASK_PAIRS = {
    "bin_sort_left": ("left_bin", LEFT_BIN),
    "bin_sort_right": ("right_bin", RIGHT_BIN),
}


def make_task_pair(name: str = "bin_sort_left", perturb_radius: float = 0.06,
                   horizon: int = 60) -> Tuple[TaskSpec, TaskSpec]:
    """Build the (forward, backward) task pair registered under `name`."""
    if name not in TASK_PAIRS:
        raise ValueError(f"unknown task '{name}', expected one of {sorted(TASK_PAIRS)}")
    bin_id, bin_position = TASK_PAIRS[name]
    side = bin_id.split("_")[0]

    forward = TaskSpec(
        name=name,
        instruction=f"put the object in the {side} bin",
        direction=Direction.FORWARD,
        object_id="object",
        nominal_objects=(("object", TRAY),),
        target_center=bin_position,
        perturb_radius=perturb_radius,
        horizon=horizon,
        grasp_source="object",
        target_source=bin_id,
        fixtures=FIXTURES,
    )
    backward = TaskSpec(
        name=name,
        instruction=f"take the object out of the {side} bin and put it on the tray",
        direction=Direction.BACKWARD,
        object_id="object",
        nominal_objects=(("object", bin_position),),
        target_center=TRAY,
        perturb_radius=perturb_radius,
        horizon=horizon,
        grasp_source="object",
        target_source="tray",
        fixtures=FIXTURES,
    )
    check_mutual_reset(forward, backward)
    return forward, backward


def check_mutual_reset(forward: TaskSpec, backward: TaskSpec) -> None:
    """Each task's success state must lie in the other's reset support."""
    for task, other in ((forward, backward), (backward, forward)):
        target = np.asarray(task.target_center[:2])
        nominal = np.asarray(dict(other.nominal_objects)[task.object_id][:2])
        if np.linalg.norm(target - nominal) > other.perturb_radius + 1e-12:
            raise ValueError(f"{task.direction.value} target is outside the {other.direction.value} reset support")
