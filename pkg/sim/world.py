"""
World state and action types for the tabletop simulator.

Everything here is immutable; the simulator returns new states instead of
mutating old ones.
"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

Vec3 = Tuple[float, float, float]

# Unit-box workspace, kinematic physics
WORKSPACE_LOW = 0.0
WORKSPACE_HIGH = 1.0
DELTA_MAX = 0.05
GRASP_RADIUS = 0.05
OBJECT_REST_Z = 0.05  # object centre height when resting on the table


class Gripper(Enum):
    """Gripper opening state."""
    OPEN = "open"
    CLOSED = "closed"


class GripperCommand(Enum):
    """Gripper command carried by an action."""
    OPEN = "open"
    CLOSE = "close"
    NONE = "none"


def as_vec3(values: Sequence[float]) -> Vec3:
    return (float(values[0]), float(values[1]), float(values[2]))


@dataclass(frozen=True)
class ObjectState:
    """A movable object on the table."""
    id: str
    position: Vec3
    held: bool = False


@dataclass(frozen=True)
class WorldState:
    """Full simulator state."""
    effector: Vec3
    gripper: Gripper
    objects: Tuple[ObjectState, ...]
    step_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if sum(1 for obj in self.objects if obj.held) > 1:
            raise ValueError("at most one object may be held")

    def object(self, object_id: str) -> ObjectState:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(f"no object '{object_id}' in world state")

    def held_object(self) -> Optional[ObjectState]:
        for obj in self.objects:
            if obj.held:
                return obj
        return None

    def with_objects(self, objects: Sequence[ObjectState]) -> "WorldState":
        return replace(self, objects=tuple(objects))


@dataclass(frozen=True)
class Action:
    """Effector displacement plus gripper command."""
    delta: Vec3 = (0.0, 0.0, 0.0)
    gripper_command: GripperCommand = GripperCommand.NONE

    def clamped(self, delta_max: float = DELTA_MAX) -> "Action":
        return Action(as_vec3(np.clip(self.delta, -delta_max, delta_max)), self.gripper_command)

    def to_vector(self, delta_max: float = DELTA_MAX) -> np.ndarray:
        """Policy-space action: delta / delta_max in [-1, 1] and a gripper scalar."""
        grip = {GripperCommand.CLOSE: 1.0, GripperCommand.OPEN: -1.0, GripperCommand.NONE: 0.0}
        vec = np.clip(np.asarray(self.delta, dtype=float) / delta_max, -1.0, 1.0)
        return np.append(vec, grip[self.gripper_command])

    @classmethod
    def from_vector(cls, vector: Sequence[float], delta_max: float = DELTA_MAX) -> "Action":
        vector = np.clip(np.asarray(vector, dtype=float), -1.0, 1.0)
        if vector[3] > 1.0 / 3.0:
            command = GripperCommand.CLOSE
        elif vector[3] < -1.0 / 3.0:
            command = GripperCommand.OPEN
        else:
            command = GripperCommand.NONE
        return cls(as_vec3(vector[:3] * delta_max), command)


NOOP = Action()
ACTION_DIM = 4
