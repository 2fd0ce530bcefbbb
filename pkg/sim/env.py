"""
Kinematic tabletop simulator.

Pure transition functions over WorldState plus a small TabletopEnv holder
bundling a task pair with the camera model and the prompt grid.
"""
import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from core.geometry import GridSpec
from .projection import Projection, SeedLike, as_generator
from .tasks import Direction, TaskSpec
from .world import (
    DELTA_MAX, GRASP_RADIUS, OBJECT_REST_Z, WORKSPACE_HIGH, WORKSPACE_LOW,
    Action, Gripper, GripperCommand, ObjectState, WorldState, as_vec3,
)

logger = logging.getLogger(__name__)


def reset(task: TaskSpec, seed: SeedLike = None, perturb: bool = False) -> WorldState:
    """
    Nominal start state of a task, optionally with objects perturbed
    uniformly inside a disk of the task's perturbation radius.
    """
    state = task.nominal_state()
    if not perturb or task.perturb_radius <= 0:
        return state

    rng = as_generator(seed)
    objects = []
    for obj in state.objects:
        radius = task.perturb_radius * np.sqrt(rng.uniform())
        angle = rng.uniform(0.0, 2.0 * np.pi)
        x = obj.position[0] + radius * np.cos(angle)
        y = obj.position[1] + radius * np.sin(angle)
        x, y = np.clip([x, y], WORKSPACE_LOW, WORKSPACE_HIGH)
        objects.append(replace(obj, position=as_vec3((x, y, obj.position[2]))))
    return state.with_objects(objects)


def begin_episode(state: WorldState) -> WorldState:
    """Continue from an arbitrary state without resetting the scene."""
    return replace(state, step_count=0)


def step(state: WorldState, action: Action, task: TaskSpec) -> Tuple[WorldState, bool]:
    """
    Apply one action.

    The effector moves by the clamped delta inside the workspace, a held
    object tracks it exactly, closing within the grasp radius picks up the
    nearest object and opening drops the held object onto the table.
    """
    delta = np.clip(np.asarray(action.delta, dtype=float), -DELTA_MAX, DELTA_MAX)
    effector = np.clip(np.asarray(state.effector, dtype=float) + delta, WORKSPACE_LOW, WORKSPACE_HIGH)
    eff = as_vec3(effector)

    objects = [replace(obj, position=eff) if obj.held else obj for obj in state.objects]
    gripper = state.gripper

    if action.gripper_command is GripperCommand.CLOSE and gripper is Gripper.OPEN:
        gripper = Gripper.CLOSED
        distances = [np.linalg.norm(effector - np.asarray(obj.position)) for obj in objects]
        if distances:
            nearest = int(np.argmin(distances))
            if distances[nearest] <= GRASP_RADIUS:
                objects[nearest] = ObjectState(objects[nearest].id, eff, held=True)
    elif action.gripper_command is GripperCommand.OPEN and gripper is Gripper.CLOSED:
        gripper = Gripper.OPEN
        objects = [
            ObjectState(obj.id, (eff[0], eff[1], OBJECT_REST_Z), held=False) if obj.held else obj
            for obj in objects
        ]

    new_state = WorldState(effector=eff, gripper=gripper, objects=tuple(objects), step_count=state.step_count + 1)
    done = task.is_success(new_state) or new_state.step_count >= task.horizon
    return new_state, done


@dataclass(frozen=True)
class TabletopEnv:
    """A reset-free task pair observed through the two-view camera model."""
    forward: TaskSpec
    backward: TaskSpec
    projection: Projection
    grid: GridSpec

    def task(self, direction: Direction) -> TaskSpec:
        return self.forward if direction is Direction.FORWARD else self.backward

    def with_perturb_radius(self, radius: float) -> "TabletopEnv":
        return replace(
            self,
            forward=self.forward.with_perturb_radius(radius),
            backward=self.backward.with_perturb_radius(radius),
        )
