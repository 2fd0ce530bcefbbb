"""
Scripted expert and failure generators.

Demonstrations at desk scale are produced by a greedy proportional
controller instead of teleoperation; failures come from random actions or
from an expert that never lets go of the object.
"""
import logging
from typing import List, Optional

import numpy as np

from .env import reset
from .episode import Episode, rollout
from .projection import SeedLike, as_generator
from .tasks import TaskSpec
from .world import DELTA_MAX, NOOP, Action, Gripper, GripperCommand, WorldState, as_vec3

logger = logging.getLogger(__name__)

PHASE_TOLERANCE = 0.01
# the object is let go anywhere in this band above its resting height over the target
RELEASE_CLEARANCE = 0.06
MAX_FAILURE_RESAMPLES = 50


def _move(goal: np.ndarray, effector: np.ndarray) -> np.ndarray:
    return np.clip(goal - effector, -DELTA_MAX, DELTA_MAX)


def scripted_expert(task: TaskSpec, state: WorldState, noise_std: float = 0.0,
                    rng: Optional[np.random.Generator] = None) -> Action:
    """
    Greedy pick-and-place controller.

    Moves above the object, descends, grasps, lifts, moves above the
    target, descends into the release band and releases. The gripper
    command always names the wanted gripper state (CLOSE while carrying,
    OPEN otherwise); the simulator ignores a command that matches the
    current gripper state.
    Returns a no-op once the task is solved, and a no-op (logged) when the
    target lies outside the workspace.
    """
    if not task.is_reachable():
        logger.warning(f"Target {task.target_center} of task {task.name} is unreachable")
        return NOOP
    if task.is_success(state):
        return NOOP

    eff = np.asarray(state.effector, dtype=float)
    obj = state.object(task.object_id)
    lift = task.lift_height
    command = GripperCommand.OPEN

    if obj.held:
        command = GripperCommand.CLOSE
        goal = np.asarray(task.target_center, dtype=float)
        if np.hypot(*(goal[:2] - eff[:2])) > PHASE_TOLERANCE:
            if eff[2] < lift - PHASE_TOLERANCE:
                move = _move(np.array([eff[0], eff[1], lift]), eff)
            else:
                move = _move(np.array([goal[0], goal[1], lift]), eff)
        elif eff[2] > goal[2] + RELEASE_CLEARANCE:
            move = _move(np.array([eff[0], eff[1], goal[2]]), eff)
        else:
            move = np.zeros(3)
            command = GripperCommand.OPEN
    elif state.gripper is Gripper.CLOSED:
        # missed grasp or object released elsewhere: open and back off upwards
        move = _move(np.array([eff[0], eff[1], lift]), eff)
    else:
        target = np.asarray(obj.position, dtype=float)
        if np.hypot(*(target[:2] - eff[:2])) > PHASE_TOLERANCE:
            if eff[2] < lift - PHASE_TOLERANCE:
                move = _move(np.array([eff[0], eff[1], lift]), eff)
            else:
                move = _move(np.array([target[0], target[1], lift]), eff)
        elif eff[2] > target[2] + PHASE_TOLERANCE:
            move = _move(target, eff)
        else:
            move = _move(target, eff)
            command = GripperCommand.CLOSE

    if noise_std > 0:
        move = move + as_generator(rng).normal(0.0, noise_std, size=3)
    return Action(as_vec3(np.clip(move, -DELTA_MAX, DELTA_MAX)), command)


def expert_episode(task: TaskSpec, seed: SeedLike = None, perturb: bool = True,
                   noise_std: float = 0.0, start: Optional[WorldState] = None,
                   episode_id: int = 0) -> Episode:
    """Roll out the scripted expert from a (perturbed) reset or a given start state."""
    rng = as_generator(seed)
    state = reset(task, rng, perturb=perturb) if start is None else start
    episode = rollout(task, state, lambda s: scripted_expert(task, s, noise_std, rng), episode_id=episode_id)
    episode.is_demo = True
    return episode


def _random_policy(rng: np.random.Generator):
    commands = [GripperCommand.NONE, GripperCommand.NONE, GripperCommand.CLOSE, GripperCommand.OPEN]

    def policy(_: WorldState) -> Action:
        delta = rng.uniform(-DELTA_MAX, DELTA_MAX, size=3)
        return Action(as_vec3(delta), commands[int(rng.integers(len(commands)))])
    return policy


def _truncated_expert(task: TaskSpec, rng: np.random.Generator, noise_std: float):
    def policy(state: WorldState) -> Action:
        action = scripted_expert(task, state, noise_std, rng)
        if action.gripper_command is GripperCommand.OPEN:
            return Action(action.delta, GripperCommand.NONE)
        return action
    return policy


def generate_failure(task: TaskSpec, seed: SeedLike = None, mode: str = "random",
                     noise_std: float = 0.0, episode_id: int = 0) -> Episode:
    """
    A rollout that ends without success.

    Modes:
        random: uniform random actions; resampled if it succeeds by chance.
        truncated: the expert with every release command suppressed.
    """
    rng = as_generator(seed)
    for attempt in range(MAX_FAILURE_RESAMPLES):
        start = reset(task, rng, perturb=True)
        if mode == "random":
            policy = _random_policy(rng)
        elif mode == "truncated":
            policy = _truncated_expert(task, rng, noise_std)
        else:
            raise ValueError(f"unknown failure mode '{mode}'")
        episode = rollout(task, start, policy, episode_id=episode_id)
        if not episode.succeeded:
            return episode
        logger.warning(f"Failure rollout for {task.name} succeeded by chance, resampling (attempt {attempt + 1})")
    raise RuntimeError(f"could not generate a failure episode for {task.name}")


def generate_failures(task: TaskSpec, count: int, seed: SeedLike = None,
                      first_episode_id: int = 0) -> List[Episode]:
    """Exactly `count` failures, alternating random and truncated-expert modes."""
    rng = as_generator(seed)
    modes = ("random", "truncated")
    return [
        generate_failure(task, rng, mode=modes[i % 2], episode_id=first_episode_id + i)
        for i in range(count)
    ]
