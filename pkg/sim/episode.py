"""
Episodes: ordered frames of world state and the actions taken from them.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional

from .env import begin_episode, step
from .tasks import Direction, TaskSpec
from .world import Action, WorldState

Policy = Callable[[WorldState], Action]


@dataclass(frozen=True)
class Frame:
    """State at step t, the action taken from it (None on the last frame) and ground truth success."""
    t: int
    state: WorldState
    action: Optional[Action]
    success: bool


@dataclass
class Episode:
    """One rollout of a single task direction."""
    task_name: str
    direction: Direction
    frames: List[Frame] = field(default_factory=list)
    episode_id: int = 0
    is_demo: bool = False

    @property
    def succeeded(self) -> bool:
        return any(frame.success for frame in self.frames)

    @property
    def final_state(self) -> WorldState:
        return self.frames[-1].state

    def __len__(self) -> int:
        return len(self.frames)


def rollout(task: TaskSpec, start: WorldState, policy: Policy, horizon: Optional[int] = None,
            episode_id: int = 0) -> Episode:
    """Run `policy` from `start` until success or the horizon."""
    horizon = task.horizon if horizon is None else horizon
    state = begin_episode(start)
    episode = Episode(task_name=task.name, direction=task.direction, episode_id=episode_id)
    success = task.is_success(state)
    done = success
    t = 0
    while not done and t < horizon:
        action = policy(state)
        episode.frames.append(Frame(t, state, action, success))
        state, done = step(state, action, task)
        success = task.is_success(state)
        t += 1
    episode.frames.append(Frame(t, state, None, success))
    return episode
