"""
Offline dataset generation: scripted demonstrations plus failures.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from core.config import Config
from sim.env import TabletopEnv
from sim.episode import Episode
from sim.expert import expert_episode, generate_failures
from sim.tasks import Direction
from .replay_buffer import ReplayBuffer

logger = logging.getLogger(__name__)

MAX_DEMO_ATTEMPTS = 20


@dataclass(frozen=True)
class DemoCounts:
    """Episodes per category in an offline dataset."""
    forward: int
    backward: int
    failure: int

    def __post_init__(self):
        if min(self.forward, self.backward, self.failure) < 0:
            raise ValueError(f"demo counts must be >= 0, got {self}")

    @property
    def total(self) -> int:
        return self.forward + self.backward + self.failure

    @classmethod
    def from_list(cls, values: Sequence[int]) -> "DemoCounts":
        forward, backward, failure = (int(v) for v in values)
        return cls(forward, backward, failure)


def generate_demo_episodes(env: TabletopEnv, counts: DemoCounts, seed: int = 0,
                           noise_std: float = Config.DEMO_ACTION_NOISE) -> List[Episode]:
    """
    Successful expert rollouts from perturbed resets, then failures.

    A noisy demonstration that misses is discarded and redrawn. Failures
    are split between the directions, the forward task taking the odd one.
    """
    rng = np.random.default_rng([seed, 2])
    episodes: List[Episode] = []

    for direction, wanted in ((Direction.FORWARD, counts.forward), (Direction.BACKWARD, counts.backward)):
        task = env.task(direction)
        attempts = 0
        made = 0
        while made < wanted:
            episode = expert_episode(task, rng, perturb=True, noise_std=noise_std, episode_id=len(episodes))
            if episode.succeeded:
                episodes.append(episode)
                made += 1
                attempts = 0
                continue
            attempts += 1
            logger.warning(f"Discarding failed {direction.value} demonstration (attempt {attempts})")
            if attempts >= MAX_DEMO_ATTEMPTS:
                raise RuntimeError(f"scripted expert keeps failing the {direction.value} task")

    forward_failures = (counts.failure + 1) // 2
    for direction, n in ((Direction.FORWARD, forward_failures), (Direction.BACKWARD, counts.failure - forward_failures)):
        episodes.extend(generate_failures(env.task(direction), n, rng, first_episode_id=len(episodes)))

    logger.info(f"Generated {len(episodes)} offline episodes ({counts.forward}/{counts.backward}/{counts.failure})")
    return episodes


def demo_buffer(episodes: Sequence[Episode], engine, gamma: float,
                capacity: int = Config.BUFFER_CAPACITY) -> ReplayBuffer:
    """Label episodes with the reward engine and load them as offline data."""
    buffer = ReplayBuffer(capacity)
    for episode in episodes:
        buffer.add_episode(engine.transitions(episode, gamma, online=False))
    return buffer


def generate_demo_set(env: TabletopEnv, counts: DemoCounts, engine, seed: int = 0, gamma: float = Config.GAMMA,
                      noise_std: float = Config.DEMO_ACTION_NOISE,
                      capacity: int = Config.BUFFER_CAPACITY) -> ReplayBuffer:
    """Reward-labeled offline buffer with the requested numbers of episodes."""
    return demo_buffer(generate_demo_episodes(env, counts, seed, noise_std), engine, gamma, capacity)
