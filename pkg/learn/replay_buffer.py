"""
Replay buffer for offline-to-online fine-tuning.

Fixed-capacity ring storage of transitions in preallocated numpy arrays.
Every slot is tagged offline (demonstrations and failures collected
before training) or online (autonomous practice), and batches mix the
two partitions at a configurable ratio.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from sim.episode import Episode
from sim.tasks import TaskSpec
from sim.world import ACTION_DIM
from .features import FEATURE_DIM, state_features

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s2: np.ndarray
    done: bool
    mc_return: float
    online: bool = False
    demo: bool = False

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"reward {self.r} outside [0, 1]")
        if not (np.all(np.isfinite(self.s)) and np.all(np.isfinite(self.s2))):
            raise ValueError("non-finite transition features")


def monte_carlo_returns(rewards: Sequence[float], dones: Sequence[bool], gamma: float) -> np.ndarray:
    """
    Discounted return-to-go of every transition.

    A transition that reaches success enters an absorbing state that keeps
    paying its reward, so its return is r / (1 - gamma); a truncated
    episode is not bootstrapped.
    """
    returns = np.zeros(len(rewards))
    running = 0.0
    for i in reversed(range(len(rewards))):
        if dones[i]:
            running = rewards[i] / (1.0 - gamma)
        else:
            running = rewards[i] + gamma * running
        returns[i] = running
    return returns


def episode_transitions(episode: Episode, frame_rewards: Sequence[float], task: TaskSpec, gamma: float,
                        online: bool = False, frame_done: Optional[Sequence[bool]] = None) -> List[Transition]:
    """
    Transitions of one labeled episode.

    The reward of the transition out of frame t is the label of frame t+1
    and the transition is terminal when frame t+1 is done: the frame's
    ground-truth success unless `frame_done` gives per-frame flags.
    """
    frames = episode.frames
    if len(frame_rewards) != len(frames):
        raise ValueError(f"{len(frame_rewards)} labels for {len(frames)} frames")
    if frame_done is None:
        frame_done = [frame.success for frame in frames]
    elif len(frame_done) != len(frames):
        raise ValueError(f"{len(frame_done)} done flags for {len(frames)} frames")
    n = len(frames) - 1
    rewards = [float(frame_rewards[t + 1]) for t in range(n)]
    dones = [bool(frame_done[t + 1]) for t in range(n)]
    returns = monte_carlo_returns(rewards, dones, gamma)
    features = [state_features(frame.state, task) for frame in frames]
    return [
        Transition(
            s=features[t],
            a=frames[t].action.to_vector(),
            r=rewards[t],
            s2=features[t + 1],
            done=dones[t],
            mc_return=float(returns[t]),
            online=online,
            demo=episode.is_demo,
        )
        for t in range(n)
    ]


class ReplayBuffer:
    """Ring buffer with offline/online partition tags."""

    ARRAYS = ("s", "a", "r", "s2", "done", "mc_return", "online", "demo")

    def __init__(self, capacity: int = 250000, feature_dim: int = FEATURE_DIM, action_dim: int = ACTION_DIM):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.s = np.zeros((capacity, feature_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, feature_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.mc_return = np.zeros(capacity)
        self.online = np.zeros(capacity, dtype=bool)
        self.demo = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.position = 0
        self.inserted = 0
        self.episodes = 0
        self._partitions: Optional[Dict[bool, np.ndarray]] = None

    def __len__(self) -> int:
        return self.size

    def add(self, transition: Transition) -> None:
        i = self.position
        self.s[i] = transition.s
        self.a[i] = transition.a
        self.r[i] = transition.r
        self.s2[i] = transition.s2
        self.done[i] = transition.done
        self.mc_return[i] = transition.mc_return
        self.online[i] = transition.online
        self.demo[i] = transition.demo
        self.position = (self.position + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.inserted += 1
        self._partitions = None

    def add_episode(self, transitions: Iterable[Transition]) -> None:
        for transition in transitions:
            self.add(transition)
        self.episodes += 1

    def count(self, online: bool) -> int:
        return int(len(self._partition(online)))

    def _partition(self, online: bool) -> np.ndarray:
        if self._partitions is None:
            tags = self.online[:self.size]
            self._partitions = {True: np.flatnonzero(tags), False: np.flatnonzero(~tags)}
        return self._partitions[online]

    def sample_indices(self, batch_size: int, rng: np.random.Generator, offline_ratio: Optional[float] = None) -> np.ndarray:
        """
        Uniform indices, optionally drawing `offline_ratio` of the batch
        from the offline partition and the rest from the online one.
        """
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        offline, online = self._partition(False), self._partition(True)
        if offline_ratio is None or len(offline) == 0 or len(online) == 0:
            return rng.integers(0, self.size, size=batch_size)
        n_offline = int(round(batch_size * offline_ratio))
        picks = [
            offline[rng.integers(0, len(offline), size=n_offline)],
            online[rng.integers(0, len(online), size=batch_size - n_offline)],
        ]
        return np.concatenate(picks)

    def sample(self, batch_size: int, rng: np.random.Generator, offline_ratio: Optional[float] = None) -> Dict[str, np.ndarray]:
        return self.batch(self.sample_indices(batch_size, rng, offline_ratio))

    def batch(self, idx: np.ndarray) -> Dict[str, np.ndarray]:
        return {
            "s": self.s[idx],
            "a": self.a[idx],
            "r": self.r[idx],
            "s2": self.s2[idx],
            "done": self.done[idx].astype(float),
            "mc": self.mc_return[idx],
        }

    def demo_indices(self) -> np.ndarray:
        return np.flatnonzero(self.demo[:self.size] & ~self.online[:self.size])

    def mean_reward(self, online: Optional[bool] = None) -> float:
        if self.size == 0:
            return 0.0
        if online is None:
            return float(self.r[:self.size].mean())
        idx = self._partition(online)
        return float(self.r[idx].mean()) if len(idx) else 0.0

    def state_dict(self) -> Dict[str, Any]:
        """Filled slots plus ring counters; arrays stay numpy."""
        return {
            "capacity": self.capacity,
            "size": self.size,
            "position": self.position,
            "inserted": self.inserted,
            "episodes": self.episodes,
            **{name: getattr(self, name)[:self.size].copy() for name in self.ARRAYS},
        }

    @classmethod
    def from_state_dict(cls, state: Mapping[str, Any]) -> "ReplayBuffer":
        s = np.asarray(state["s"])
        a = np.asarray(state["a"])
        buffer = cls(int(state["capacity"]), feature_dim=s.shape[1], action_dim=a.shape[1])
        size = int(state["size"])
        for name in cls.ARRAYS:
            getattr(buffer, name)[:size] = state[name]
        buffer.size = size
        buffer.position = int(state["position"])
        buffer.inserted = int(state["inserted"])
        buffer.episodes = int(state["episodes"])
        return buffer
