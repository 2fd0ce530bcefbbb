"""
Simulated sparse success classifier with prompt consensus.

Stands in for a fine-tuned VLM success detector: each of k task-completion
prompts is answered by a noisy copy of the ground-truth predicate, and the
sparse reward fires only when every prompt agrees the task is done.
"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from sim.world import WorldState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SparseClassifier:
    """Noisy per-prompt success answers combined by unanimous consensus."""
    predicate: Callable[[WorldState], bool]
    k_prompts: int = 4
    p_fp: float = 0.0
    p_fn: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.k_prompts < 1:
            raise ValueError(f"k_prompts must be >= 1, got {self.k_prompts}")
        for name in ("p_fp", "p_fn"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {rate}")

    def rng(self, episode_id: int, frame_index: int) -> np.random.Generator:
        """Noise stream keyed by (seed, episode, frame) so labeling order does not matter."""
        return np.random.default_rng([self.seed, episode_id, frame_index])


def sample_consensus(truth: np.ndarray, k: int, p_fp: float, p_fn: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Vectorised consensus draws: 1 where all k noisy answers are 'success'."""
    truth = np.asarray(truth, dtype=bool)
    draws = rng.uniform(size=truth.shape + (k,))
    p_yes = np.where(truth, 1.0 - p_fn, p_fp)[..., None]
    return np.all(draws < p_yes, axis=-1).astype(int)


def sparse_reward(classifier: SparseClassifier, state: WorldState, episode_id: int = 0,
                  frame_index: int = 0) -> int:
    truth = bool(classifier.predicate(state))
    rng = classifier.rng(episode_id, frame_index)
    return int(sample_consensus(np.array(truth), classifier.k_prompts, classifier.p_fp, classifier.p_fn, rng))
