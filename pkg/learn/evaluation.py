"""
Policy evaluation and critic calibration checks.
"""
import logging
from typing import Optional

import numpy as np

from sim.env import reset
from sim.episode import rollout
from sim.tasks import TaskSpec
from .agent import ConservativeActorCritic
from .replay_buffer import ReplayBuffer

logger = logging.getLogger(__name__)


def evaluate_policy(agent, task: TaskSpec, trials: int = 20, seed: int = 0, perturb: bool = True) -> float:
    """
    Success rate of the deterministic policy over `trials` resets.

    Trial i always starts from the reset drawn with seed (seed, i), so
    snapshots of different policies face the same start states.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    policy = agent.policy(task, explore=False)
    successes = 0
    for trial in range(trials):
        start = reset(task, np.random.default_rng([seed, trial]), perturb=perturb)
        successes += int(rollout(task, start, policy).succeeded)
    return successes / trials


def calibration_fraction(agent: ConservativeActorCritic, buffer: ReplayBuffer, epsilon: float = 0.5,
                         indices: Optional[np.ndarray] = None) -> float:
    """Fraction of demo transitions whose Q(s, a) is at least the Monte-Carlo return minus epsilon."""
    idx = buffer.demo_indices() if indices is None else indices
    if len(idx) == 0:
        raise ValueError("no demonstration transitions to check calibration on")
    q = agent.q(buffer.s[idx], buffer.a[idx])
    return float(np.mean(q >= buffer.mc_return[idx] - epsilon))
