"""
Behaviour-cloning reference policy: regression of demo actions on state features.
"""
import logging
from typing import Optional

import numpy as np

from sim.tasks import TaskSpec
from sim.world import ACTION_DIM, Action, WorldState
from .agent import Hyperparams
from .features import FEATURE_DIM, state_features
from .networks import MLP, Adam
from .replay_buffer import ReplayBuffer

logger = logging.getLogger(__name__)


class BehaviorCloningPolicy:
    """Tanh-squashed MLP regressed onto demonstration actions."""

    def __init__(self, hyper: Optional[Hyperparams] = None, seed: int = 0):
        self.hyper = hyper or Hyperparams()
        hidden = self.hyper.hidden_size
        self.actor = MLP((FEATURE_DIM, hidden, hidden, ACTION_DIM), np.random.default_rng([seed, 6]), output_scale=0.1)
        self.optimizer = Adam(self.actor.params, lr=self.hyper.actor_lr)
        self.rng = np.random.default_rng([seed, 7])

    def act(self, features: np.ndarray, explore: bool = False) -> np.ndarray:
        return np.tanh(self.actor(np.atleast_2d(features)))[0]

    def policy(self, task: TaskSpec, explore: bool = False):
        def _policy(state: WorldState) -> Action:
            return Action.from_vector(self.act(state_features(state, task)))
        return _policy

    def loss_and_grads(self, s: np.ndarray, a: np.ndarray):
        pre, cache = self.actor.forward(s)
        mu = np.tanh(pre)
        diff = mu - a
        grads, _ = self.actor.backward(cache, 2.0 * diff / len(s) * (1.0 - mu ** 2))
        return float(np.mean(np.sum(diff ** 2, axis=1))), grads


def train_behavior_cloning(buffer: ReplayBuffer, hyper: Optional[Hyperparams] = None,
                           seed: int = 0) -> BehaviorCloningPolicy:
    """Fit the BC policy on the successful demonstrations of an offline buffer."""
    hyper = hyper or Hyperparams()
    idx = buffer.demo_indices()
    if len(idx) == 0:
        raise ValueError("behaviour cloning needs demonstration transitions")
    policy = BehaviorCloningPolicy(hyper, seed)
    loss = float("nan")
    for _ in range(hyper.offline_steps):
        pick = idx[policy.rng.integers(0, len(idx), size=hyper.batch_size)]
        loss, grads = policy.loss_and_grads(buffer.s[pick], buffer.a[pick])
        policy.optimizer.step(grads)
    logger.info(f"Behaviour cloning finished after {hyper.offline_steps} steps, loss {loss:.4f}")
    return policy
