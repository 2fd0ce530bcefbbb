"""
Offline-to-online reinforcement learning for wayshape.

This package contains:
- numpy MLPs with analytic gradients and Adam
- Replay buffer with offline/online partitions
- Conservative actor-critic with Monte-Carlo calibrated penalty
- Behaviour-cloning reference policy
- Demo generation, reset-free fine-tuning and the open-loop executor

The fine-tuning loop imports the reward engine, so it is not re-exported
here; import it from learn.finetune.
"""

from .agent import ConservativeActorCritic, Hyperparams, pretrain_offline
from .features import FEATURE_DIM, state_features
from .networks import MLP, Adam, mlp_backward, mlp_forward
from .replay_buffer import ReplayBuffer, Transition, episode_transitions, monte_carlo_returns

__all__ = [
    'ConservativeActorCritic', 'Hyperparams', 'pretrain_offline',
    'FEATURE_DIM', 'state_features',
    'MLP', 'Adam', 'mlp_backward', 'mlp_forward',
    'ReplayBuffer', 'Transition', 'episode_transitions', 'monte_carlo_returns',
]
