"""
Conservative actor-critic with Monte-Carlo calibrated penalty.

The critic is trained with a TD loss plus a conservative term that
pushes down Q-values of sampled out-of-distribution actions relative to
the dataset action. Sampled values are first raised to the observed
return-to-go, so the penalty never drives estimates below what the data
has already achieved. The actor follows the critic with a
behaviour-cloning anchor, normalised by the critic's scale.
"""
import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.config import Config
from sim.tasks import TaskSpec
from sim.world import ACTION_DIM, Action, WorldState
from utils.monitoring import metrics_collector
from .features import FEATURE_DIM, state_features
from .networks import MLP, Adam
from .replay_buffer import ReplayBuffer

logger = logging.getLogger(__name__)

Batch = Dict[str, np.ndarray]


@dataclass
class Hyperparams:
    """Learner settings; defaults come from Config."""
    gamma: float = Config.GAMMA
    actor_lr: float = Config.ACTOR_LR
    critic_lr: float = Config.CRITIC_LR
    batch_size: int = Config.BATCH_SIZE
    alpha: float = Config.CONSERVATIVE_ALPHA
    tau: float = Config.TARGET_TAU
    bc_weight: float = Config.BC_WEIGHT
    exploration_std: float = Config.EXPLORATION_STD
    hidden_size: int = Config.HIDDEN_SIZE
    offline_steps: int = Config.OFFLINE_STEPS
    online_steps: int = Config.ONLINE_STEPS
    offline_ratio: float = Config.OFFLINE_RATIO
    random_actions: int = 4
    policy_actions: int = 4
    gripper_exploration: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.alpha < 0:
            raise ValueError(f"conservative alpha must be >= 0, got {self.alpha}")
        if not 0.0 <= self.offline_ratio <= 1.0:
            raise ValueError(f"offline ratio must be in [0, 1], got {self.offline_ratio}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Hyperparams":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


def logsumexp(x: np.ndarray, axis: int = -1) -> np.ndarray:
    peak = np.max(x, axis=axis, keepdims=True)
    return np.squeeze(peak, axis=axis) + np.log(np.sum(np.exp(x - peak), axis=axis))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.exp(x - np.max(x, axis=axis, keepdims=True))
    return z / np.sum(z, axis=axis, keepdims=True)


class ConservativeActorCritic:
    """Deterministic tanh actor with Gaussian exploration and a conservative Q critic."""

    def __init__(self, hyper: Optional[Hyperparams] = None, seed: int = 0,
                 feature_dim: int = FEATURE_DIM, action_dim: int = ACTION_DIM):
        self.hyper = hyper or Hyperparams()
        self.seed = seed
        self.feature_dim = feature_dim
        self.action_dim = action_dim
        hidden = self.hyper.hidden_size

        init_rng = np.random.default_rng([seed, 5])
        self.actor = MLP((feature_dim, hidden, hidden, action_dim), init_rng, output_scale=0.1)
        self.critic = MLP((feature_dim + action_dim, hidden, hidden, 1), init_rng)
        self.critic_target = self.critic.copy()
        self.actor_opt = Adam(self.actor.params, lr=self.hyper.actor_lr)
        self.critic_opt = Adam(self.critic.params, lr=self.hyper.critic_lr)
        self.rng = np.random.default_rng([seed, 4])
        self.updates = 0

    # ---- acting -------------------------------------------------------

    def policy_mean(self, s: np.ndarray) -> np.ndarray:
        return np.tanh(self.actor(s))

    def exploration_scale(self) -> np.ndarray:
        """Per-channel noise std; the gripper channel is scaled by gripper_exploration."""
        scale = np.full(self.action_dim, self.hyper.exploration_std)
        scale[-1] *= self.hyper.gripper_exploration
        return scale

    def act(self, features: np.ndarray, explore: bool = False) -> np.ndarray:
        mu = self.policy_mean(np.atleast_2d(features))[0]
        if explore:
            mu = np.clip(mu + self.rng.normal(0.0, 1.0, size=mu.shape) * self.exploration_scale(), -1.0, 1.0)
        return mu

    def policy(self, task: TaskSpec, explore: bool = False):
        """Rollout policy for one task direction."""
        def _policy(state: WorldState) -> Action:
            return Action.from_vector(self.act(state_features(state, task), explore))
        return _policy

    def q(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        return self.critic(np.hstack([s, a]))[:, 0]

    # ---- losses -------------------------------------------------------

    def td_targets(self, batch: Batch) -> np.ndarray:
        """
        r + gamma * Q_target(s', pi(s')); a success transition enters an
        absorbing state worth r / (1 - gamma).
        """
        gamma = self.hyper.gamma
        s2 = batch["s2"]
        q_next = self.critic_target(np.hstack([s2, self.policy_mean(s2)]))[:, 0]
        absorbing = batch["r"] / (1.0 - gamma)
        return batch["r"] + gamma * np.where(batch["done"] > 0.5, absorbing, q_next)

    def sample_actions(self, s: np.ndarray) -> np.ndarray:
        """Uniform random and noisy policy actions per state, shape (B, N, action_dim)."""
        B = len(s)
        random = self.rng.uniform(-1.0, 1.0, size=(B, self.hyper.random_actions, self.action_dim))
        mu = self.policy_mean(s)[:, None, :]
        noise = self.rng.normal(0.0, self.hyper.exploration_std, size=(B, self.hyper.policy_actions, self.action_dim))
        return np.concatenate([random, np.clip(mu + noise, -1.0, 1.0)], axis=1)

    def critic_loss_and_grads(self, batch: Batch, sampled: np.ndarray, alpha: Optional[float] = None,
                              targets: Optional[np.ndarray] = None) -> Tuple[float, List[np.ndarray]]:
        """
        0.5 * mean(td^2) + alpha * mean(logsumexp_j max(Q(s, a_j), G) - Q(s, a)).

        Targets and sampled actions are constants of the loss.
        """
        alpha = self.hyper.alpha if alpha is None else alpha
        s, a = batch["s"], batch["a"]
        y = self.td_targets(batch) if targets is None else targets
        B, N = sampled.shape[0], sampled.shape[1]

        x_data = np.hstack([s, a])
        x_samp = np.hstack([np.repeat(s, N, axis=0), sampled.reshape(B * N, -1)])
        out, cache = self.critic.forward(np.vstack([x_data, x_samp]))
        q = out[:, 0]
        q_data = q[:B]
        q_samp = q[B:].reshape(B, N)

        td = q_data - y
        loss = 0.5 * float(np.mean(td ** 2))
        grad_q = np.zeros_like(q)
        grad_q[:B] = td / B

        if alpha > 0:
            mc = batch["mc"][:, None]
            calibrated = np.maximum(q_samp, mc)
            loss += alpha * float(np.mean(logsumexp(calibrated, axis=1) - q_data))
            weights = softmax(calibrated, axis=1) * (q_samp >= mc)
            grad_q[:B] -= alpha / B
            grad_q[B:] = (alpha / B * weights).reshape(-1)

        grads, _ = self.critic.backward(cache, grad_q[:, None])
        return loss, grads

    def actor_loss_and_grads(self, batch: Batch, q_scale: float,
                             bc_weight: Optional[float] = None) -> Tuple[float, List[np.ndarray]]:
        """-mean(Q(s, mu(s))) / q_scale + bc_weight * mean(|mu(s) - a|^2), the squared norm taken per sample."""
        bc_weight = self.hyper.bc_weight if bc_weight is None else bc_weight
        s, a = batch["s"], batch["a"]
        B = len(s)
        pre, actor_cache = self.actor.forward(s)
        mu = np.tanh(pre)
        q_out, critic_cache = self.critic.forward(np.hstack([s, mu]))

        diff = mu - a
        loss = -float(np.mean(q_out)) / q_scale + bc_weight * float(np.mean(np.sum(diff ** 2, axis=1)))
        _, grad_x = self.critic.backward(critic_cache, np.full((B, 1), -1.0 / (B * q_scale)))
        grad_mu = grad_x[:, self.feature_dim:] + 2.0 * bc_weight * diff / B
        grads, _ = self.actor.backward(actor_cache, grad_mu * (1.0 - mu ** 2))
        return loss, grads

    # ---- training -----------------------------------------------------

    def update(self, batch: Batch) -> Dict[str, float]:
        """One critic step, one actor step, one target update."""
        critic_loss, critic_grads = self.critic_loss_and_grads(batch, self.sample_actions(batch["s"]))
        self.critic_opt.step(critic_grads)

        q_pi = self.q(batch["s"], self.policy_mean(batch["s"]))
        q_scale = max(float(np.mean(np.abs(q_pi))), 1e-3)
        actor_loss, actor_grads = self.actor_loss_and_grads(batch, q_scale)
        self.actor_opt.step(actor_grads)

        self.critic_target.soft_update(self.critic, self.hyper.tau)
        self.updates += 1
        return {"critic_loss": critic_loss, "actor_loss": actor_loss, "q_mean": float(np.mean(q_pi))}

    def train_steps(self, buffer: ReplayBuffer, steps: int, offline_ratio: Optional[float] = None) -> Dict[str, float]:
        stats: Dict[str, float] = {}
        for _ in range(steps):
            stats = self.update(buffer.sample(self.hyper.batch_size, self.rng, offline_ratio))
        metrics_collector.record_updates(steps)
        return stats

    # ---- persistence --------------------------------------------------

    def state_dict(self) -> Dict[str, Any]:
        return {
            "hyper": self.hyper.to_dict(),
            "seed": self.seed,
            "feature_dim": self.feature_dim,
            "action_dim": self.action_dim,
            "updates": self.updates,
            "actor": [p.tolist() for p in self.actor.params],
            "critic": [p.tolist() for p in self.critic.params],
            "critic_target": [p.tolist() for p in self.critic_target.params],
            "actor_opt": self.actor_opt.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
            "rng": self.rng.bit_generator.state,
        }

    @classmethod
    def from_state_dict(cls, state: Dict[str, Any]) -> "ConservativeActorCritic":
        agent = cls(Hyperparams.from_dict(state["hyper"]), state["seed"], state["feature_dim"], state["action_dim"])
        for name in ("actor", "critic", "critic_target"):
            for target, values in zip(getattr(agent, name).params, state[name]):
                target[...] = np.asarray(values, dtype=float)
        agent.actor_opt.load_state_dict(state["actor_opt"])
        agent.critic_opt.load_state_dict(state["critic_opt"])
        agent.rng.bit_generator.state = state["rng"]
        agent.updates = int(state["updates"])
        return agent


def pretrain_offline(buffer: ReplayBuffer, hyper: Optional[Hyperparams] = None, seed: int = 0,
                     agent: Optional[ConservativeActorCritic] = None) -> ConservativeActorCritic:
    """
    Offline pre-training on labeled demonstrations and failures.

    Returns the agent holding both the policy and the critic.
    """
    if len(buffer) == 0:
        raise ValueError("cannot pre-train on an empty replay buffer")
    hyper = hyper or Hyperparams()
    agent = agent or ConservativeActorCritic(hyper, seed)
    logger.info(f"Offline pre-training for {hyper.offline_steps} steps on {len(buffer)} transitions")
    chunk = 1000
    done = 0
    while done < hyper.offline_steps:
        n = min(chunk, hyper.offline_steps - done)
        stats = agent.train_steps(buffer, n)
        done += n
        logger.debug(f"offline step {done}: {stats}")
    return agent
