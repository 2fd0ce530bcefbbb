"""
Reset-free online fine-tuning.

The robot alternates forward and backward episodes, each starting where
the previous one ended. After every episode the frames are labeled by the
reward engine, appended to the replay buffer and followed by one gradient
update per environment step taken. The forward task is evaluated at a
fixed interval of environment steps.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from core.config import Config
from reward.labeling import Formulation, RewardEngine
from sim.env import TabletopEnv, reset
from sim.episode import rollout
from sim.tasks import Direction
from utils.monitoring import metrics_collector
from .agent import ConservativeActorCritic, Hyperparams
from .evaluation import evaluate_policy
from .replay_buffer import ReplayBuffer

logger = logging.getLogger(__name__)

ONLINE_EPISODE_OFFSET = 1_000_000


@dataclass(frozen=True)
class Snapshot:
    step: int
    success_rate: float
    mean_reward: float


@dataclass
class LearningCurve:
    seed: int
    formulation: str
    snapshots: List[Snapshot] = field(default_factory=list)

    @property
    def final_success(self) -> float:
        return self.snapshots[-1].success_rate if self.snapshots else 0.0

    @property
    def initial_success(self) -> float:
        return self.snapshots[0].success_rate if self.snapshots else 0.0

    def rows(self) -> List[dict]:
        return [
            {
                "step": snap.step,
                "seed": self.seed,
                "formulation": self.formulation,
                "success_rate": snap.success_rate,
                "mean_reward": snap.mean_reward,
            }
            for snap in self.snapshots
        ]


def finetune_online(agent: ConservativeActorCritic, env: TabletopEnv, engine: RewardEngine, buffer: ReplayBuffer,
                    hyper: Optional[Hyperparams] = None, formulation: Optional[Formulation] = None, seed: int = 0,
                    online_steps: Optional[int] = None, eval_interval: int = Config.EVAL_INTERVAL,
                    eval_trials: int = Config.EVAL_TRIALS, rng: Optional[np.random.Generator] = None) -> LearningCurve:
    """
    Fine-tune a pre-trained agent without manual resets.

    The step-0 snapshot evaluates the offline policy. `rng` drives the
    initial scene reset and defaults to one derived from `seed`. Returns
    the learning curve of forward-task success rates.
    """
    hyper = hyper or agent.hyper
    if formulation is not None:
        engine.formulation = Formulation(formulation)
    engine.check_ready()
    budget = hyper.online_steps if online_steps is None else online_steps
    eval_seed = seed + 10_000
    rng = np.random.default_rng([seed, 3]) if rng is None else rng

    curve = LearningCurve(seed=seed, formulation=engine.formulation.value)
    initial = evaluate_policy(agent, env.forward, eval_trials, eval_seed)
    curve.snapshots.append(Snapshot(0, initial, buffer.mean_reward(online=False)))
    logger.info(f"[seed {seed}] offline policy success {curve.snapshots[0].success_rate:.2f}")

    direction = Direction.FORWARD
    state = reset(env.forward, rng, perturb=True)
    steps = 0
    next_eval = eval_interval
    episode_id = ONLINE_EPISODE_OFFSET
    window_rewards: List[float] = []

    while steps < budget:
        task = env.task(direction)
        horizon = min(task.horizon, budget - steps)
        episode = rollout(task, state, agent.policy(task, explore=True), horizon=horizon, episode_id=episode_id)
        episode_id += 1
        taken = len(episode) - 1

        if taken > 0:
            transitions = engine.transitions(episode, hyper.gamma, online=True)
            buffer.add_episode(transitions)
            window_rewards.extend(t.r for t in transitions)
            agent.train_steps(buffer, taken, hyper.offline_ratio)
            steps += taken
            metrics_collector.record_env_steps(taken)

        while steps >= next_eval and next_eval <= budget:
            success = evaluate_policy(agent, env.forward, eval_trials, eval_seed)
            mean_reward = float(np.mean(window_rewards)) if window_rewards else 0.0
            curve.snapshots.append(Snapshot(next_eval, success, mean_reward))
            logger.info(f"[seed {seed}] step {next_eval}: success {success:.2f}, mean reward {mean_reward:.3f}")
            window_rewards = []
            next_eval += eval_interval

        state = episode.final_state
        direction = direction.other

    return curve
