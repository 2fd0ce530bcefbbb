from dataclasses import replace

import numpy as np
import pytest

from learn.agent import ConservativeActorCritic, Hyperparams, pretrain_offline
from learn.bc import train_behavior_cloning
from learn.checkpoint import load_checkpoint, restore_checkpoint, save_checkpoint
from learn.demos import DemoCounts, demo_buffer, generate_demo_episodes
from learn.evaluation import calibration_fraction, evaluate_policy
from learn.features import FEATURE_DIM, RELATIVE_CLIP, state_features
from learn.finetune import finetune_online
from learn.moka import moka_executor
from learn.networks import MLP, mlp_backward, mlp_forward
from learn.replay_buffer import ReplayBuffer, Transition, monte_carlo_returns
from sim.env import reset
from sim.expert import scripted_expert
from sim.tasks import Direction
from sim.world import ACTION_DIM, DELTA_MAX, Action, Gripper, GripperCommand, ObjectState, WorldState


def random_batch(rng, size=5, mc=-100.0):
    return {
        "s": rng.normal(size=(size, FEATURE_DIM)),
        "a": rng.uniform(-1.0, 1.0, size=(size, ACTION_DIM)),
        "r": rng.uniform(0.0, 1.0, size=size),
        "s2": rng.normal(size=(size, FEATURE_DIM)),
        "done": np.zeros(size),
        "mc": np.full(size, mc),
    }


def numeric_grads(params, loss_fn, eps=1e-6):
    grads = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            original = p[idx]
            p[idx] = original + eps
            up = loss_fn()
            p[idx] = original - eps
            down = loss_fn()
            p[idx] = original
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def relative_error(analytic, numeric):
    a = np.concatenate([g.ravel() for g in analytic])
    n = np.concatenate([g.ravel() for g in numeric])
    return np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)


def transition(r=0.5, online=False, demo=False, done=False):
    return Transition(np.zeros(FEATURE_DIM), np.zeros(ACTION_DIM), r, np.zeros(FEATURE_DIM), done, r, online, demo)


class ExpertAgent:
    def policy(self, task, explore=False):
        return lambda state: scripted_expert(task, state)


# ---- networks and losses ------------------------------------------------

def test_mlp_input_gradient():
    rng = np.random.default_rng(0)
    net = MLP((3, 5, 2), rng)
    x = rng.normal(size=(4, 3))
    w = rng.normal(size=(4, 2))
    out, cache = net.forward(x)
    _, dx = net.backward(cache, w)
    eps = 1e-6
    numeric = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        shifted = x.copy()
        shifted[idx] += eps
        up = np.sum(net(shifted) * w)
        shifted[idx] -= 2 * eps
        down = np.sum(net(shifted) * w)
        numeric[idx] = (up - down) / (2 * eps)
    assert dx == pytest.approx(numeric, abs=1e-6)


def test_mlp_parameter_gradient():
    rng = np.random.default_rng(1)
    net = MLP((3, 4, 2), rng)
    x = rng.normal(size=(6, 3))
    w = rng.normal(size=(6, 2))
    grads, _ = mlp_backward(net, x, w)
    eps = 1e-6
    for param, grad in zip(net.params, grads):
        numeric = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            original = param[idx]
            param[idx] = original + eps
            up = np.sum(mlp_forward(net, x) * w)
            param[idx] = original - eps
            down = np.sum(mlp_forward(net, x) * w)
            param[idx] = original
            numeric[idx] = (up - down) / (2 * eps)
        assert grad == pytest.approx(numeric, abs=1e-6)


@pytest.mark.parametrize("mc", [-100.0, 100.0])
def test_critic_gradient(mc):
    agent = ConservativeActorCritic(Hyperparams(hidden_size=8), seed=1)
    rng = np.random.default_rng(2)
    batch = random_batch(rng, mc=mc)
    sampled = rng.uniform(-1.0, 1.0, size=(5, 8, ACTION_DIM))
    targets = rng.uniform(0.0, 2.0, size=5)

    def loss():
        return agent.critic_loss_and_grads(batch, sampled, alpha=0.5, targets=targets)[0]

    _, analytic = agent.critic_loss_and_grads(batch, sampled, alpha=0.5, targets=targets)
    assert relative_error(analytic, numeric_grads(agent.critic.params, loss)) < 1e-5


def test_actor_gradient():
    agent = ConservativeActorCritic(Hyperparams(hidden_size=8), seed=3)
    batch = random_batch(np.random.default_rng(4))

    def loss():
        return agent.actor_loss_and_grads(batch, q_scale=2.0, bc_weight=0.4)[0]

    _, analytic = agent.actor_loss_and_grads(batch, q_scale=2.0, bc_weight=0.4)
    assert relative_error(analytic, numeric_grads(agent.actor.params, loss)) < 1e-5


@pytest.mark.parametrize("seed", range(20))
def test_gradients_on_random_minibatches(seed):
    rng = np.random.default_rng([seed, 9])
    agent = ConservativeActorCritic(Hyperparams(hidden_size=6), seed=seed)
    batch = random_batch(rng, size=4, mc=float(rng.uniform(-2.0, 2.0)))
    batch["done"] = (rng.uniform(size=4) < 0.3).astype(float)
    sampled = rng.uniform(-1.0, 1.0, size=(4, 8, ACTION_DIM))
    targets = rng.uniform(0.0, 2.0, size=4)
    alpha = float(rng.uniform(0.0, 1.0))
    q_scale, bc_weight = float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.0, 1.0))

    def critic_loss():
        return agent.critic_loss_and_grads(batch, sampled, alpha=alpha, targets=targets)[0]

    def actor_loss():
        return agent.actor_loss_and_grads(batch, q_scale=q_scale, bc_weight=bc_weight)[0]

    _, critic_grads = agent.critic_loss_and_grads(batch, sampled, alpha=alpha, targets=targets)
    _, actor_grads = agent.actor_loss_and_grads(batch, q_scale=q_scale, bc_weight=bc_weight)
    assert relative_error(critic_grads, numeric_grads(agent.critic.params, critic_loss)) <= 1e-4
    assert relative_error(actor_grads, numeric_grads(agent.actor.params, actor_loss)) <= 1e-4


def test_gripper_channel_explores_less():
    agent = ConservativeActorCritic(Hyperparams(hidden_size=8, exploration_std=0.2, gripper_exploration=0.25))
    assert agent.exploration_scale() == pytest.approx([0.2, 0.2, 0.2, 0.05])


def test_zero_alpha_is_plain_td():
    agent = ConservativeActorCritic(Hyperparams(hidden_size=8), seed=0)
    rng = np.random.default_rng(5)
    batch = random_batch(rng)
    targets = rng.uniform(size=5)
    loss, _ = agent.critic_loss_and_grads(batch, rng.uniform(-1, 1, size=(5, 8, ACTION_DIM)), alpha=0.0,
                                          targets=targets)
    assert loss == pytest.approx(0.5 * np.mean((agent.q(batch["s"], batch["a"]) - targets) ** 2))


def test_success_targets_are_absorbing():
    agent = ConservativeActorCritic(Hyperparams(hidden_size=8, gamma=0.9), seed=0)
    batch = random_batch(np.random.default_rng(6))
    batch["r"] = np.full(5, 0.5)
    batch["done"] = np.ones(5)
    assert agent.td_targets(batch) == pytest.approx(np.full(5, 5.0))


def test_sampled_actions_shape_and_range():
    agent = ConservativeActorCritic(Hyperparams(hidden_size=8), seed=0)
    sampled = agent.sample_actions(np.zeros((3, FEATURE_DIM)))
    assert sampled.shape == (3, 8, ACTION_DIM)
    assert np.all(np.abs(sampled) <= 1.0)


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        Hyperparams(gamma=1.0)
    with pytest.raises(ValueError):
        Hyperparams(alpha=-0.1)
    assert Hyperparams.from_dict({"gamma": 0.5, "unknown": 1}).gamma == 0.5


# ---- returns and replay -------------------------------------------------

def test_monte_carlo_returns_with_absorbing_success():
    returns = monte_carlo_returns([0.1, 0.2, 1.0], [False, False, True], 0.9)
    assert returns == pytest.approx([0.1 + 0.9 * 9.2, 9.2, 10.0])


def test_monte_carlo_returns_truncated():
    assert monte_carlo_returns([0.5, 0.5], [False, False], 0.9) == pytest.approx([0.95, 0.5])


def test_transition_reward_range():
    with pytest.raises(ValueError):
        transition(r=1.5)


def test_buffer_ring_wraps():
    buffer = ReplayBuffer(capacity=3)
    for i in range(5):
        buffer.add(transition(r=i / 10))
    assert len(buffer) == 3
    assert buffer.position == 2
    assert buffer.inserted == 5
    assert buffer.r.tolist() == pytest.approx([0.3, 0.4, 0.2])


def test_buffer_mixes_partitions():
    buffer = ReplayBuffer(capacity=20)
    buffer.add_episode([transition(r=0.0, demo=True) for _ in range(4)])
    buffer.add_episode([transition(r=1.0, online=True) for _ in range(6)])
    assert buffer.episodes == 2
    assert (buffer.count(False), buffer.count(True)) == (4, 6)
    idx = buffer.sample_indices(8, np.random.default_rng(0), offline_ratio=0.25)
    assert len(idx) == 8
    assert np.all(idx[:2] < 4) and np.all(idx[2:] >= 4)
    assert buffer.demo_indices().tolist() == [0, 1, 2, 3]
    assert buffer.mean_reward(online=True) == 1.0
    assert buffer.mean_reward(online=False) == 0.0


def test_empty_buffer_cannot_sample():
    with pytest.raises(ValueError):
        ReplayBuffer(4).sample_indices(2, np.random.default_rng(0))


# ---- features -----------------------------------------------------------

def test_state_features_layout(env):
    forward = state_features(reset(env.forward), env.forward)
    backward = state_features(reset(env.backward), env.backward)
    assert forward.shape == (FEATURE_DIM,)
    assert forward[-2:].tolist() == [1.0, 0.0]
    assert backward[-2:].tolist() == [0.0, 1.0]
    assert forward[7:10] == pytest.approx(np.clip((forward[4:7] - forward[:3]) / DELTA_MAX, -3.0, 3.0))
    assert forward[10:13] == pytest.approx([-RELATIVE_CLIP, RELATIVE_CLIP, 0.0])
    assert backward[10:13] == pytest.approx([RELATIVE_CLIP, -RELATIVE_CLIP, 0.0])


def test_state_features_put_release_near_target(env):
    task = env.forward
    x, y, z = task.target_center
    held = ObjectState("object", (x, y, z + 0.05), held=True)
    state = WorldState((x, y, z + 0.05), Gripper.CLOSED, (held,))
    features = state_features(state, task)
    assert features[3] == 1.0
    assert features[7:10] == pytest.approx([0.0, 0.0, 0.0])
    assert features[10:13] == pytest.approx([0.0, 0.0, -1.0])


def test_action_vector_thresholds():
    assert Action.from_vector([0, 0, 0, 0.9]).gripper_command is GripperCommand.CLOSE
    assert Action.from_vector([0, 0, 0, -0.9]).gripper_command is GripperCommand.OPEN
    assert Action.from_vector([1, -1, 0, 0]).delta == pytest.approx((0.05, -0.05, 0.0))


# ---- demos, training and evaluation -------------------------------------

@pytest.fixture
def episodes(env):
    return generate_demo_episodes(env, DemoCounts(2, 2, 2), seed=0)


def test_demo_counts(episodes):
    assert len(episodes) == 6
    assert [e.direction for e in episodes[:4]] == [Direction.FORWARD] * 2 + [Direction.BACKWARD] * 2
    assert all(e.succeeded and e.is_demo for e in episodes[:4])
    assert not any(e.succeeded for e in episodes[4:])
    assert [e.episode_id for e in episodes] == list(range(6))


def test_demo_counts_validation():
    with pytest.raises(ValueError):
        DemoCounts(1, -1, 0)
    assert DemoCounts.from_list([20, 20, 8]).total == 48


def test_offline_training_and_calibration(episodes, make_engine, small_hyper):
    buffer = demo_buffer(episodes, make_engine(), small_hyper.gamma, capacity=1000)
    assert len(buffer) == sum(len(e) - 1 for e in episodes)
    assert len(buffer.demo_indices()) == sum(len(e) - 1 for e in episodes[:4])
    agent = pretrain_offline(buffer, small_hyper, seed=0)
    assert agent.updates == small_hyper.offline_steps
    assert 0.0 <= calibration_fraction(agent, buffer, 0.5) <= 1.0


def pretrain_standard(env, engine, seed=0):
    episodes = generate_demo_episodes(env, DemoCounts(20, 20, 8), seed=seed)
    hyper = Hyperparams()
    buffer = demo_buffer(episodes, engine, hyper.gamma)
    return episodes, pretrain_offline(buffer, hyper, seed=seed)


@pytest.mark.slow
def test_pretrained_policy_solves_nominal_resets(env, make_engine):
    _, agent = pretrain_standard(env, make_engine())
    assert evaluate_policy(agent, env.forward, 20, 0, perturb=False) >= 0.6


@pytest.mark.slow
def test_critic_prefers_expert_terminals_over_failures(env, make_engine):
    engine = make_engine()
    episodes, agent = pretrain_standard(env, engine)

    def terminal_values(selected):
        last = [engine.transitions(e, agent.hyper.gamma)[-1] for e in selected]
        return agent.q(np.array([t.s for t in last]), np.array([t.a for t in last]))

    expert = terminal_values([e for e in episodes if e.is_demo])
    failures = terminal_values([e for e in episodes if not e.is_demo])
    assert expert.mean() >= failures.mean()


def test_behavior_cloning(episodes, make_engine, small_hyper):
    buffer = demo_buffer(episodes, make_engine(), small_hyper.gamma, capacity=1000)
    policy = train_behavior_cloning(buffer, small_hyper, seed=0)
    action = policy.act(buffer.s[0])
    assert action.shape == (ACTION_DIM,)
    assert np.all(np.abs(action) <= 1.0)
    with pytest.raises(ValueError):
        train_behavior_cloning(ReplayBuffer(4), small_hyper)


def test_evaluate_expert(env):
    assert evaluate_policy(ExpertAgent(), env.forward, trials=4, seed=10_000) == 1.0
    with pytest.raises(ValueError):
        evaluate_policy(ExpertAgent(), env.forward, trials=0)


def test_finetune_curve_steps(env, episodes, make_engine, small_hyper):
    engine = make_engine()
    buffer = demo_buffer(episodes, engine, small_hyper.gamma, capacity=1000)
    offline = len(buffer)
    agent = pretrain_offline(buffer, small_hyper, seed=0)
    curve = finetune_online(agent, env, engine, buffer, small_hyper, seed=0, online_steps=60,
                            eval_interval=30, eval_trials=2)
    assert [snap.step for snap in curve.snapshots] == [0, 30, 60]
    assert buffer.count(True) == 60
    assert buffer.count(False) == offline
    assert curve.formulation == "combined"
    assert [row["step"] for row in curve.rows()] == [0, 30, 60]


def test_checkpoint_resumes_exactly(tmp_path, episodes, make_engine, small_hyper):
    buffer = demo_buffer(episodes, make_engine(), small_hyper.gamma, capacity=1000)
    agent = pretrain_offline(buffer, small_hyper, seed=0)
    path = save_checkpoint(agent, tmp_path / "ckpt.json", {"seed": 0})
    restored, extra = load_checkpoint(path)
    assert extra == {"seed": 0}
    assert restored.updates == agent.updates
    s, a = buffer.s[:5], buffer.a[:5]
    assert restored.q(s, a) == pytest.approx(agent.q(s, a))
    agent.train_steps(buffer, 3)
    restored.train_steps(buffer, 3)
    assert restored.q(s, a) == pytest.approx(agent.q(s, a))


def test_checkpoint_keeps_buffer_and_finetune_rng(tmp_path, episodes, make_engine, small_hyper):
    buffer = demo_buffer(episodes, make_engine(), small_hyper.gamma, capacity=1000)
    agent = pretrain_offline(buffer, small_hyper, seed=0)
    rng = np.random.default_rng([0, 3])
    rng.normal(size=7)
    path = save_checkpoint(agent, tmp_path / "ckpt.json", {"seed": 0}, buffer=buffer, rng=rng)
    assert (tmp_path / "ckpt.buffer.npz").is_file()

    checkpoint = restore_checkpoint(path)
    restored = checkpoint.buffer
    assert (len(restored), restored.position, restored.inserted, restored.episodes) == (
        len(buffer), buffer.position, buffer.inserted, buffer.episodes)
    for name in ReplayBuffer.ARRAYS:
        assert np.array_equal(getattr(restored, name)[:len(buffer)], getattr(buffer, name)[:len(buffer)])
    assert checkpoint.rng.bit_generator.state == rng.bit_generator.state
    assert checkpoint.rng.normal(size=3) == pytest.approx(rng.normal(size=3))

    a = buffer.sample(8, np.random.default_rng(1), offline_ratio=0.5)
    b = restored.sample(8, np.random.default_rng(1), offline_ratio=0.5)
    assert all(np.array_equal(a[key], b[key]) for key in a)


def test_checkpoint_without_buffer_or_rng(tmp_path):
    path = save_checkpoint(ConservativeActorCritic(Hyperparams(hidden_size=4)), tmp_path / "bare.json")
    checkpoint = restore_checkpoint(path)
    assert checkpoint.buffer is None and checkpoint.rng is None
    assert not (tmp_path / "bare.buffer.npz").exists()


def test_checkpoint_schema_is_checked(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"schema": "something-else"}', encoding="utf-8")
    with pytest.raises(ValueError):
        load_checkpoint(path)


# ---- open-loop executor -------------------------------------------------

def test_executor_succeeds_from_precise_start(env, grid, sequences):
    assert moka_executor(env.forward, sequences[Direction.FORWARD], grid, env.projection, reset(env.forward))
    assert moka_executor(env.backward, sequences[Direction.BACKWARD], grid, env.projection, reset(env.backward))


def test_executor_misses_displaced_object(env, grid, sequences):
    start = reset(env.forward)
    x, y, z = start.object("object").position
    displaced = start.with_objects([ObjectState("object", (x + 0.1, y, z))])
    assert not moka_executor(env.forward, sequences[Direction.FORWARD], grid, env.projection, displaced)


def test_executor_fails_past_horizon(env, grid, sequences):
    task = replace(env.forward, horizon=10)
    assert not moka_executor(task, sequences[Direction.FORWARD], grid, env.projection, reset(task))
