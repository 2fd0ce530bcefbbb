from dataclasses import replace

import numpy as np
import pytest

from core.geometry import BlockSequence, GridSpec, PixelPoint3, WaypointBlock, block_to_pixel3, sequence_to_pixels
from reward.dense import RewardParams, dense_reward, nearest_block, shaping_transform
from reward.labeling import Formulation, MissingWaypointsError, ObjectRewardMode, combine, label_episode
from reward.ransac import CameraRegressor, RansacFitError, RegressorNotFittedError, fit_ransac, robot_pixel
from reward.sparse import SparseClassifier, sample_consensus, sparse_reward
from sim.episode import Frame
from sim.expert import expert_episode
from sim.projection import Projection, calibration_pairs, project_point
from sim.tasks import Direction


# ---- dense kernel -------------------------------------------------------

def test_transform_is_one_half_at_offset():
    assert shaping_transform(15.0, 0.1, 15.0) == pytest.approx(0.5)
    assert shaping_transform(80.0, 0.02, 80.0) == pytest.approx(0.5)


def test_transform_reference_value():
    assert shaping_transform(0.0, 0.1, 15.0) == pytest.approx(0.9525741268, abs=1e-9)


def test_transform_decreases_with_distance():
    values = [shaping_transform(d, 0.1, 15.0) for d in np.linspace(0.0, 150.0, 61)]
    assert np.all(np.diff(values) < 0)
    assert 0.0 < min(values) and max(values) < 1.0


def test_reward_params_validation():
    with pytest.raises(ValueError):
        RewardParams(lam=0.0)
    with pytest.raises(ValueError):
        RewardParams(phi=-1.0)
    assert RewardParams.unit().phi == 0.0


def test_nearest_block_matches_brute_force(grid):
    seq = BlockSequence.from_triples([[2, 1, 0], [2, 1, 1], [2, 2, 1], [2, 3, 1], [1, 3, 1], [1, 4, 1], [1, 4, 0]])
    centroids = sequence_to_pixels(seq, grid)
    rng = np.random.default_rng(0)
    for p in rng.uniform(0.0, 100.0, size=(200, 3)):
        expected = int(np.argmin([np.linalg.norm(p - c) for c in centroids]))
        assert nearest_block(PixelPoint3.from_array(p), seq, grid) == expected


def test_dense_reward_targets_next_block(grid):
    seq = BlockSequence.from_triples([[0, 0, 0], [0, 0, 1], [3, 0, 1]])
    params = RewardParams.simulation(grid)
    at_start = dense_reward(block_to_pixel3(grid, seq[0]), seq, grid, params)
    assert (at_start.nearest_index, at_start.target_index) == (0, 1)
    assert at_start.d_t == pytest.approx(100 / 6)
    assert at_start.r_dense == pytest.approx(shaping_transform(100 / 6, 0.1, 15.0))


def test_dense_reward_clamps_to_final_block(grid):
    seq = BlockSequence.from_triples([[0, 0, 0], [0, 0, 1], [3, 0, 1]])
    result = dense_reward(block_to_pixel3(grid, seq[-1]), seq, grid, RewardParams.simulation(grid))
    assert result.target_index == 2
    assert result.d_t == pytest.approx(0.0)
    assert result.r_dense == pytest.approx(0.9525741268)


def test_combination_rule():
    assert combine(1, 0.2) == 1.0
    assert combine(0, 0.3) == pytest.approx(0.3)


def test_transform_limits_far_from_offset():
    assert shaping_transform(-1e6, 0.1, 15.0) == pytest.approx(1.0, abs=1e-12)
    assert shaping_transform(1e6, 0.1, 15.0) == pytest.approx(0.0, abs=1e-12)
    assert shaping_transform(-1e6, 0.02, 80.0) == pytest.approx(1.0, abs=1e-12)
    assert shaping_transform(1e6, 0.02, 80.0) == pytest.approx(0.0, abs=1e-12)


def test_nearest_block_ties_go_to_lower_index():
    grid = GridSpec(cols=4, rows=4, height_levels=4)
    seq = BlockSequence.from_triples([[0, 3, 0], [0, 0, 0], [2, 0, 0], [0, 3, 0]])
    between = block_to_pixel3(grid, WaypointBlock(1, 0, 0))
    assert nearest_block(between, seq, grid) == 1
    assert nearest_block(block_to_pixel3(grid, seq[0]), seq, grid) == 0


def random_sequence(rng, grid, length):
    blocks = [rng.integers([0, 0, 0], [grid.cols, grid.rows, grid.height_levels])]
    while len(blocks) < length:
        block = rng.integers([0, 0, 0], [grid.cols, grid.rows, grid.height_levels])
        if not np.array_equal(block, blocks[-1]):
            blocks.append(block)
    return BlockSequence.from_triples(blocks)


def test_nearest_block_matches_exhaustive_scan_on_random_instances(grid):
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        seq = random_sequence(rng, grid, int(rng.integers(2, 9)))
        p = rng.uniform(-10.0, 110.0, size=3)
        best, best_sq = 0, np.inf
        for i, block in enumerate(seq):
            sq = float(np.sum((block_to_pixel3(grid, block).as_array() - p) ** 2))
            if sq < best_sq:
                best, best_sq = i, sq
        assert nearest_block(PixelPoint3.from_array(p), seq, grid) == best


def test_reward_does_not_drop_while_moving_towards_next_block(grid):
    seq = BlockSequence.from_triples([[0, 0, 2], [3, 0, 2], [3, 4, 2], [5, 4, 2]])
    params = RewardParams.simulation(grid)
    for i in range(len(seq) - 1):
        start, end = block_to_pixel3(grid, seq[i]).as_array(), block_to_pixel3(grid, seq[i + 1]).as_array()
        rewards = []
        for alpha in np.linspace(0.0, 1.0, 101):
            result = dense_reward(PixelPoint3.from_array((1 - alpha) * start + alpha * end), seq, grid, params)
            if result.nearest_index != i:
                break
            rewards.append(result.r_dense)
        assert len(rewards) > 1
        assert np.all(np.diff(rewards) >= 0)


# ---- RANSAC -------------------------------------------------------------

def test_ransac_ignores_outliers():
    proj = Projection()
    points, top, side = calibration_pairs(proj, 60, 0.3, 1)
    regressor = fit_ransac(points, top, threshold=4.0, iterations=200, seed=0)
    exact = np.abs(top - (points @ proj.matrix[:2].T + proj.offset[:2])).sum(axis=1) < 1e-6
    assert np.array_equal(regressor.inlier_mask, exact)
    queries = np.random.default_rng(2).uniform(0.0, 1.0, size=(10, 3))
    assert regressor.predict(queries) == pytest.approx(queries @ proj.matrix[:2].T, abs=1e-6)


def test_ransac_side_view_is_one_dimensional():
    proj = Projection()
    points, _, side = calibration_pairs(proj, 30, 0.0, 3)
    regressor = fit_ransac(points, side, seed=0)
    assert regressor.predict([0.2, 0.4, 0.6]) == pytest.approx([60.0])


def test_ransac_recovers_planted_map_despite_gross_outliers():
    rng = np.random.default_rng(5)
    points = rng.uniform(0.0, 1.0, size=(10, 3))
    pixels = np.column_stack([2.0 * points[:, 0] + 3.0, 4.0 * points[:, 1] - 1.0])
    pixels[[2, 5, 8]] += 100.0
    regressor = fit_ransac(points, pixels, threshold=1.0, iterations=500, seed=0)
    assert regressor.coef == pytest.approx(np.array([[2.0, 0.0, 0.0], [0.0, 4.0, 0.0]]), abs=1e-9)
    assert regressor.intercept == pytest.approx([3.0, -1.0], abs=1e-9)
    assert regressor.inlier_mask.tolist() == [i not in (2, 5, 8) for i in range(10)]


@pytest.mark.parametrize("seed", range(100))
def test_ransac_recovers_random_maps_with_thirty_percent_outliers(seed):
    rng = np.random.default_rng([seed, 17])
    proj = Projection(
        top_matrix=tuple(map(tuple, rng.uniform(50.0, 150.0, size=(2, 3)))),
        top_offset=tuple(rng.uniform(-20.0, 20.0, size=2)),
        side_vector=(0.0, 0.0, 100.0),
    )
    points, top, _ = calibration_pairs(proj, 40, 0.3, rng)
    regressor = fit_ransac(points, top, threshold=4.0, iterations=500, seed=seed)
    assert regressor.coef == pytest.approx(proj.matrix[:2], abs=1e-6)
    assert regressor.intercept == pytest.approx(proj.offset[:2], abs=1e-6)


def test_ransac_needs_minimal_set():
    with pytest.raises(RansacFitError):
        fit_ransac(np.zeros((3, 3)), np.zeros((3, 2)))
    with pytest.raises(RansacFitError):
        fit_ransac(np.zeros((5, 3)), np.zeros((4, 2)))


def test_unfitted_regressor():
    with pytest.raises(RegressorNotFittedError):
        CameraRegressor(4.0).predict([0.0, 0.0, 0.0])


def test_robot_pixel_matches_projection(regressors):
    top, side = regressors
    effector = (0.35, 0.8, 0.1)
    expected = project_point(Projection(), effector)
    assert robot_pixel(top, side, effector).as_array() == pytest.approx(expected.as_array(), abs=1e-6)


# ---- consensus classifier -----------------------------------------------

def test_consensus_false_positive_rate():
    rng = np.random.default_rng(0)
    fired = sample_consensus(np.zeros(1_000_000, dtype=bool), 4, 0.2, 0.0, rng)
    assert fired.mean() == pytest.approx(0.2 ** 4, abs=3e-4)


def test_consensus_false_negative_rate():
    rng = np.random.default_rng(1)
    fired = sample_consensus(np.ones(200_000, dtype=bool), 4, 0.0, 0.05, rng)
    assert fired.mean() == pytest.approx(0.95 ** 4, abs=5e-3)


def test_noiseless_consensus_is_exact():
    truth = np.array([True, False, True])
    assert sample_consensus(truth, 4, 0.0, 0.0, np.random.default_rng(0)).tolist() == [1, 0, 1]


def test_sparse_reward_is_keyed_by_frame(env):
    classifier = SparseClassifier(env.forward.is_success, 4, 0.5, 0.5, seed=3)
    state = env.forward.nominal_state()
    draws = [sparse_reward(classifier, state, 7, t) for t in range(50)]
    assert draws == [sparse_reward(classifier, state, 7, t) for t in range(50)]


@pytest.mark.parametrize("kwargs", [{"k_prompts": 0}, {"p_fp": 1.0}, {"p_fn": -0.1}])
def test_classifier_validation(env, kwargs):
    with pytest.raises(ValueError):
        SparseClassifier(env.forward.is_success, **kwargs)


# ---- labeling -----------------------------------------------------------

@pytest.fixture
def demo(env):
    return expert_episode(env.forward, np.random.default_rng(0), episode_id=3)


def test_combined_labels(make_engine, demo):
    engine = make_engine()
    labels = engine.label(demo)
    assert len(labels) == len(demo.frames)
    assert labels[-1].r_sparse == 1 and labels[-1].r == 1.0
    for label in labels[:-1]:
        assert label.r_sparse == 0
        assert label.r == pytest.approx(label.r_dense)
        assert 0.0 < label.r < 1.0
    assert engine.dense_evaluations == len(labels)
    assert engine.sparse_evaluations == len(labels)


def test_sparse_only_skips_dense_kernel(make_engine, demo):
    engine = make_engine(formulation=Formulation.SPARSE_ONLY, sequences={})
    labels = engine.label(demo)
    assert engine.dense_evaluations == 0
    assert all(label.nearest_index is None and label.d_t is None for label in labels)
    assert [label.r for label in labels] == [0.0] * (len(labels) - 1) + [1.0]


def test_dense_only_ignores_success(make_engine, demo):
    engine = make_engine(formulation="dense_only")
    labels = engine.label(demo)
    assert engine.sparse_evaluations == 0
    assert labels[-1].r == pytest.approx(labels[-1].r_dense)


def test_missing_waypoints(make_engine, demo):
    engine = make_engine(sequences={})
    with pytest.raises(MissingWaypointsError):
        engine.check_ready()
    with pytest.raises(MissingWaypointsError):
        engine.label(demo)


def test_latch_keeps_success_after_it_fires(make_engine, demo, env):
    undone = Frame(len(demo.frames), env.forward.nominal_state(), None, False)
    episode = replace(demo, frames=demo.frames + [undone])
    plain = make_engine(formulation="sparse_only").label(episode)
    latched = make_engine(formulation="sparse_only", latch=True).label(episode)
    assert plain[-1].r_sparse == 0
    assert latched[-1].r_sparse == 1


def test_object_reward_is_averaged(make_engine, demo, sequences):
    robot_only = make_engine().label(demo)
    with_object = make_engine(object_sequences=sequences, object_mode=ObjectRewardMode.MEAN).label(demo)
    for a, b in zip(robot_only, with_object):
        assert b.r_obj is not None
        assert b.r_dense == pytest.approx(0.5 * (a.r_dense + b.r_obj))


def test_object_reward_needs_projection(make_engine):
    with pytest.raises(ValueError):
        make_engine(object_mode="mean", projection=None)


def test_transitions_shift_labels(make_engine, demo):
    engine = make_engine()
    labels = engine.label(demo)
    transitions = engine.transitions(demo, gamma=0.9)
    assert len(transitions) == len(demo.frames) - 1
    assert [t.r for t in transitions] == pytest.approx([label.r for label in labels[1:]])
    assert transitions[-1].done and not any(t.done for t in transitions[:-1])
    assert transitions[-1].mc_return == pytest.approx(1.0 / (1.0 - 0.9))
    assert all(t.demo and not t.online for t in transitions)


def test_transitions_are_terminal_only_where_success_fires(make_engine, demo):
    for formulation in ("combined", "sparse_only"):
        engine = make_engine(formulation=formulation)
        labels = engine.label(demo)
        transitions = engine.transitions(demo, gamma=0.9)
        assert [t.done for t in transitions] == [label.r_sparse == 1 for label in labels[1:]]
    dense_only = make_engine(formulation="dense_only").transitions(demo, gamma=0.9)
    assert not any(t.done for t in dense_only)


def test_labels_carry_object_pixels(make_engine, demo, env):
    labels = make_engine().label(demo)
    first = demo.frames[0].state
    for obj in first.objects:
        expected = project_point(env.projection, obj.position)
        assert labels[0].object_pixels[obj.id].as_array() == pytest.approx(expected.as_array())
    assert make_engine(projection=None).label(demo)[0].object_pixels == {}


def test_engine_counts_accumulate_across_episodes(make_engine, demo):
    engine = make_engine()
    engine.label(demo)
    engine.label(demo)
    assert engine.dense_evaluations == engine.sparse_evaluations == 2 * len(demo.frames)


def test_label_dict(make_engine, demo):
    data = make_engine().label(demo)[0].to_dict()
    assert len(data["robot_pixel"]) == 3
    assert set(data) >= {"t", "r_dense", "r_sparse", "r", "nearest_index", "target_index", "d_t", "object_pixels"}
    assert all(len(pixel) == 3 for pixel in data["object_pixels"].values())


def test_backward_episode_uses_backward_sequence(make_engine, env, sequences):
    episode = expert_episode(env.backward, 0)
    engine = make_engine(sequences={Direction.BACKWARD: sequences[Direction.BACKWARD]})
    labels = engine.label(episode)
    assert labels[-1].r == 1.0
    with pytest.raises(MissingWaypointsError):
        engine.label(expert_episode(env.forward, 0))


def test_label_episode_matches_engine(make_engine, demo, sequences, regressors, grid):
    engine = make_engine()
    labels = label_episode(
        demo, sequences[Direction.FORWARD], regressors, RewardParams.simulation(grid),
        engine.classifier(Direction.FORWARD),
    )
    assert [label.r for label in labels] == pytest.approx([label.r for label in engine.label(demo)])
    assert [label.nearest_index for label in labels] == [label.nearest_index for label in engine.label(demo)]
