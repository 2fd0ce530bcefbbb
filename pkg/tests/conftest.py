import numpy as np
import pytest

from ai.waypoint_providers import oracle_sequence
from core.geometry import GridSpec
from learn.agent import Hyperparams
from reward.dense import RewardParams
from reward.labeling import RewardEngine
from reward.ransac import fit_camera_regressors
from sim.env import TabletopEnv
from sim.projection import Projection, calibration_pairs, project_point
from sim.tasks import Direction, make_task_pair


def nominal_sequence(task, grid, proj):
    """Oracle block sequence from the task's unperturbed scene."""
    state = task.nominal_state()
    grasp = project_point(proj, state.object(task.object_id).position)
    target = project_point(proj, task.target_center)
    return oracle_sequence([(grasp.u, grasp.v)], [(target.u, target.v)], grid)


@pytest.fixture
def grid():
    return GridSpec()


@pytest.fixture
def env(grid):
    forward, backward = make_task_pair("bin_sort_left")
    return TabletopEnv(forward, backward, Projection(), grid)


@pytest.fixture
def regressors(env):
    points, top, side = calibration_pairs(env.projection, 40, 0.0, np.random.default_rng(0))
    return fit_camera_regressors(points, top, side, seed=0)


@pytest.fixture
def sequences(env, grid):
    return {
        Direction.FORWARD: nominal_sequence(env.forward, grid, env.projection),
        Direction.BACKWARD: nominal_sequence(env.backward, grid, env.projection),
    }


@pytest.fixture
def make_engine(env, grid, regressors, sequences):
    def _make(**overrides):
        kwargs = dict(
            tasks={Direction.FORWARD: env.forward, Direction.BACKWARD: env.backward},
            sequences=sequences,
            regressors=regressors,
            params=RewardParams.simulation(grid),
            projection=env.projection,
        )
        kwargs.update(overrides)
        return RewardEngine(**kwargs)
    return _make


@pytest.fixture
def small_hyper():
    return Hyperparams(hidden_size=8, batch_size=16, offline_steps=20, online_steps=60)


@pytest.fixture
def write_config(tmp_path):
    """Write a minimal experiment file; keyword arguments become extra lines."""
    def _write(name="exp.conf", **entries):
        lines = ["schema_version = 1", f"out_dir = {tmp_path / 'out'}"]
        lines += [f"{key} = {value}" for key, value in entries.items()]
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path
    return _write
