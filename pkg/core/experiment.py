"""
Experiment orchestration for wayshape.

One experiment runs prompting, labeling, offline pre-training, reset-free
fine-tuning and evaluation for every seed of a config, and persists all
artifacts under the config's output directory. The ablation suite and
the open-loop comparison are built from the same service.
"""
import hashlib
import itertools
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ai.annotation import AnnotatedObservation, build_annotation
from ai.vlm_connector import VLMConnector
from ai.waypoint_providers import WaypointProvider, cached_query, make_provider
from learn.agent import ConservativeActorCritic, Hyperparams, pretrain_offline
from learn.bc import train_behavior_cloning
from learn.checkpoint import save_checkpoint
from learn.demos import DemoCounts, generate_demo_set
from learn.evaluation import calibration_fraction, evaluate_policy
from learn.finetune import LearningCurve, finetune_online
from learn.moka import moka_executor
from reward.dense import RewardParams
from reward.labeling import Formulation, ObjectRewardMode, RewardEngine
from reward.ransac import CameraRegressor, fit_camera_regressors
from sim.env import TabletopEnv, reset
from sim.projection import Projection, calibration_pairs
from sim.tasks import Direction, TaskSpec, make_task_pair
from utils.batch_processor import BatchProcessor
from utils.cache import cache_key
from utils.monitoring import metrics_collector, monitor_stage
from .config import Config
from .geometry import BlockSequence
from .models import FORMULATIONS, ExperimentConfig, ResultsRow, ResultsTable
from .storage import ArtifactOperations, RunLayout
from .type_adapters import (
    BASELINE_COLUMNS, curves_to_frame, read_episode_jsonl, write_baselines_csv, write_curves_csv,
    write_episode_jsonl, write_results_csv,
)

logger = logging.getLogger(__name__)

EVAL_SEED_OFFSET = 10_000

Regressors = Tuple[CameraRegressor, CameraRegressor]


@dataclass
class SeedResult:
    seed: int
    curve: LearningCurve
    agent: ConservativeActorCritic
    calibration: float
    bc_success: Optional[float] = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    table: ResultsTable
    curves: pd.DataFrame
    baselines: pd.DataFrame
    seeds: List[SeedResult] = field(default_factory=list, repr=False)


def object_sequence(seq: BlockSequence) -> BlockSequence:
    """The part of a robot sequence the object should follow: from the grasp block on."""
    lowest = min(block.z for block in seq)
    grasp = next(i for i, block in enumerate(seq) if block.z == lowest)
    tail = seq.blocks[grasp:]
    return BlockSequence(tail) if len(tail) >= 2 else seq


def hyperparams_for(config: ExperimentConfig) -> Hyperparams:
    return Hyperparams(
        gamma=config.gamma,
        alpha=config.alpha,
        bc_weight=config.bc_weight,
        batch_size=config.batch_size,
        hidden_size=config.hidden_size,
        offline_steps=config.offline_steps,
        online_steps=config.budget(),
        offline_ratio=config.offline_ratio,
    )


class ExperimentService:
    """Service class for one experiment config."""

    def __init__(self, config: ExperimentConfig, connector: Optional[VLMConnector] = None,
                 cache_root: Optional[str] = None):
        self.config = config
        self.layout = RunLayout(config.out_dir)
        self.cache_layout = RunLayout(cache_root) if cache_root else self.layout
        self.grid = config.grid()
        self.connector = connector
        self.logger = logging.getLogger(f"{__name__}.{config.name}")

    # ---- setup ---------------------------------------------------------

    def build_env(self) -> TabletopEnv:
        forward, backward = make_task_pair(self.config.task, self.config.perturb_radius)
        projection = Projection(noise_std=self.config.projection_noise)
        return TabletopEnv(forward, backward, projection, self.grid)

    @monitor_stage("calibration")
    def calibrate(self, env: TabletopEnv) -> Regressors:
        """Fit the RANSAC camera regressors on outlier-contaminated calibration pairs."""
        master = self.config.seeds[0]
        points, top, side = calibration_pairs(
            env.projection, self.config.calibration_pairs, self.config.calibration_outliers,
            np.random.default_rng([master, 0]),
        )
        return fit_camera_regressors(points, top, side, Config.RANSAC_THRESHOLD, Config.RANSAC_ITERATIONS, master)

    def provider(self) -> WaypointProvider:
        connector = self.connector
        if self.config.provider == "remote" and connector is None:
            connector = VLMConnector(
                api_key=os.getenv(self.config.vlm_api_key_env),
                base_url=self.config.vlm_base_url,
                model=self.config.vlm_model,
            )
        return make_provider(
            self.config.provider,
            connector=connector,
            fallback=self.config.provider_fallback,
            retries=self.config.vlm_retries,
            z_low=self.config.oracle_z_low,
            z_lift=self.config.oracle_z_lift,
        )

    def annotate(self, env: TabletopEnv, task: TaskSpec) -> AnnotatedObservation:
        """Annotate the nominal first observation of a task."""
        seed = [self.config.seeds[0], 1, 0 if task.direction is Direction.FORWARD else 1]
        return build_annotation(
            reset(task), env.projection, self.grid, seed,
            grasp_source=task.grasp_source, target_source=task.target_source, landmarks=task.landmarks(),
        )

    def provider_settings(self, waypoint_file: Optional[Path] = None) -> Dict[str, Any]:
        """Everything besides the prompt that decides which sequence comes back."""
        config = self.config
        settings: Dict[str, Any] = {
            "annotation_seed": config.seeds[0],
            "projection_noise": config.projection_noise,
        }
        if config.provider == "file":
            digest = None
            if waypoint_file is not None and waypoint_file.is_file():
                digest = hashlib.sha256(waypoint_file.read_bytes()).hexdigest()
            settings.update(waypoint_path=str(waypoint_file), waypoint_sha256=digest)
            return settings
        if config.provider == "remote":
            settings.update(model=config.vlm_model, base_url=config.vlm_base_url)
        if config.provider == "oracle" or config.provider_fallback:
            settings.update(z_low=config.oracle_z_low, z_lift=config.oracle_z_lift)
        return settings

    @monitor_stage("prompting")
    def query_waypoints(self, env: TabletopEnv) -> Dict[Direction, BlockSequence]:
        """
        One block sequence per direction, queried once per experiment and
        cached under the output directory.
        """
        sequences: Dict[Direction, BlockSequence] = {}
        for direction in (Direction.FORWARD, Direction.BACKWARD):
            task = env.task(direction)
            annotation = self.annotate(env, task)
            ArtifactOperations.save_annotation(self.cache_layout, annotation, task.name, direction.value)

            waypoint_file = self.config.waypoint_file(direction.value)
            if self.config.provider == "file":
                provider = make_provider("file", waypoint_path=waypoint_file)
            else:
                provider = self.provider()
            key = cache_key(task.name, direction.value, task.instruction, self.grid, provider.name,
                            self.provider_settings(waypoint_file))
            sequences[direction] = cached_query(provider, self.cache_layout.waypoints(key), annotation, task.instruction)
            self.logger.info(f"{direction.value} waypoints: {sequences[direction].as_triples()}")
        return sequences

    def build_engine(self, env: TabletopEnv, regressors: Regressors, sequences: Dict[Direction, BlockSequence],
                     seed: int, formulation: Optional[str] = None) -> RewardEngine:
        object_mode = ObjectRewardMode.MEAN if self.config.object_reward else ObjectRewardMode.ROBOT
        return RewardEngine(
            tasks={Direction.FORWARD: env.forward, Direction.BACKWARD: env.backward},
            sequences=sequences,
            regressors=regressors,
            params=RewardParams(self.config.reward_lambda, self.config.reward_phi, self.grid),
            formulation=Formulation(formulation or self.config.formulation),
            k_prompts=self.config.k_prompts,
            p_fp=self.config.p_fp,
            p_fn=self.config.p_fn,
            seed=seed,
            projection=env.projection,
            object_sequences={d: object_sequence(s) for d, s in sequences.items()} if self.config.object_reward else {},
            object_mode=object_mode,
            latch=self.config.sparse_latch,
        )

    # ---- runs ----------------------------------------------------------

    def prepare(self) -> Tuple[TabletopEnv, Regressors, Dict[Direction, BlockSequence]]:
        env = self.build_env()
        regressors = self.calibrate(env)
        needs_waypoints = Formulation(self.config.formulation).uses_dense
        sequences = self.query_waypoints(env) if needs_waypoints else {}
        return env, regressors, sequences

    @monitor_stage("seed")
    def run_seed(self, seed: int, env: TabletopEnv, regressors: Regressors,
                 sequences: Dict[Direction, BlockSequence]) -> SeedResult:
        hyper = hyperparams_for(self.config)
        engine = self.build_engine(env, regressors, sequences, seed)
        counts = DemoCounts.from_list(self.config.counts())

        buffer = generate_demo_set(env, counts, engine, seed, hyper.gamma, capacity=self.config.buffer_capacity)
        agent = pretrain_offline(buffer, hyper, seed)
        calibration = calibration_fraction(agent, buffer, Config.CALIBRATION_EPSILON)
        self.logger.info(f"[seed {seed}] critic calibration {calibration:.2f}")

        rng = np.random.default_rng([seed, 3])
        curve = finetune_online(
            agent, env, engine, buffer, hyper, seed=seed, online_steps=hyper.online_steps,
            eval_interval=self.config.eval_interval, eval_trials=self.config.eval_trials, rng=rng,
        )
        save_checkpoint(agent, self.layout.checkpoint(seed), {"seed": seed, "formulation": self.config.formulation},
                        buffer=buffer, rng=rng)

        bc_success = None
        if self.config.include_bc:
            bc = train_behavior_cloning(buffer, hyper, seed)
            bc_success = evaluate_policy(bc, env.forward, self.config.eval_trials, seed + EVAL_SEED_OFFSET)
        return SeedResult(seed, curve, agent, calibration, bc_success)

    def run(self) -> ExperimentResult:
        config = self.config
        self.logger.info(f"Running '{config.name}': {config.formulation}, regime {config.demo_regime}, "
                         f"seeds {config.seeds}, {config.budget()} online steps")
        ArtifactOperations.save_config(self.layout, config)
        env, regressors, sequences = self.prepare()

        results = [self.run_seed(seed, env, regressors, sequences) for seed in config.seeds]

        curves = curves_to_frame([r.curve for r in results], config.demo_regime)
        write_curves_csv(curves, self.layout.curves)
        baselines = pd.DataFrame(
            [
                {"regime": config.demo_regime, "method": "bc", "seed": r.seed, "success_rate": r.bc_success}
                for r in results if r.bc_success is not None
            ],
            columns=BASELINE_COLUMNS,
        )
        if len(baselines):
            write_baselines_csv(baselines, self.layout.baselines)

        table = aggregate_results(curves, baselines, config.task, config.eval_trials)
        write_results_csv(table, self.layout.results)
        ArtifactOperations.save_summary(self.layout, {
            "name": config.name,
            "formulation": config.formulation,
            "regime": config.demo_regime,
            "seeds": config.seeds,
            "final_success": {str(r.seed): r.curve.final_success for r in results},
            "calibration": {str(r.seed): r.calibration for r in results},
            "metrics": metrics_collector.get_metrics_summary(),
            "system": metrics_collector.system_snapshot(),
        })
        return ExperimentResult(config, table, curves, baselines, results)


def aggregate_results(curves: pd.DataFrame, baselines: Optional[pd.DataFrame] = None,
                      task: str = "bin_sort_left", trials: int = Config.EVAL_TRIALS) -> ResultsTable:
    """
    Rebuild the results table from persisted curves (and baseline evaluations).

    Each (regime, formulation) row is the mean over seeds of the final
    snapshot's success. The offline_rl row of a regime is the mean step-0
    success of the combined formulation, or of the only formulation present.
    """
    if curves is None or len(curves) == 0:
        raise ValueError("no learning curves to aggregate")
    rows: List[ResultsRow] = []
    order = {name: i for i, name in enumerate(FORMULATIONS)}

    for regime in dict.fromkeys(curves["regime"]):
        frame = curves[curves["regime"] == regime]
        formulations = sorted(set(frame["formulation"]), key=lambda f: (order.get(f, len(order)), f))
        for formulation in formulations:
            data = frame[frame["formulation"] == formulation]
            final = data.loc[data.groupby("seed")["step"].idxmax(), "success_rate"]
            rows.append(ResultsRow(
                method=formulation, task=task, regime=regime,
                success=round(100.0 * float(final.mean()), 6), trials=trials, seeds=int(data["seed"].nunique()),
            ))
        base = "combined" if "combined" in formulations else formulations[0]
        initial = frame[(frame["formulation"] == base) & (frame["step"] == 0)]
        if len(initial):
            rows.append(ResultsRow(
                method="offline_rl", task=task, regime=regime,
                success=round(100.0 * float(initial["success_rate"].mean()), 6), trials=trials,
                seeds=int(initial["seed"].nunique()),
            ))
        if baselines is not None and len(baselines):
            for method, data in baselines[baselines["regime"] == regime].groupby("method", sort=True):
                rows.append(ResultsRow(
                    method=str(method), task=task, regime=regime,
                    success=round(100.0 * float(data["success_rate"].mean()), 6), trials=trials,
                    seeds=int(data["seed"].nunique()),
                ))
    return ResultsTable(rows=rows)


@monitor_stage("experiment")
def run_experiment(config: ExperimentConfig, connector: Optional[VLMConnector] = None) -> ExperimentResult:
    """Prompt, label, pre-train, fine-tune and evaluate every seed of a config."""
    return ExperimentService(config, connector).run()


def _run_member(job: Tuple[ExperimentConfig, str]) -> ExperimentResult:
    config, cache_root = job
    return ExperimentService(config, cache_root=cache_root).run()


def suite_configs(base: ExperimentConfig, formulations: Sequence[str] = FORMULATIONS,
                  regimes: Optional[Sequence[str]] = None) -> List[ExperimentConfig]:
    """Formulation x regime product, each member in its own output subdirectory."""
    regimes = list(regimes or Config.DEMO_REGIMES)
    layout = RunLayout(base.out_dir)
    members = []
    for formulation, regime in itertools.product(formulations, regimes):
        data = base.model_dump()
        data.update(
            formulation=formulation,
            demo_regime=regime,
            demo_counts=None,
            name=f"{base.name}_{formulation}_{regime}",
            out_dir=str(layout.run_dir(formulation, regime).root),
        )
        members.append(ExperimentConfig.model_validate(data))
    return members


@monitor_stage("ablation")
def ablation_suite(base: ExperimentConfig, formulations: Sequence[str] = FORMULATIONS,
                   regimes: Optional[Sequence[str]] = None,
                   connector: Optional[VLMConnector] = None) -> ExperimentResult:
    """
    Every formulation under every demo regime for all seeds of the base
    config. Waypoints are queried once up front and shared by all members.
    """
    layout = RunLayout(base.out_dir)
    ArtifactOperations.save_config(layout, base)
    service = ExperimentService(base, connector)
    if any(Formulation(f).uses_dense for f in formulations):
        service.query_waypoints(service.build_env())

    members = suite_configs(base, formulations, regimes)
    logger.info(f"Ablation suite: {len(members)} runs x {len(base.seeds)} seeds")
    results = BatchProcessor(base.workers).map(_run_member, [(m, str(layout.root)) for m in members])

    curves = pd.concat([r.curves for r in results], ignore_index=True)
    baselines = pd.concat([r.baselines for r in results], ignore_index=True)
    write_curves_csv(curves, layout.curves)
    if len(baselines):
        write_baselines_csv(baselines, layout.baselines)
    table = aggregate_results(curves, baselines, base.task, base.eval_trials)
    write_results_csv(table, layout.results)

    from utils.plotting import emit_plots
    emit_plots(curves, layout.plots)
    return ExperimentResult(base, table, curves, baselines, [s for r in results for s in r.seeds])


@monitor_stage("moka")
def moka_comparison(config: ExperimentConfig, connector: Optional[VLMConnector] = None,
                    trials: Optional[int] = None) -> ResultsTable:
    """
    Open-loop executor with precise and perturbed resets against the
    fine-tuned combined policy on perturbed resets.
    """
    trials = trials or config.eval_trials
    combined = config.with_overrides(formulation="combined")
    service = ExperimentService(combined, connector)
    env, regressors, sequences = service.prepare()
    forward = env.forward
    seq = sequences[Direction.FORWARD]
    perturbed = forward.with_perturb_radius(config.moka_perturb_radius)
    eval_seed = config.seeds[0] + EVAL_SEED_OFFSET

    def executor_success(task: TaskSpec, perturb: bool) -> float:
        wins = 0
        for trial in range(trials):
            start = reset(task, np.random.default_rng([eval_seed, trial]), perturb=perturb)
            wins += int(moka_executor(task, seq, env.grid, env.projection, start))
        return wins / trials

    precise = executor_success(forward, perturb=False)
    open_loop_perturbed = executor_success(perturbed, perturb=True)
    logger.info(f"Open-loop executor: precise {precise:.2f}, perturbed {open_loop_perturbed:.2f}")

    finetuned = []
    for seed in config.seeds:
        result = service.run_seed(seed, env, regressors, sequences)
        finetuned.append(evaluate_policy(result.agent, perturbed, trials, seed + EVAL_SEED_OFFSET, perturb=True))

    regime = config.demo_regime
    table = ResultsTable(rows=[
        ResultsRow(method="moka_precise", task=config.task, regime=regime,
                   success=round(100.0 * precise, 6), trials=trials, seeds=1),
        ResultsRow(method="moka_perturbed", task=config.task, regime=regime,
                   success=round(100.0 * open_loop_perturbed, 6), trials=trials, seeds=1),
        ResultsRow(method="finetuned_combined", task=config.task, regime=regime,
                   success=round(100.0 * float(np.mean(finetuned)), 6), trials=trials, seeds=len(config.seeds)),
    ])
    write_results_csv(table, service.layout.root / "moka.csv")
    return table


def label_episode_log(config: ExperimentConfig, in_path: str, out_path: str, seed: Optional[int] = None,
                      connector: Optional[VLMConnector] = None) -> List[dict]:
    """
    Label an externally recorded episode log under the config's reward
    formulation and write the labeled log next to it.
    """
    service = ExperimentService(config, connector)
    env, regressors, sequences = service.prepare()
    episode = read_episode_jsonl(in_path)
    if episode.task_name != env.forward.name:
        raise ValueError(f"episode was recorded on task '{episode.task_name}', config runs '{env.forward.name}'")
    engine = service.build_engine(env, regressors, sequences, config.seeds[0] if seed is None else seed)
    labels = engine.label(episode)
    write_episode_jsonl(out_path, episode, labels)
    logger.info(f"Labeled {len(labels)} frames of {in_path}, mean reward {engine.mean_reward(labels):.3f}")
    return [label.to_dict() for label in labels]
