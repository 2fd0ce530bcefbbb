"""
Per-frame reward labeling.

Every frame of an episode is labeled independently: the effector is
mapped to pixel space by the fitted camera regressors, scored against the
waypoint sequence of the episode's task direction, and combined with the
consensus success signal according to the chosen reward formulation.
"""
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.geometry import BlockSequence, PixelPoint3
from learn.replay_buffer import Transition, episode_transitions
from sim.episode import Episode, Frame
from sim.projection import Projection, project, project_point
from sim.tasks import Direction, TaskSpec
from utils.monitoring import metrics_collector
from .dense import RewardParams, dense_reward, object_reward
from .ransac import CameraRegressor, robot_pixel
from .sparse import SparseClassifier, sparse_reward

logger = logging.getLogger(__name__)

Regressors = Tuple[CameraRegressor, CameraRegressor]


class Formulation(str, Enum):
    """Which reward signal the learner sees."""
    DENSE_ONLY = "dense_only"
    SPARSE_ONLY = "sparse_only"
    COMBINED = "combined"

    @property
    def uses_dense(self) -> bool:
        return self is not Formulation.SPARSE_ONLY

    @property
    def uses_sparse(self) -> bool:
        return self is not Formulation.DENSE_ONLY


class ObjectRewardMode(str, Enum):
    ROBOT = "robot"
    MEAN = "mean"


class MissingWaypointsError(RuntimeError):
    """Raised when dense rewards are requested for a direction without a waypoint sequence."""


@dataclass(frozen=True)
class LabeledFrame:
    """
    Reward labels of one frame.

    Dense fields are None when the formulation never evaluates the dense
    kernel; object pixels are empty when no projection is available.
    """
    t: int
    robot_pixel: PixelPoint3
    nearest_index: Optional[int]
    target_index: Optional[int]
    d_t: Optional[float]
    r_dense: float
    r_sparse: int
    r: float
    r_obj: Optional[float] = None
    object_pixels: Dict[str, PixelPoint3] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["robot_pixel"] = self.robot_pixel.as_array().tolist()
        data["object_pixels"] = {obj_id: p.as_array().tolist() for obj_id, p in self.object_pixels.items()}
        return data


def combine(r_sparse: int, r_dense: float) -> float:
    """r = 1 when the sparse classifier fires, the dense reward otherwise."""
    return 1.0 if r_sparse == 1 else float(r_dense)


def label_frames(episode: Episode, regressors: Regressors, params: RewardParams,
                 seq: Optional[BlockSequence] = None, classifier: Optional[SparseClassifier] = None,
                 formulation: Formulation = Formulation.COMBINED, latch: bool = False,
                 object_reward_fn: Optional[Callable[[Frame], Optional[float]]] = None,
                 projection: Optional[Projection] = None) -> List[LabeledFrame]:
    """
    Label every frame of an episode.

    The dense kernel runs only when `seq` is given and the consensus
    classifier only when `classifier` is given; `formulation` then picks
    which of the two signals becomes r.
    """
    top, side = regressors
    tracker = projection.noiseless() if projection is not None else None
    labels = []
    latched = False
    for frame in episode.frames:
        pixel = robot_pixel(top, side, frame.state.effector)
        nearest = target = d_t = r_obj = None
        r_dense = 0.0
        if seq is not None:
            dense = dense_reward(pixel, seq, params.grid, params)
            nearest, target, d_t, r_dense = dense.nearest_index, dense.target_index, dense.d_t, dense.r_dense
            r_obj = object_reward_fn(frame) if object_reward_fn is not None else None
            if r_obj is not None:
                r_dense = 0.5 * (r_dense + r_obj)

        r_sparse = 0
        if classifier is not None:
            r_sparse = sparse_reward(classifier, frame.state, episode.episode_id, frame.t)
            if latch:
                latched = latched or r_sparse == 1
                r_sparse = int(latched)

        if formulation is Formulation.DENSE_ONLY:
            r = r_dense
        elif formulation is Formulation.SPARSE_ONLY:
            r = float(r_sparse)
        else:
            r = combine(r_sparse, r_dense)
        objects = project(frame.state, tracker).objects if tracker is not None else {}
        labels.append(LabeledFrame(frame.t, pixel, nearest, target, d_t, r_dense, r_sparse, r, r_obj, objects))
    return labels


def label_episode(episode: Episode, seq: BlockSequence, regressors: Regressors, params: RewardParams,
                  classifier: SparseClassifier, projection: Optional[Projection] = None) -> List[LabeledFrame]:
    """Label every frame with the combined dense + sparse rule."""
    return label_frames(episode, regressors, params, seq, classifier, Formulation.COMBINED, projection=projection)


@dataclass
class RewardEngine:
    """
    Reward labeling for both directions of a reset-free task pair.

    Holds the waypoint sequences queried once per experiment, the fitted
    camera regressors and the consensus classifier configuration, and
    counts how often each reward signal is evaluated.
    """
    tasks: Dict[Direction, TaskSpec]
    sequences: Dict[Direction, BlockSequence]
    regressors: Regressors
    params: RewardParams
    formulation: Formulation = Formulation.COMBINED
    k_prompts: int = 4
    p_fp: float = 0.0
    p_fn: float = 0.0
    seed: int = 0
    projection: Optional[Projection] = None
    object_sequences: Dict[Direction, BlockSequence] = field(default_factory=dict)
    object_mode: ObjectRewardMode = ObjectRewardMode.ROBOT
    latch: bool = False
    dense_evaluations: int = 0
    sparse_evaluations: int = 0

    def __post_init__(self):
        self.formulation = Formulation(self.formulation)
        self.object_mode = ObjectRewardMode(self.object_mode)
        if self.object_mode is ObjectRewardMode.MEAN and self.projection is None:
            raise ValueError("object reward needs the projection used to track object pixels")

    def classifier(self, direction: Direction) -> SparseClassifier:
        task = self.tasks[direction]
        return SparseClassifier(task.is_success, self.k_prompts, self.p_fp, self.p_fn, self.seed)

    def sequence(self, direction: Direction) -> BlockSequence:
        if direction not in self.sequences:
            raise MissingWaypointsError(f"no waypoint sequence for the {direction.value} task")
        return self.sequences[direction]

    def check_ready(self) -> None:
        """Fail early when the formulation needs waypoints that were never queried."""
        if self.formulation.uses_dense:
            for direction in self.tasks:
                self.sequence(direction)

    def _object_reward(self, frame: Frame, direction: Direction, episode_id: int) -> Optional[float]:
        if self.object_mode is not ObjectRewardMode.MEAN or direction not in self.object_sequences:
            return None
        task = self.tasks[direction]
        position = frame.state.object(task.object_id).position
        rng = np.random.default_rng([self.seed, episode_id, frame.t, 1])
        pixel = project_point(self.projection, position, rng)
        return object_reward(pixel, self.object_sequences[direction], self.params.grid, self.params)

    def label(self, episode: Episode) -> List[LabeledFrame]:
        """Label an episode under the engine's formulation."""
        direction = episode.direction
        seq = self.sequence(direction) if self.formulation.uses_dense else None
        classifier = self.classifier(direction) if self.formulation.uses_sparse else None
        labels = label_frames(
            episode, self.regressors, self.params, seq, classifier, self.formulation, self.latch,
            object_reward_fn=lambda frame: self._object_reward(frame, direction, episode.episode_id),
            projection=self.projection,
        )
        dense = len(labels) if seq is not None else 0
        sparse = len(labels) if classifier is not None else 0
        self.dense_evaluations += dense
        self.sparse_evaluations += sparse
        metrics_collector.record_reward_evaluations(dense=dense, sparse=sparse)
        return labels

    def transitions(self, episode: Episode, gamma: float, online: bool = False) -> List[Transition]:
        """
        Labeled transitions with Monte-Carlo returns for the replay buffer.

        A transition is terminal only where the formulation's own success
        signal fires, so dense_only data never marks an episode as solved.
        """
        labels = self.label(episode)
        task = self.tasks[episode.direction]
        done = [label.r_sparse == 1 for label in labels]
        return episode_transitions(episode, [label.r for label in labels], task, gamma, online, done)

    def mean_reward(self, labels: Sequence[LabeledFrame]) -> float:
        return float(np.mean([label.r for label in labels])) if labels else 0.0
