"""
Type adapters between domain objects and on-disk formats.

Episodes travel as JSON Lines (one header line, then one line per frame),
learning curves and result tables as CSV written through pandas with a
fixed float format so identical runs produce identical bytes.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd

from sim.episode import Episode, Frame
from sim.tasks import Direction
from sim.world import Action, Gripper, GripperCommand, ObjectState, WorldState, as_vec3
from .models import RESULT_COLUMNS, ResultsTable

logger = logging.getLogger(__name__)

EPISODE_SCHEMA = "wayshape-episode/2"
CURVE_COLUMNS = ["regime", "formulation", "seed", "step", "success_rate", "mean_reward"]
BASELINE_COLUMNS = ["regime", "method", "seed", "success_rate"]
FLOAT_FORMAT = "%.6f"

PathLike = Union[str, Path]


class EpisodeAdapter:
    """Conversion between Episode objects and JSON-ready dictionaries."""

    @staticmethod
    def state_to_dict(state: WorldState) -> Dict[str, Any]:
        return {
            "effector": list(state.effector),
            "gripper": state.gripper.value,
            "objects": [{"id": o.id, "position": list(o.position), "held": o.held} for o in state.objects],
            "step_count": state.step_count,
        }

    @staticmethod
    def state_from_dict(data: Dict[str, Any]) -> WorldState:
        return WorldState(
            effector=as_vec3(data["effector"]),
            gripper=Gripper(data["gripper"]),
            objects=tuple(
                ObjectState(o["id"], as_vec3(o["position"]), bool(o.get("held", False))) for o in data["objects"]
            ),
            step_count=int(data.get("step_count", 0)),
        )

    @staticmethod
    def action_to_dict(action: Optional[Action]) -> Optional[Dict[str, Any]]:
        if action is None:
            return None
        return {"delta": list(action.delta), "gripper_command": action.gripper_command.value}

    @staticmethod
    def action_from_dict(data: Optional[Dict[str, Any]]) -> Optional[Action]:
        if data is None:
            return None
        return Action(as_vec3(data["delta"]), GripperCommand(data.get("gripper_command", GripperCommand.NONE.value)))

    @classmethod
    def frame_to_dict(cls, frame: Frame, label: Optional[Any] = None) -> Dict[str, Any]:
        """
        One flat frame record.

        Reward and pixel fields are null on unlabeled frames; labeled frames
        also carry the dense-kernel diagnostics.
        """
        record = {
            "t": frame.t,
            **cls.state_to_dict(frame.state),
            "action": cls.action_to_dict(frame.action),
            "success": frame.success,
            "pixel_robot": None,
            "pixel_objects": None,
            "r_sparse": None,
            "r_dense": None,
            "r": None,
        }
        if label is not None:
            data = label.to_dict()
            record.update(
                pixel_robot=data["robot_pixel"],
                pixel_objects=data["object_pixels"],
                r_sparse=data["r_sparse"],
                r_dense=data["r_dense"],
                r=data["r"],
                nearest_index=data["nearest_index"],
                target_index=data["target_index"],
                d_t=data["d_t"],
                r_obj=data["r_obj"],
            )
        return record

    @classmethod
    def frame_from_dict(cls, data: Dict[str, Any]) -> Frame:
        return Frame(
            t=int(data["t"]),
            state=cls.state_from_dict(data),
            action=cls.action_from_dict(data.get("action")),
            success=bool(data.get("success", False)),
        )


def write_episode_jsonl(path: PathLike, episode: Episode,
                        labels: Optional[Sequence[Any]] = None) -> Path:
    """Write an episode; when labels are given each frame line carries its pixels and rewards."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if labels is not None and len(labels) != len(episode.frames):
        raise ValueError(f"{len(labels)} labels for {len(episode.frames)} frames")
    header = {
        "schema": EPISODE_SCHEMA,
        "task": episode.task_name,
        "direction": episode.direction.value,
        "episode_id": episode.episode_id,
        "is_demo": episode.is_demo,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for i, frame in enumerate(episode.frames):
        record = EpisodeAdapter.frame_to_dict(frame, labels[i] if labels is not None else None)
        lines.append(json.dumps(record, sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_episode_jsonl(path: PathLike) -> Episode:
    """Read an episode log; pixel and reward fields, if present, are ignored."""
    path = Path(path)
    records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not records:
        raise ValueError(f"empty episode log {path}")
    header, frames = records[0], records[1:]
    if header.get("schema") != EPISODE_SCHEMA:
        raise ValueError(f"unsupported episode schema {header.get('schema')!r} in {path}")
    if not frames:
        raise ValueError(f"episode log {path} has no frames")
    return Episode(
        task_name=header["task"],
        direction=Direction(header["direction"]),
        frames=[EpisodeAdapter.frame_from_dict(f) for f in frames],
        episode_id=int(header.get("episode_id", 0)),
        is_demo=bool(header.get("is_demo", False)),
    )


def curves_to_frame(curves: Iterable[Any], regime: str) -> pd.DataFrame:
    """Long-format table of LearningCurve snapshots."""
    rows: List[Dict[str, Any]] = []
    for curve in curves:
        for row in curve.rows():
            rows.append({"regime": regime, **row})
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def _write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_curves_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    ordered = frame[CURVE_COLUMNS].sort_values(["regime", "formulation", "seed", "step"], kind="stable")
    return _write_csv(ordered.reset_index(drop=True), path)


def read_curves_csv(path: PathLike) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={"regime": str, "formulation": str})
    missing = [c for c in CURVE_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"curves file {path} lacks columns {missing}")
    return frame


def write_baselines_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    """Per-seed success of reference policies that have no learning curve (e.g. bc)."""
    return _write_csv(frame[BASELINE_COLUMNS].sort_values(["regime", "method", "seed"], kind="stable"), path)


def read_baselines_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"regime": str, "method": str})


def write_results_csv(table: ResultsTable, path: PathLike) -> Path:
    return _write_csv(table.to_frame(), path)


def read_results_csv(path: PathLike) -> ResultsTable:
    frame = pd.read_csv(path, dtype={"method": str, "task": str, "regime": str})
    return ResultsTable.from_frame(frame[RESULT_COLUMNS])
