"""
Artifact storage for wayshape.

Every experiment owns one output directory. This module knows the layout
of that directory and performs the writes: resolved config, waypoint
cache files, annotated prompt rasters, checkpoints, curves, results and
run summaries. Files are written to a temporary sibling first and moved
into place.
"""
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Union

from ai.annotation import AnnotatedObservation, to_ppm
from .models import ExperimentConfig

logger = logging.getLogger(__name__)


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


class RunLayout:
    """
    Paths inside one experiment output directory.

        <out>/config.conf               resolved experiment config
        <out>/waypoints/<key>.json      cached block sequences
        <out>/annotations/<task>_<direction>_{top,side}.ppm
        <out>/checkpoints/seed_<n>.json  learner state; replay buffer in seed_<n>.buffer.npz
        <out>/curves.csv                learning curves (all seeds)
        <out>/results.csv               results table
        <out>/baselines.csv             per-seed reference policy success
        <out>/summary.json              run summary with metrics snapshot
        <out>/plots/*.svg
    """

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    @property
    def config(self) -> Path:
        return self.root / "config.conf"

    @property
    def curves(self) -> Path:
        return self.root / "curves.csv"

    @property
    def results(self) -> Path:
        return self.root / "results.csv"

    @property
    def baselines(self) -> Path:
        return self.root / "baselines.csv"

    @property
    def summary(self) -> Path:
        return self.root / "summary.json"

    @property
    def plots(self) -> Path:
        return self.root / "plots"

    @property
    def annotations(self) -> Path:
        return self.root / "annotations"

    def waypoints(self, key: str) -> Path:
        return self.root / "waypoints" / f"{key}.json"

    def checkpoint(self, seed: int) -> Path:
        return self.root / "checkpoints" / f"seed_{seed}.json"

    def run_dir(self, formulation: str, regime: str) -> "RunLayout":
        """Sub-layout of one suite member."""
        return RunLayout(self.root / "runs" / f"{formulation}_{regime}")


class ArtifactOperations:
    """Writes of experiment artifacts."""

    @staticmethod
    def save_config(layout: RunLayout, config: ExperimentConfig) -> Path:
        return atomic_write_text(layout.config, config.to_text())

    @staticmethod
    def save_annotation(layout: RunLayout, annotation: AnnotatedObservation, task_name: str,
                        direction: str) -> Dict[str, Path]:
        """Persist both prompt rasters as binary PPM."""
        stem = f"{task_name}_{direction}"
        written = {
            "top": atomic_write_bytes(layout.annotations / f"{stem}_top.ppm", to_ppm(annotation.rendered_top)),
            "side": atomic_write_bytes(layout.annotations / f"{stem}_side.ppm", to_ppm(annotation.rendered_side)),
        }
        logger.debug(f"Saved annotations for {stem} under {layout.annotations}")
        return written

    @staticmethod
    def save_summary(layout: RunLayout, summary: Dict[str, Any]) -> Path:
        return atomic_write_text(layout.summary, json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")

    @staticmethod
    def load_summary(layout: RunLayout) -> Dict[str, Any]:
        return json.loads(layout.summary.read_text(encoding="utf-8"))
