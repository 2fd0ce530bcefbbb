"""
File-based waypoint cache for wayshape.

The VLM is queried once per experiment; the resulting block sequence is
persisted in the waypoint file format and every later run of the same
experiment loads it instead of querying again.
"""
import os
import json
import hashlib
import logging
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from core.geometry import BlockSequence, GridSpec, WaypointParseError, parse_sequence, serialize_sequence
from utils.monitoring import metrics_collector

logger = logging.getLogger(__name__)


def cache_key(task_name: str, direction: str, instruction: str, grid: GridSpec, provider: str,
              settings: Optional[Mapping[str, Any]] = None) -> str:
    """
    Cache file stem derived from everything that shapes the prompt or its
    answer. `settings` carries the provider's own inputs (oracle heights,
    waypoint file digest, endpoint, annotation seed) and must be JSON
    serialisable.
    """
    config_str = json.dumps(
        {
            "instruction": instruction,
            "grid": [grid.image_width, grid.image_height, grid.cols, grid.rows, grid.height_levels],
            "provider": provider,
            "settings": dict(settings or {}),
        },
        sort_keys=True,
    )
    digest = hashlib.sha256(config_str.encode('utf-8')).hexdigest()
    return f"{task_name}_{direction}_{digest[:12]}"


class WaypointCache:
    """One cached block sequence stored at a fixed path."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def exists(self) -> bool:
        return self.path.is_file()

    def load(self, grid: Optional[GridSpec] = None) -> Optional[BlockSequence]:
        """Cached sequence, or None when the file is missing or corrupt."""
        if not self.exists():
            metrics_collector.record_cache_operation("miss")
            return None

        try:
            seq = parse_sequence(self.path.read_text(encoding="utf-8"), grid)
        except (OSError, UnicodeDecodeError, WaypointParseError) as e:
            logger.warning(f"Corrupt waypoint cache {self.path}: {e}; it will be re-queried")
            metrics_collector.record_cache_operation("corrupt")
            return None

        logger.info(f"Waypoint cache hit: {self.path}")
        metrics_collector.record_cache_operation("hit")
        return seq

    def store(self, seq: BlockSequence) -> Path:
        """Atomic write-rename so concurrent readers never see a partial file."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_name(f".{self.path.name}.{os.getpid()}.tmp")
        tmp.write_text(serialize_sequence(seq), encoding="utf-8")
        os.replace(tmp, self.path)
        logger.info(f"Cached waypoints at {self.path}")
        return self.path

    def clear(self) -> bool:
        try:
            self.path.unlink()
            return True
        except FileNotFoundError:
            return False
