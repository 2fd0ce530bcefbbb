"""
Waypoint providers.

A provider turns an annotated observation and a language instruction into
a BlockSequence. Three interchangeable sources exist: a scripted oracle
that needs no network, a waypoint file, and a remote VLM speaking the
chat-completions wire format. Every provider validates its output against
the annotation's grid before returning it.
"""
import json
import logging
from pathlib import Path
from typing import List, Optional, Protocol, Sequence, Tuple, Union, runtime_checkable

import numpy as np

from core.config import Config
from core.geometry import (
    BlockSequence, GeometryError, GridSpec, WaypointBlock, WaypointParseError,
    parse_sequence, pixel_to_cell,
)
from utils.cache import WaypointCache
from utils.monitoring import metrics_collector
from .annotation import AnnotatedObservation
from .vlm_connector import ProviderError, VLMConnector

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]


@runtime_checkable
class WaypointProvider(Protocol):
    name: str

    def query(self, annotation: AnnotatedObservation, instruction: str) -> BlockSequence:
        ...


# ---- oracle -------------------------------------------------------------

def representative_pixel(pixels: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """The candidate closest to the candidates' mean (lowest index on ties)."""
    points = np.asarray(pixels, dtype=float)
    if len(points) == 0:
        raise ProviderError("oracle needs at least one candidate")
    distances = np.sum((points - points.mean(axis=0)) ** 2, axis=1)
    u, v = points[int(np.argmin(distances))]
    return float(u), float(v)


def grid_path(start: Cell, end: Cell) -> List[Cell]:
    """
    4-connected cell path from start to end, both included.

    Each step moves along the axis whose next cell boundary the straight
    line crosses first; on an exact corner crossing the row moves first.
    """
    (x, y), (tx, ty) = start, end
    nx, ny = abs(tx - x), abs(ty - y)
    sx, sy = (1 if tx > x else -1), (1 if ty > y else -1)
    path = [(x, y)]
    ix = iy = 0
    while ix < nx or iy < ny:
        if iy >= ny or (ix < nx and (1 + 2 * ix) * ny < (1 + 2 * iy) * nx):
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        path.append((x, y))
    return path


def oracle_sequence(grasp_pixels: Sequence[Tuple[float, float]], target_pixels: Sequence[Tuple[float, float]],
                    grid: GridSpec, z_low: int = Config.ORACLE_Z_LOW, z_lift: int = Config.ORACLE_Z_LIFT) -> BlockSequence:
    """Pick-transport-place sequence from grasp and target candidate pixels."""
    if z_low == z_lift:
        raise ValueError("oracle lift level must differ from the grasp level")
    grasp = pixel_to_cell(grid, *representative_pixel(grasp_pixels))
    target = pixel_to_cell(grid, *representative_pixel(target_pixels))

    blocks = [WaypointBlock(grasp[0], grasp[1], z_low)]
    blocks += [WaypointBlock(x, y, z_lift) for x, y in grid_path(grasp, target)]
    blocks.append(WaypointBlock(target[0], target[1], z_low))
    seq = BlockSequence(tuple(blocks))
    seq.check_bounds(grid)
    return seq


def oracle_waypoints(annotation: AnnotatedObservation, instruction: str, grid: Optional[GridSpec] = None,
                     z_low: int = Config.ORACLE_Z_LOW, z_lift: int = Config.ORACLE_Z_LIFT) -> BlockSequence:
    grid = grid or annotation.grid
    if not annotation.grasp_candidates or not annotation.target_candidates:
        raise ProviderError("annotation has no grasp or target candidates")
    return oracle_sequence(
        [c.pixel for c in annotation.grasp_candidates],
        [c.pixel for c in annotation.target_candidates],
        grid, z_low, z_lift,
    )


class OracleWaypointProvider:
    """Deterministic, network-free provider."""
    name = "oracle"

    def __init__(self, z_low: int = Config.ORACLE_Z_LOW, z_lift: int = Config.ORACLE_Z_LIFT):
        self.z_low = z_low
        self.z_lift = z_lift

    def query(self, annotation: AnnotatedObservation, instruction: str) -> BlockSequence:
        seq = oracle_waypoints(annotation, instruction, annotation.grid, self.z_low, self.z_lift)
        metrics_collector.record_provider_query(self.name)
        return seq


# ---- waypoint file ------------------------------------------------------

class FileWaypointProvider:
    """Reads a fixed block sequence from a waypoint file."""
    name = "file"

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def query(self, annotation: AnnotatedObservation, instruction: str) -> BlockSequence:
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as e:
            metrics_collector.record_provider_query(self.name, "error")
            raise ProviderError(f"cannot read waypoint file {self.path}: {e}") from e
        try:
            seq = parse_sequence(text, annotation.grid)
        except WaypointParseError as e:
            metrics_collector.record_provider_query(self.name, "error")
            raise ProviderError(f"invalid waypoint file {self.path}: {e}") from e
        metrics_collector.record_provider_query(self.name)
        return seq


# ---- remote VLM ---------------------------------------------------------

def extract_sequence_text(text: str) -> str:
    """The first JSON array of [x, y, z] triples in free-form model output."""
    decoder = json.JSONDecoder()
    start = text.find("[")
    while start != -1:
        try:
            value, end = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            value, end = None, start
        if isinstance(value, list) and value and all(isinstance(item, list) and len(item) == 3 for item in value):
            return text[start:end]
        start = text.find("[", start + 1)
    raise WaypointParseError("no JSON array of [x, y, z] triples in the response")


def parse_response(text: str, grid: GridSpec) -> BlockSequence:
    return parse_sequence(extract_sequence_text(text), grid)


def feedback_message(error: Exception, grid: GridSpec) -> str:
    return (
        f"Your block_sequence could not be used: {error}. "
        f"Reply again with a single JSON array of at least two [x, y, z] integer triples, with "
        f"0 <= x < {grid.cols}, 0 <= y < {grid.rows}, 0 <= z < {grid.height_levels}, "
        f"and no two consecutive blocks equal."
    )


class RemoteWaypointProvider:
    """
    Queries a VLM and repairs malformed output by retrying with the
    validation error as a follow-up message.
    """
    name = "remote"

    def __init__(self, connector: VLMConnector, retries: int = Config.VLM_RETRIES):
        self.connector = connector
        self.retries = retries

    def query(self, annotation: AnnotatedObservation, instruction: str) -> BlockSequence:
        grid = annotation.grid
        messages = self.connector.build_messages(annotation, instruction)
        last_error: Optional[Exception] = None

        for attempt in range(self.retries + 1):
            try:
                text = self.connector.complete(messages)
            except ProviderError:
                metrics_collector.record_provider_query(self.name, "error")
                raise
            try:
                seq = parse_response(text, grid)
            except (WaypointParseError, GeometryError) as e:
                last_error = e
                logger.warning(f"Invalid VLM waypoints (attempt {attempt + 1}/{self.retries + 1}): {e}")
                messages = messages + [
                    {"role": "assistant", "content": text},
                    {"role": "user", "content": feedback_message(e, grid)},
                ]
                continue
            metrics_collector.record_provider_query(self.name)
            logger.info(f"VLM returned {len(seq)} waypoint blocks after {attempt + 1} request(s)")
            return seq

        metrics_collector.record_provider_query(self.name, "invalid")
        raise ProviderError(f"no valid block sequence after {self.retries + 1} requests: {last_error}")


def remote_waypoints(annotation: AnnotatedObservation, instruction: str, connector: VLMConnector,
                     retries: int = Config.VLM_RETRIES) -> BlockSequence:
    """Single uncached VLM query; raises ProviderError when no valid sequence comes back."""
    return RemoteWaypointProvider(connector, retries).query(annotation, instruction)


class FallbackWaypointProvider:
    """Answers with the fallback provider when the primary one fails."""

    def __init__(self, primary: WaypointProvider, fallback: WaypointProvider):
        self.primary = primary
        self.fallback = fallback
        self.name = f"{primary.name}+{fallback.name}"

    def query(self, annotation: AnnotatedObservation, instruction: str) -> BlockSequence:
        try:
            return self.primary.query(annotation, instruction)
        except ProviderError as e:
            logger.warning(f"{self.primary.name} provider failed ({e}); falling back to {self.fallback.name}")
            return self.fallback.query(annotation, instruction)


def make_provider(kind: str, waypoint_path: Optional[Union[str, Path]] = None,
                  connector: Optional[VLMConnector] = None, fallback: bool = Config.PROVIDER_FALLBACK,
                  retries: int = Config.VLM_RETRIES, z_low: int = Config.ORACLE_Z_LOW,
                  z_lift: int = Config.ORACLE_Z_LIFT) -> WaypointProvider:
    """Build the provider named in an experiment config."""
    oracle = OracleWaypointProvider(z_low, z_lift)
    if kind == "oracle":
        return oracle
    if kind == "file":
        if waypoint_path is None:
            raise ValueError("file provider needs a waypoint path")
        return FileWaypointProvider(waypoint_path)
    if kind == "remote":
        remote = RemoteWaypointProvider(connector or VLMConnector(), retries)
        return FallbackWaypointProvider(remote, oracle) if fallback else remote
    raise ValueError(f"unknown waypoint provider '{kind}'")


def cached_query(provider: WaypointProvider, cache_path: Union[str, Path], annotation: AnnotatedObservation,
                 instruction: str) -> BlockSequence:
    """
    Query once per experiment: load the cached sequence when present,
    otherwise query the provider and persist the answer.
    """
    cache = WaypointCache(cache_path)
    seq = cache.load(annotation.grid)
    if seq is not None:
        return seq
    seq = provider.query(annotation, instruction)
    cache.store(seq)
    return seq
