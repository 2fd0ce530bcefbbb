"""
Grid and pixel geometry for wayshape.

This module contains the canonical index space shared by every other
package: the grid overlaid on the top-down view, the labeled height lines
of the side view, waypoint blocks and block sequences, and the waypoint
file format.
"""
import json
import logging
import string
from dataclasses import dataclass
from typing import Any, Iterator, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class GeometryError(ValueError):
    """Raised for out-of-bounds indices and invalid geometric objects."""


class WaypointParseError(GeometryError):
    """Raised when waypoint text cannot be turned into a BlockSequence."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


@dataclass(frozen=True)
class GridSpec:
    """Grid over the top-down view plus evenly spaced side-view height levels."""
    image_width: int = 100
    image_height: int = 100
    cols: int = 6
    rows: int = 6
    height_levels: int = 6  # level 0 is the table surface

    def __post_init__(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise GeometryError(f"image dimensions must be positive, got {self.image_width}x{self.image_height}")
        if self.cols < 2 or self.rows < 2 or self.height_levels < 2:
            raise GeometryError(
                f"grid needs at least 2 cols/rows/levels, got {self.cols}x{self.rows}x{self.height_levels}"
            )

    @property
    def cell_width(self) -> float:
        return self.image_width / self.cols

    @property
    def cell_height(self) -> float:
        return self.image_height / self.rows

    @property
    def level_spacing(self) -> float:
        return self.image_height / self.height_levels


@dataclass(frozen=True)
class WaypointBlock:
    """One (column, row, height level) tuple of a VLM trajectory."""
    x: int
    y: int
    z: int

    def check_bounds(self, grid: GridSpec) -> None:
        if not (0 <= self.x < grid.cols):
            raise GeometryError(f"column {self.x} outside [0, {grid.cols})")
        if not (0 <= self.y < grid.rows):
            raise GeometryError(f"row {self.y} outside [0, {grid.rows})")
        if not (0 <= self.z < grid.height_levels):
            raise GeometryError(f"height level {self.z} outside [0, {grid.height_levels})")

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class BlockSequence:
    """Ordered coarse trajectory of waypoint blocks."""
    blocks: Tuple[WaypointBlock, ...]

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if len(blocks) < 2:
            raise GeometryError(f"block sequence needs at least 2 blocks, got {len(blocks)}")
        for i in range(1, len(blocks)):
            if blocks[i] == blocks[i - 1]:
                raise GeometryError(f"blocks {i - 1} and {i} are identical")

    @classmethod
    def from_triples(cls, triples: Sequence[Sequence[int]]) -> "BlockSequence":
        return cls(tuple(WaypointBlock(int(t[0]), int(t[1]), int(t[2])) for t in triples))

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, index: int) -> WaypointBlock:
        return self.blocks[index]

    def __iter__(self) -> Iterator[WaypointBlock]:
        return iter(self.blocks)

    def check_bounds(self, grid: GridSpec) -> None:
        for block in self.blocks:
            block.check_bounds(grid)

    def as_triples(self) -> List[List[int]]:
        return [list(block.as_tuple()) for block in self.blocks]


@dataclass(frozen=True)
class PixelPoint3:
    """Top-down (u, v) pixel plus the side-view height coordinate w."""
    u: float
    v: float
    w: float

    def __post_init__(self):
        if not all(np.isfinite((self.u, self.v, self.w))):
            raise GeometryError(f"non-finite pixel point ({self.u}, {self.v}, {self.w})")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "PixelPoint3":
        return cls(float(values[0]), float(values[1]), float(values[2]))


def cell_centroid(grid: GridSpec, x: int, y: int) -> Tuple[float, float]:
    """Pixel centroid of grid cell (x, y)."""
    if not (0 <= x < grid.cols) or not (0 <= y < grid.rows):
        raise GeometryError(f"cell ({x}, {y}) outside {grid.cols}x{grid.rows} grid")
    return ((x + 0.5) * grid.image_width / grid.cols, (y + 0.5) * grid.image_height / grid.rows)


def height_to_pixel(grid: GridSpec, z: int) -> float:
    """Side-view pixel coordinate of height level z."""
    if not (0 <= z < grid.height_levels):
        raise GeometryError(f"height level {z} outside [0, {grid.height_levels})")
    return (z + 0.5) * grid.image_height / grid.height_levels


def block_to_pixel3(grid: GridSpec, block: WaypointBlock) -> PixelPoint3:
    u, v = cell_centroid(grid, block.x, block.y)
    return PixelPoint3(u, v, height_to_pixel(grid, block.z))


def sequence_to_pixels(seq: BlockSequence, grid: GridSpec) -> np.ndarray:
    """N x 3 array of block centroids in (u, v, w) pixel space."""
    return np.array([block_to_pixel3(grid, block).as_array() for block in seq], dtype=float)


def pixel_to_cell(grid: GridSpec, u: float, v: float) -> Tuple[int, int]:
    """Grid cell containing a top-down pixel; image edges clamp into the border cells."""
    x = int(np.floor(u * grid.cols / grid.image_width))
    y = int(np.floor(v * grid.rows / grid.image_height))
    return (min(max(x, 0), grid.cols - 1), min(max(y, 0), grid.rows - 1))


def grid_labels(grid: GridSpec) -> Tuple[List[str], List[str]]:
    """Presentation labels: letters for columns, numbers for rows."""
    letters = string.ascii_uppercase
    cols = [letters[i % 26] * (1 + i // 26) for i in range(grid.cols)]
    rows = [str(i + 1) for i in range(grid.rows)]
    return cols, rows


def serialize_sequence(seq: BlockSequence) -> str:
    """Waypoint file text: one JSON array of [x, y, z] integer triples."""
    return json.dumps(seq.as_triples())


def _coerce_triple(item: Any, index: int) -> Tuple[int, int, int]:
    if not isinstance(item, (list, tuple)) or len(item) != 3:
        raise WaypointParseError("expected an [x, y, z] triple", position=index)
    values = []
    for value in item:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise WaypointParseError(f"non-integer coordinate {value!r}", position=index)
        if isinstance(value, float) and not value.is_integer():
            raise WaypointParseError(f"non-integer coordinate {value!r}", position=index)
        values.append(int(value))
    return values[0], values[1], values[2]


def parse_sequence(text: str, grid: Optional[GridSpec] = None) -> BlockSequence:
    """
    Parse waypoint file text into a BlockSequence.

    Accepts a bare JSON array of triples or an object wrapping it under
    "block_sequence". When a grid is given every triple is bounds-checked.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise WaypointParseError(f"malformed waypoint JSON: {e.msg}", position=e.pos) from e

    if isinstance(data, dict):
        if "block_sequence" not in data:
            raise WaypointParseError("object without a 'block_sequence' key")
        data = data["block_sequence"]
    if not isinstance(data, list):
        raise WaypointParseError("waypoint text must contain a JSON array")
    if len(data) < 2:
        raise WaypointParseError(f"block sequence needs at least 2 blocks, got {len(data)}", position=len(data))

    blocks = []
    for index, item in enumerate(data):
        block = WaypointBlock(*_coerce_triple(item, index))
        if grid is not None:
            try:
                block.check_bounds(grid)
            except GeometryError as e:
                raise WaypointParseError(str(e), position=index) from e
        if blocks and blocks[-1] == block:
            raise WaypointParseError("consecutive duplicate block", position=index)
        blocks.append(block)
    return BlockSequence(tuple(blocks))
