"""
Annotated visual prompts.

Builds the two images sent to the waypoint provider: the top-down view
with the labeled grid and the sampled grasp (P) and target (Q) keypoint
candidates, and the side view with one labeled horizontal line per
height level. Object masks are filled disks around the projected object
centres.
"""
import base64
import io
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from PIL import Image, ImageDraw

from core.config import Config
from core.geometry import GridSpec, grid_labels, height_to_pixel
from sim.projection import Projection, SeedLike, as_generator, project_point
from sim.world import Vec3, WorldState

logger = logging.getLogger(__name__)

Pixel = Tuple[int, int]

BACKGROUND = (235, 235, 235)
GRID_COLOR = (90, 90, 90)
GRASP_MASK_COLOR = (255, 200, 120)
TARGET_MASK_COLOR = (150, 190, 255)
GRASP_POINT_COLOR = (0, 128, 128)
TARGET_POINT_COLOR = (0, 0, 200)
ROBOT_COLOR = (200, 40, 40)


class AnnotationError(ValueError):
    """Raised for empty masks and missing grasp/target sources."""


@dataclass(frozen=True)
class KeypointCandidate:
    label: str
    pixel: Pixel
    source_object: str


@dataclass
class AnnotatedObservation:
    """Everything a waypoint provider sees: grid, candidates, side lines and the two rasters."""
    grid: GridSpec
    top_down_candidates: List[KeypointCandidate]
    side_lines: List[Tuple[str, int]]
    rendered_top: Image.Image
    rendered_side: Image.Image
    grasp_source: str = "object"
    target_source: str = "target"
    masks: Dict[str, Set[Pixel]] = field(default_factory=dict, repr=False)

    @property
    def grasp_candidates(self) -> List[KeypointCandidate]:
        return [c for c in self.top_down_candidates if c.label.startswith("P")]

    @property
    def target_candidates(self) -> List[KeypointCandidate]:
        return [c for c in self.top_down_candidates if c.label.startswith("Q")]


def disk_mask(center: Tuple[float, float], radius: float, grid: GridSpec) -> Set[Pixel]:
    """Integer pixels within `radius` of `center`, clipped to the image."""
    cu, cv = center
    u_lo, u_hi = max(0, int(np.floor(cu - radius))), min(grid.image_width - 1, int(np.ceil(cu + radius)))
    v_lo, v_hi = max(0, int(np.floor(cv - radius))), min(grid.image_height - 1, int(np.ceil(cv + radius)))
    return {
        (u, v)
        for u in range(u_lo, u_hi + 1)
        for v in range(v_lo, v_hi + 1)
        if (u - cu) ** 2 + (v - cv) ** 2 <= radius ** 2
    }


def sample_keypoints(mask: Iterable[Pixel], n: int, seed: SeedLike = None) -> List[Pixel]:
    """
    n pixels drawn uniformly from the mask, without replacement unless the
    mask has fewer than n pixels.
    """
    pixels = sorted(set(mask))
    if not pixels:
        raise AnnotationError("cannot sample keypoints from an empty mask")
    if n < 1:
        raise AnnotationError(f"need at least one keypoint, got n={n}")
    rng = as_generator(seed)
    idx = rng.choice(len(pixels), size=n, replace=len(pixels) < n)
    return [pixels[i] for i in idx]


def grid_line_positions(grid: GridSpec) -> Tuple[List[int], List[int]]:
    """Pixel columns and rows of the interior grid lines."""
    xs = [int(round(k * grid.cell_width)) for k in range(1, grid.cols)]
    ys = [int(round(k * grid.cell_height)) for k in range(1, grid.rows)]
    return xs, ys


def side_line_rows(grid: GridSpec) -> List[Tuple[str, int]]:
    """(label, image row) per height level; higher levels sit higher in the image."""
    return [
        (str(z), int(round(grid.image_height - height_to_pixel(grid, z))))
        for z in range(grid.height_levels)
    ]


def _source_position(state: WorldState, source: str, landmarks: Dict[str, Vec3]) -> Vec3:
    for obj in state.objects:
        if obj.id == source:
            return obj.position
    if source in landmarks:
        return landmarks[source]
    raise AnnotationError(f"'{source}' is neither an object in the scene nor a known landmark")


def _render_top(grid: GridSpec, masks: Dict[str, Set[Pixel]], colors: Dict[str, Tuple[int, int, int]],
                candidates: Sequence[KeypointCandidate], robot: Tuple[float, float]) -> Image.Image:
    image = Image.new("RGB", (grid.image_width, grid.image_height), BACKGROUND)
    pixels = image.load()
    for name, mask in masks.items():
        for u, v in mask:
            pixels[u, v] = colors[name]

    draw = ImageDraw.Draw(image)
    xs, ys = grid_line_positions(grid)
    for x in xs:
        draw.line([(x, 0), (x, grid.image_height - 1)], fill=GRID_COLOR)
    for y in ys:
        draw.line([(0, y), (grid.image_width - 1, y)], fill=GRID_COLOR)
    col_labels, row_labels = grid_labels(grid)
    for i, label in enumerate(col_labels):
        draw.text((int(i * grid.cell_width) + 1, 0), label, fill=GRID_COLOR)
    for j, label in enumerate(row_labels):
        draw.text((1, int(j * grid.cell_height) + 1), label, fill=GRID_COLOR)

    for candidate in candidates:
        u, v = candidate.pixel
        color = GRASP_POINT_COLOR if candidate.label.startswith("P") else TARGET_POINT_COLOR
        draw.ellipse([u - 1, v - 1, u + 1, v + 1], fill=color)
        draw.text((u + 2, v - 4), candidate.label, fill=color)

    ru, rv = robot
    draw.rectangle([ru - 1, rv - 1, ru + 1, rv + 1], outline=ROBOT_COLOR)
    return image


def _render_side(grid: GridSpec, lines: Sequence[Tuple[str, int]], points: Dict[str, Tuple[float, float]],
                 colors: Dict[str, Tuple[int, int, int]]) -> Image.Image:
    image = Image.new("RGB", (grid.image_width, grid.image_height), BACKGROUND)
    draw = ImageDraw.Draw(image)
    for label, row in lines:
        draw.line([(0, row), (grid.image_width - 1, row)], fill=GRID_COLOR)
        draw.text((1, max(0, row - 10)), label, fill=GRID_COLOR)
    for name, (u, w) in points.items():
        row = grid.image_height - w
        draw.ellipse([u - 2, row - 2, u + 2, row + 2], fill=colors.get(name, ROBOT_COLOR))
    return image


def build_annotation(state: WorldState, proj: Projection, grid: GridSpec, seed: SeedLike = None,
                     grasp_source: str = "object", target_source: str = "target",
                     landmarks: Optional[Dict[str, Vec3]] = None,
                     n_keypoints: int = Config.KEYPOINTS_PER_OBJECT,
                     mask_radius: float = Config.MASK_RADIUS) -> AnnotatedObservation:
    """
    Annotate the first observation of an experiment.

    Args:
        state: scene to annotate
        proj: camera model (its noise perturbs the projected centres)
        grid: prompt grid
        seed: keypoint sampling and projection noise seed
        grasp_source: object whose mask yields the P candidates
        target_source: object or landmark whose mask yields the Q candidates
        landmarks: fixture positions usable as target sources
    """
    rng = as_generator(seed)
    landmarks = landmarks or {}
    grasp_pixel = project_point(proj, _source_position(state, grasp_source, landmarks), rng)
    target_pixel = project_point(proj, _source_position(state, target_source, landmarks), rng)
    robot_pixel = project_point(proj, state.effector, rng)

    masks = {
        grasp_source: disk_mask((grasp_pixel.u, grasp_pixel.v), mask_radius, grid),
        target_source: disk_mask((target_pixel.u, target_pixel.v), mask_radius, grid),
    }
    candidates = [
        KeypointCandidate(f"P{i + 1}", pixel, grasp_source)
        for i, pixel in enumerate(sample_keypoints(masks[grasp_source], n_keypoints, rng))
    ] + [
        KeypointCandidate(f"Q{i + 1}", pixel, target_source)
        for i, pixel in enumerate(sample_keypoints(masks[target_source], n_keypoints, rng))
    ]

    colors = {grasp_source: GRASP_MASK_COLOR, target_source: TARGET_MASK_COLOR}
    lines = side_line_rows(grid)
    rendered_top = _render_top(grid, masks, colors, candidates, (robot_pixel.u, robot_pixel.v))
    rendered_side = _render_side(
        grid, lines,
        {grasp_source: (grasp_pixel.u, grasp_pixel.w), "robot": (robot_pixel.u, robot_pixel.w)},
        colors,
    )
    logger.debug(f"Annotated {len(candidates)} candidates for {grasp_source} -> {target_source}")
    return AnnotatedObservation(
        grid=grid,
        top_down_candidates=candidates,
        side_lines=lines,
        rendered_top=rendered_top,
        rendered_side=rendered_side,
        grasp_source=grasp_source,
        target_source=target_source,
        masks=masks,
    )


def to_ppm(image: Image.Image) -> bytes:
    """Binary PPM (P6) bytes of an RGB raster."""
    buffer = io.BytesIO()
    image.convert("RGB").save(buffer, format="PPM")
    return buffer.getvalue()


def to_png_base64(image: Image.Image) -> str:
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return base64.b64encode(buffer.getvalue()).decode("ascii")
