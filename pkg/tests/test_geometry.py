import json

import numpy as np
import pytest

from core.geometry import (
    BlockSequence, GeometryError, GridSpec, PixelPoint3, WaypointBlock, WaypointParseError,
    cell_centroid, grid_labels, height_to_pixel, parse_sequence, pixel_to_cell, sequence_to_pixels,
    serialize_sequence,
)


def test_cell_centroids_on_default_grid(grid):
    assert cell_centroid(grid, 0, 0) == pytest.approx((100 / 12, 100 / 12))
    assert cell_centroid(grid, 5, 5) == pytest.approx((100 - 100 / 12, 100 - 100 / 12))
    assert cell_centroid(grid, 2, 1) == pytest.approx((2.5 * 100 / 6, 1.5 * 100 / 6))


def test_height_levels_are_evenly_spaced(grid):
    heights = [height_to_pixel(grid, z) for z in range(grid.height_levels)]
    assert np.allclose(np.diff(heights), 100 / 6)
    assert heights[0] == pytest.approx(100 / 12)


@pytest.mark.parametrize("x, y", [(-1, 0), (6, 0), (0, 6)])
def test_cell_centroid_out_of_range(grid, x, y):
    with pytest.raises(GeometryError):
        cell_centroid(grid, x, y)


def test_height_out_of_range(grid):
    with pytest.raises(GeometryError):
        height_to_pixel(grid, 6)


def test_grid_needs_two_cells_per_axis():
    with pytest.raises(GeometryError):
        GridSpec(cols=1)


def test_sequence_to_pixels(grid):
    seq = BlockSequence.from_triples([[0, 0, 0], [1, 0, 2]])
    pixels = sequence_to_pixels(seq, grid)
    assert pixels.shape == (2, 3)
    assert pixels[1] == pytest.approx([1.5 * 100 / 6, 0.5 * 100 / 6, 2.5 * 100 / 6])


def test_pixel_to_cell_clamps_image_edges(grid):
    assert pixel_to_cell(grid, 0.0, 0.0) == (0, 0)
    assert pixel_to_cell(grid, 100.0, 100.0) == (5, 5)
    assert pixel_to_cell(grid, 41.7, 25.0) == (2, 1)
    assert pixel_to_cell(grid, -3.0, 140.0) == (0, 5)


def test_grid_labels(grid):
    cols, rows = grid_labels(grid)
    assert cols == ["A", "B", "C", "D", "E", "F"]
    assert rows == ["1", "2", "3", "4", "5", "6"]


def test_block_sequence_rejects_consecutive_duplicates():
    with pytest.raises(GeometryError):
        BlockSequence.from_triples([[1, 1, 0], [1, 1, 0], [2, 1, 0]])


def test_block_sequence_needs_two_blocks():
    with pytest.raises(GeometryError):
        BlockSequence((WaypointBlock(0, 0, 0),))


def test_pixel_point_must_be_finite():
    with pytest.raises(GeometryError):
        PixelPoint3(float("nan"), 0.0, 0.0)


def test_serialize_then_parse_keeps_blocks(grid):
    seq = BlockSequence.from_triples([[2, 1, 0], [2, 1, 1], [1, 4, 1], [1, 4, 0]])
    text = serialize_sequence(seq)
    assert json.loads(text) == [[2, 1, 0], [2, 1, 1], [1, 4, 1], [1, 4, 0]]
    assert parse_sequence(text, grid) == seq


def test_parse_accepts_wrapped_object(grid):
    seq = parse_sequence('{"block_sequence": [[0, 0, 0], [0, 1, 0]]}', grid)
    assert seq.as_triples() == [[0, 0, 0], [0, 1, 0]]


def test_parse_accepts_integral_floats():
    assert parse_sequence("[[1.0, 2, 0], [1, 3, 0]]")[0] == WaypointBlock(1, 2, 0)


@pytest.mark.parametrize(
    "text, position",
    [
        ("[[0, 0, 0], [0, 1]]", 1),
        ("[[0, 0, 0], [0, 0, 0]]", 1),
        ('[[0, 0, 0], [0, "a", 0]]', 1),
        ("[[0, 0, 0], [0, 1.5, 0]]", 1),
        ("[[0, 0, 0], [9, 0, 0]]", 1),
        ("[[0, 0, 0]]", 1),
    ],
)
def test_parse_errors_report_position(grid, text, position):
    with pytest.raises(WaypointParseError) as info:
        parse_sequence(text, grid)
    assert info.value.position == position


def test_parse_rejects_malformed_json():
    with pytest.raises(WaypointParseError) as info:
        parse_sequence("[[0, 0, 0], [0, 1, 0]")
    assert info.value.position is not None


def test_parse_rejects_object_without_sequence():
    with pytest.raises(WaypointParseError):
        parse_sequence('{"blocks": []}')


def test_parse_without_grid_skips_bounds():
    seq = parse_sequence("[[9, 9, 9], [10, 9, 9]]")
    assert len(seq) == 2
