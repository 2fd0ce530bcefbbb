import pytest
from fastapi.testclient import TestClient

from ai.annotation import (
    BACKGROUND, GRASP_MASK_COLOR, GRID_COLOR, ROBOT_COLOR, AnnotationError, _render_side, _render_top, build_annotation,
    disk_mask, sample_keypoints, side_line_rows, to_ppm,
)
from ai.vlm_connector import ProviderError, VLMConnector, render_metaprompt
from ai.waypoint_providers import (
    FallbackWaypointProvider, FileWaypointProvider, OracleWaypointProvider, RemoteWaypointProvider,
    cached_query, extract_sequence_text, grid_path, make_provider, oracle_sequence, oracle_waypoints, remote_waypoints,
)
from app import app
from core.geometry import BlockSequence, WaypointParseError, serialize_sequence
from routes.vlm_routes import mock_state, parse_metaprompt
from sim.env import reset
from utils.monitoring import metrics_collector

BAD_REPLY = "I would move the gripper towards the bin."


@pytest.fixture
def annotation(env, grid):
    task = env.forward
    return build_annotation(
        reset(task), env.projection, grid, 0,
        grasp_source=task.grasp_source, target_source=task.target_source, landmarks=task.landmarks(),
    )


@pytest.fixture
def client():
    mock_state.reset()
    with TestClient(app) as test_client:
        yield test_client
    mock_state.reset()


@pytest.fixture
def connector(client):
    return VLMConnector(api_key="test-key", base_url="http://testserver/v1", model="mock-vlm", http_client=client)


class CountingProvider:
    name = "counting"

    def __init__(self, seq):
        self.seq = seq
        self.calls = 0

    def query(self, annotation, instruction):
        self.calls += 1
        return self.seq


# ---- annotation ---------------------------------------------------------

def test_annotation_candidates(annotation, grid):
    assert [c.label for c in annotation.grasp_candidates] == ["P1", "P2", "P3", "P4", "P5"]
    assert [c.label for c in annotation.target_candidates] == ["Q1", "Q2", "Q3", "Q4", "Q5"]
    for candidate in annotation.top_down_candidates:
        assert candidate.pixel in annotation.masks[candidate.source_object]
    assert annotation.rendered_top.size == (grid.image_width, grid.image_height)
    assert annotation.rendered_side.size == (grid.image_width, grid.image_height)


def test_annotation_is_seeded(env, grid):
    state = reset(env.forward)
    kwargs = dict(grasp_source="object", target_source="left_bin", landmarks=env.forward.landmarks())
    a = build_annotation(state, env.projection, grid, 5, **kwargs)
    b = build_annotation(state, env.projection, grid, 5, **kwargs)
    assert a.top_down_candidates == b.top_down_candidates
    assert to_ppm(a.rendered_top) == to_ppm(b.rendered_top)


def test_annotation_unknown_source(env, grid):
    with pytest.raises(AnnotationError):
        build_annotation(reset(env.forward), env.projection, grid, 0, target_source="shelf")


def test_ppm_header(annotation):
    assert to_ppm(annotation.rendered_side).startswith(b"P6")


def ppm_pixel(data, width, u, v):
    header = f"P6\n{width} {width}\n255\n".encode()
    assert data.startswith(header)
    offset = len(header) + 3 * (v * width + u)
    return tuple(data[offset:offset + 3])


def test_top_raster_golden_pixels(grid):
    masks = {"object": disk_mask((40.0, 60.0), 5.0, grid)}
    image = _render_top(grid, masks, {"object": GRASP_MASK_COLOR}, [], (75.0, 75.0))
    data = to_ppm(image)
    assert len(data) == len(b"P6\n100 100\n255\n") + 3 * 100 * 100
    golden = {
        (40, 60): GRASP_MASK_COLOR,
        (44, 60): GRASP_MASK_COLOR,
        (46, 60): BACKGROUND,
        (17, 95): GRID_COLOR,
        (95, 50): GRID_COLOR,
        (74, 75): ROBOT_COLOR,
        (76, 76): ROBOT_COLOR,
        (75, 75): BACKGROUND,
        (25, 25): BACKGROUND,
        (95, 95): BACKGROUND,
    }
    for (u, v), color in golden.items():
        assert ppm_pixel(data, 100, u, v) == color, (u, v)


def test_side_raster_golden_pixels(grid):
    lines = side_line_rows(grid)
    assert [row for _, row in lines] == [92, 75, 58, 42, 25, 8]
    data = to_ppm(_render_side(grid, lines, {"robot": (60.0, 40.0)}, {}))
    assert ppm_pixel(data, 100, 95, 92) == GRID_COLOR
    assert ppm_pixel(data, 100, 95, 8) == GRID_COLOR
    assert ppm_pixel(data, 100, 60, 60) == ROBOT_COLOR
    assert ppm_pixel(data, 100, 95, 50) == BACKGROUND


def test_sample_keypoints_edge_cases():
    with pytest.raises(AnnotationError):
        sample_keypoints(set(), 3)
    assert len(sample_keypoints({(1, 1)}, 3, 0)) == 3


def test_side_lines_rise_with_level(grid):
    rows = [row for _, row in side_line_rows(grid)]
    assert rows == sorted(rows, reverse=True)
    assert len(rows) == grid.height_levels


def test_metaprompt_lists_grid_and_candidates(annotation):
    text = render_metaprompt(annotation, "put the object in the left bin")
    assert "Image size: 100x100 pixels" in text
    assert "Task: put the object in the left bin" in text
    grid, grasp, target = parse_metaprompt(text)
    assert grid == annotation.grid
    assert grasp == [tuple(map(float, c.pixel)) for c in annotation.grasp_candidates]
    assert target == [tuple(map(float, c.pixel)) for c in annotation.target_candidates]


# ---- oracle -------------------------------------------------------------

def test_grid_path_straight_line():
    assert grid_path((1, 2), (4, 2)) == [(1, 2), (2, 2), (3, 2), (4, 2)]


def test_grid_path_diagonal_is_four_connected():
    path = grid_path((0, 0), (2, 2))
    assert len(path) == 5
    assert path[0] == (0, 0) and path[-1] == (2, 2)
    for (x0, y0), (x1, y1) in zip(path, path[1:]):
        assert abs(x1 - x0) + abs(y1 - y0) == 1


def test_grid_path_single_cell():
    assert grid_path((3, 3), (3, 3)) == [(3, 3)]


def test_oracle_sequence_shape(grid):
    grasp = [(1.5 * 100 / 6, 2.5 * 100 / 6)]
    target = [(4.5 * 100 / 6, 2.5 * 100 / 6)]
    seq = oracle_sequence(grasp, target, grid, z_low=1, z_lift=3)
    assert seq.as_triples() == [[1, 2, 1], [1, 2, 3], [2, 2, 3], [3, 2, 3], [4, 2, 3], [4, 2, 1]]


def test_oracle_uses_candidate_nearest_the_mean(grid):
    grasp = [(10.0, 10.0), (12.0, 10.0), (90.0, 90.0), (11.0, 11.0)]
    seq = oracle_sequence(grasp, [(95.0, 5.0)], grid)
    assert seq[0].as_tuple()[:2] == (0, 0)


def test_oracle_rejects_equal_levels(grid):
    with pytest.raises(ValueError):
        oracle_sequence([(10.0, 10.0)], [(90.0, 90.0)], grid, z_low=2, z_lift=2)


def test_oracle_provider_matches_bin_layout(annotation):
    seq = OracleWaypointProvider().query(annotation, "put the object in the left bin")
    assert seq[0].as_tuple() == (2, 1, 0)
    assert seq[-1].as_tuple() == (1, 4, 0)
    assert all(block.z == 1 for block in seq.blocks[1:-1])


# ---- file provider ------------------------------------------------------

def test_file_provider_reads_sequence(tmp_path, annotation):
    path = tmp_path / "forward.json"
    path.write_text("[[2, 1, 0], [2, 1, 1], [1, 4, 1], [1, 4, 0]]", encoding="utf-8")
    assert len(FileWaypointProvider(path).query(annotation, "")) == 4


def test_file_provider_errors(tmp_path, annotation):
    with pytest.raises(ProviderError):
        FileWaypointProvider(tmp_path / "missing.json").query(annotation, "")
    bad = tmp_path / "bad.json"
    bad.write_text("[[2, 1, 0], [7, 1, 0]]", encoding="utf-8")
    with pytest.raises(ProviderError):
        FileWaypointProvider(bad).query(annotation, "")


def test_make_provider():
    assert make_provider("oracle").name == "oracle"
    assert make_provider("remote", connector=object(), fallback=True).name == "remote+oracle"
    assert make_provider("remote", connector=object(), fallback=False).name == "remote"
    with pytest.raises(ValueError):
        make_provider("file")
    with pytest.raises(ValueError):
        make_provider("telepathy")


# ---- remote provider ----------------------------------------------------

def test_extract_sequence_from_prose():
    text = "Chosen: P2 and Q4 [best ones].\nblock_sequence: [[1, 2, 0], [1, 2, 1]] done"
    assert extract_sequence_text(text) == "[[1, 2, 0], [1, 2, 1]]"
    with pytest.raises(WaypointParseError):
        extract_sequence_text("no array here [1, 2]")


def test_remote_provider_oracle_reply(connector, annotation):
    seq = RemoteWaypointProvider(connector, retries=0).query(annotation, "put the object in the left bin")
    assert seq == oracle_waypoints(annotation, "")
    assert len(mock_state.requests) == 1


def test_remote_waypoints_extracts_array(connector, annotation):
    mock_state.script(["Here: [[0,0,0],[1,1,2]]"])
    assert remote_waypoints(annotation, "", connector).as_triples() == [[0, 0, 0], [1, 1, 2]]


def test_remote_provider_retries_with_feedback(connector, annotation):
    mock_state.script([BAD_REPLY])
    seq = RemoteWaypointProvider(connector, retries=2).query(annotation, "put the object in the left bin")
    assert seq == oracle_waypoints(annotation, "")
    assert len(mock_state.requests) == 2
    retry = mock_state.requests[1].messages
    assert [m.role for m in retry] == ["system", "user", "assistant", "user"]
    assert retry[2].content == BAD_REPLY
    assert "could not be used" in retry[3].content


def test_remote_provider_out_of_bounds_reply_is_retried(connector, annotation):
    mock_state.script(["block_sequence: [[0, 0, 0], [0, 0, 9]]"])
    RemoteWaypointProvider(connector, retries=1).query(annotation, "")
    assert len(mock_state.requests) == 2


def test_remote_provider_gives_up(connector, annotation):
    before = metrics_collector.metrics["provider_queries"].get("remote:invalid", 0)
    mock_state.script([BAD_REPLY, BAD_REPLY])
    with pytest.raises(ProviderError):
        RemoteWaypointProvider(connector, retries=1).query(annotation, "")
    assert len(mock_state.requests) == 2
    if metrics_collector.enabled:
        assert metrics_collector.metrics["provider_queries"]["remote:invalid"] == before + 1


def test_fallback_to_oracle(connector, annotation):
    mock_state.script([BAD_REPLY])
    provider = FallbackWaypointProvider(RemoteWaypointProvider(connector, retries=0), OracleWaypointProvider())
    assert provider.query(annotation, "") == oracle_waypoints(annotation, "")


def test_transport_errors_become_provider_errors(client, annotation):
    broken = VLMConnector(api_key="k", base_url="http://testserver/not-there", http_client=client)
    with pytest.raises(ProviderError):
        RemoteWaypointProvider(broken, retries=3).query(annotation, "")


# ---- mock endpoint ------------------------------------------------------

def test_mock_endpoint_control(client):
    assert client.post("/mock/script", json={"replies": ["a", "b"]}).json() == {"queued": 2}
    assert client.get("/mock/stats").json() == {"queued": 2, "requests": 0}
    response = client.post("/v1/chat/completions", json={"model": "m", "messages": [{"role": "user", "content": "hi"}]})
    assert response.json()["choices"][0]["message"]["content"] == "a"
    assert client.post("/mock/reset").json() == {"queued": 0, "requests": 0}


def test_mock_endpoint_needs_metaprompt(client):
    response = client.post("/v1/chat/completions", json={"model": "m", "messages": [{"role": "user", "content": "hi"}]})
    assert response.status_code == 400


def test_health_and_metrics(client):
    assert client.get("/health").json()["status"] == "ok"
    assert client.get("/metrics").status_code == 200


# ---- cache --------------------------------------------------------------

def test_cached_query_queries_once(tmp_path, annotation):
    seq = BlockSequence.from_triples([[2, 1, 0], [2, 1, 1], [1, 4, 1], [1, 4, 0]])
    provider = CountingProvider(seq)
    path = tmp_path / "waypoints" / "key.json"
    assert cached_query(provider, path, annotation, "") == seq
    assert cached_query(provider, path, annotation, "") == seq
    assert provider.calls == 1
    assert path.read_text(encoding="utf-8") == serialize_sequence(seq)


def test_corrupt_cache_is_requeried(tmp_path, annotation):
    seq = BlockSequence.from_triples([[0, 0, 0], [0, 0, 1]])
    provider = CountingProvider(seq)
    path = tmp_path / "key.json"
    path.write_text("[[0, 0", encoding="utf-8")
    assert cached_query(provider, path, annotation, "") == seq
    assert provider.calls == 1


def test_cached_sequence_is_bounds_checked(tmp_path, annotation):
    path = tmp_path / "key.json"
    path.write_text("[[0, 0, 0], [0, 0, 7]]", encoding="utf-8")
    provider = CountingProvider(BlockSequence.from_triples([[1, 1, 0], [1, 1, 1]]))
    cached_query(provider, path, annotation, "")
    assert provider.calls == 1


def test_oracle_independent_of_candidate_order(grid):
    pixels = [(40.0, 20.0), (45.0, 30.0), (42.0, 25.0)]
    a = oracle_sequence(pixels, [(20.0, 80.0)], grid)
    b = oracle_sequence(list(reversed(pixels)), [(20.0, 80.0)], grid)
    assert a == b
