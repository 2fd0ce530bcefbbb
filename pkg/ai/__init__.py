"""
Visual prompting and waypoint providers for wayshape.

This package contains the prompting components:
- Annotated observations (grid, keypoint candidates, side-view lines)
- Metaprompt rendering and the VLM connector
- Waypoint providers (oracle, file, remote) and the per-experiment cache
"""

from .annotation import (
    AnnotatedObservation, AnnotationError, KeypointCandidate,
    build_annotation, sample_keypoints, to_png_base64, to_ppm,
)
from .vlm_connector import ProviderError, VLMConnector, render_metaprompt
from .waypoint_providers import (
    FallbackWaypointProvider, FileWaypointProvider, OracleWaypointProvider,
    RemoteWaypointProvider, WaypointProvider, cached_query, extract_sequence_text,
    grid_path, make_provider, oracle_sequence, oracle_waypoints, parse_response, remote_waypoints,
)

__all__ = [
    'AnnotatedObservation', 'AnnotationError', 'KeypointCandidate',
    'build_annotation', 'sample_keypoints', 'to_png_base64', 'to_ppm',
    'ProviderError', 'VLMConnector', 'render_metaprompt',
    'WaypointProvider', 'OracleWaypointProvider', 'FileWaypointProvider',
    'RemoteWaypointProvider', 'FallbackWaypointProvider',
    'make_provider', 'cached_query', 'extract_sequence_text', 'parse_response',
    'grid_path', 'oracle_sequence', 'oracle_waypoints', 'remote_waypoints',
]
