"""
Core components for wayshape.

This package contains the fundamental components:
- Configuration management
- Grid geometry and the waypoint file format
- Experiment config and result models
- Artifact storage and format adapters
- Experiment orchestration (imported lazily)
"""

from .config import Config
from .geometry import (
    BlockSequence, GeometryError, GridSpec, PixelPoint3, WaypointBlock, WaypointParseError,
    block_to_pixel3, cell_centroid, height_to_pixel, parse_sequence, serialize_sequence,
)


# Lazy import to avoid circular dependency
def get_experiment_module():
    """Get the experiment orchestration module (lazy import)."""
    from . import experiment
    return experiment


__all__ = [
    'Config',
    'BlockSequence', 'GeometryError', 'GridSpec', 'PixelPoint3', 'WaypointBlock', 'WaypointParseError',
    'block_to_pixel3', 'cell_centroid', 'height_to_pixel', 'parse_sequence', 'serialize_sequence',
    'get_experiment_module',
]
