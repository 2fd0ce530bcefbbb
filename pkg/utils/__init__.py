"""
Utility modules for wayshape.

This package contains utility and support components:
- Monitoring and metrics
- Waypoint cache
- Ordered batch processing
- Learning-curve plots (utils.plotting, imported on demand)
"""

from .monitoring import metrics_collector, monitor_stage
from .cache import WaypointCache, cache_key
from .batch_processor import BatchProcessor, batch_processor

__all__ = [
    'metrics_collector', 'monitor_stage',
    'WaypointCache', 'cache_key',
    'BatchProcessor', 'batch_processor'
]
