"""
API Routes for wayshape.

This package contains the route handlers of the local mock endpoint:
- Chat-completions routes answering waypoint queries
"""

from .vlm_routes import mock_state, router as vlm_router

__all__ = ['vlm_router', 'mock_state']
