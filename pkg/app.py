"""
wayshape - mock VLM endpoint service

This is the FastAPI application serving a local chat-completions endpoint,
so the remote waypoint provider can be exercised without network access.

The service provides:
- POST /v1/chat/completions: scripted replies, or the oracle block sequence
- POST /mock/script, /mock/reset, GET /mock/stats: reply queue control
- GET /health and GET /metrics (Prometheus text format)

Run it with `wayshape serve-mock` and point an experiment config's
vlm_base_url at http://<host>:<port>/v1.
"""
import time
from datetime import datetime
from typing import Awaitable, Callable

from fastapi import FastAPI, Request, status
from fastapi.responses import JSONResponse, Response

from core.config import Config
from routes.vlm_routes import router as vlm_router
from utils.monitoring import metrics_collector

app = FastAPI(
    title="wayshape mock VLM endpoint",
    description="Local chat-completions endpoint answering waypoint queries",
    version="1.0.0",
    docs_url="/docs",
    redoc_url=None,
)


@app.middleware("http")
async def process_time_middleware(
    request: Request,
    call_next: Callable[[Request], Awaitable[Response]]
) -> Response:
    """Add processing time headers."""
    start_time = time.time()
    response: Response = await call_next(request)
    response.headers["X-Process-Time"] = str(time.time() - start_time)
    return response


@app.get("/health")
async def health_check():
    """Simple health check endpoint."""
    return {
        "status": "ok",
        "timestamp": datetime.now().isoformat()
    }


@app.get("/metrics")
async def metrics():
    """Prometheus metrics."""
    return Response(content=metrics_collector.get_prometheus_metrics(), media_type="text/plain; version=0.0.4")


# Global exception handler
@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):  # noqa: ARG001
    """Global exception handler."""
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={"error": "Internal server error", "detail": str(exc), "timestamp": datetime.now().isoformat()},
    )


app.include_router(vlm_router)

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "app:app",
        host=Config.MOCK_HOST,
        port=Config.MOCK_PORT,
    )
