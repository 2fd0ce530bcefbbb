"""
Performance monitoring and metrics collection for wayshape.

This module provides monitoring capabilities including:
- Reward evaluation counters (dense kernel, consensus classifier)
- Waypoint provider query tracking
- Environment step and gradient update counters
- Stage duration histograms
- System resource snapshots for run summaries
"""
import time
import psutil
import logging
from typing import Dict, Any
from datetime import datetime
from functools import wraps
from core.config import Config

logger = logging.getLogger(__name__)

try:
    from prometheus_client import CollectorRegistry, Counter, Histogram, Gauge, generate_latest
    PROMETHEUS_AVAILABLE = True
except ImportError:
    PROMETHEUS_AVAILABLE = False
    logger.warning("Prometheus client not available. Metrics collection will be limited.")


class MetricsCollector:
    """Collects and manages experiment metrics."""

    def __init__(self, enabled: bool = Config.ENABLE_METRICS):
        """Initialize metrics collector."""
        self.enabled = enabled
        self.start_time = datetime.now()

        # In-memory metrics storage (mirrors the Prometheus counters)
        self.metrics = {
            "dense_evaluations": 0,
            "sparse_evaluations": 0,
            "provider_queries": {},
            "cache_hits": 0,
            "cache_misses": 0,
            "env_steps": 0,
            "gradient_updates": 0,
            "stage_seconds": {},
        }

        if PROMETHEUS_AVAILABLE and self.enabled:
            self._init_prometheus_metrics()

    def _init_prometheus_metrics(self):
        """Initialize Prometheus metrics on a private registry."""
        self.registry = CollectorRegistry()

        self.reward_evaluations = Counter(
            'wayshape_reward_evaluations_total',
            'Reward signal evaluations',
            ['signal'],
            registry=self.registry
        )

        self.provider_queries = Counter(
            'wayshape_provider_queries_total',
            'Waypoint provider queries',
            ['provider', 'status'],
            registry=self.registry
        )

        self.env_steps = Counter(
            'wayshape_env_steps_total',
            'Online environment steps',
            registry=self.registry
        )

        self.gradient_updates = Counter(
            'wayshape_gradient_updates_total',
            'Actor-critic gradient updates',
            registry=self.registry
        )

        self.stage_duration = Histogram(
            'wayshape_stage_duration_seconds',
            'Experiment stage duration in seconds',
            ['stage'],
            buckets=(0.1, 1, 10, 60, 300, 1800, 7200),
            registry=self.registry
        )

        self.system_memory = Gauge(
            'wayshape_system_memory_usage_bytes',
            'System memory usage in bytes',
            registry=self.registry
        )

        logger.info("Prometheus metrics initialized")

    def record_reward_evaluations(self, dense: int = 0, sparse: int = 0):
        """Record dense kernel and consensus classifier evaluations."""
        if not self.enabled:
            return

        self.metrics["dense_evaluations"] += dense
        self.metrics["sparse_evaluations"] += sparse

        if PROMETHEUS_AVAILABLE:
            if dense:
                self.reward_evaluations.labels(signal="dense").inc(dense)
            if sparse:
                self.reward_evaluations.labels(signal="sparse").inc(sparse)

    def record_provider_query(self, provider: str, status: str = "success"):
        """Record a waypoint provider query."""
        if not self.enabled:
            return

        key = f"{provider}:{status}"
        self.metrics["provider_queries"][key] = self.metrics["provider_queries"].get(key, 0) + 1

        if PROMETHEUS_AVAILABLE:
            self.provider_queries.labels(provider=provider, status=status).inc()

    def record_cache_operation(self, result: str):
        """Record a waypoint cache lookup (hit, miss or corrupt)."""
        if not self.enabled:
            return
        if result == "hit":
            self.metrics["cache_hits"] += 1
        else:
            self.metrics["cache_misses"] += 1

    def record_env_steps(self, steps: int):
        if not self.enabled:
            return
        self.metrics["env_steps"] += steps
        if PROMETHEUS_AVAILABLE:
            self.env_steps.inc(steps)

    def record_updates(self, updates: int):
        if not self.enabled:
            return
        self.metrics["gradient_updates"] += updates
        if PROMETHEUS_AVAILABLE:
            self.gradient_updates.inc(updates)

    def record_stage(self, stage: str, duration: float):
        """Record how long an experiment stage took."""
        if not self.enabled:
            return

        self.metrics["stage_seconds"][stage] = self.metrics["stage_seconds"].get(stage, 0.0) + duration

        if PROMETHEUS_AVAILABLE:
            self.stage_duration.labels(stage=stage).observe(duration)

    def system_snapshot(self) -> Dict[str, Any]:
        """Memory and CPU usage of the machine and this process."""
        try:
            memory = psutil.virtual_memory()
            process = psutil.Process()
            if PROMETHEUS_AVAILABLE and self.enabled:
                self.system_memory.set(memory.used)
            return {
                "memory_usage_percent": memory.percent,
                "process_rss_mb": round(process.memory_info().rss / (1024 ** 2), 1),
                "cpu_usage_percent": psutil.cpu_percent(),
            }
        except Exception as e:
            logger.error(f"Error reading system metrics: {e}")
            return {"error": str(e)}

    def get_metrics_summary(self) -> Dict[str, Any]:
        """Get metrics summary for run reports."""
        if not self.enabled:
            return {"enabled": False}

        uptime = datetime.now() - self.start_time
        return {
            "enabled": True,
            "uptime_seconds": int(uptime.total_seconds()),
            "rewards": {
                "dense_evaluations": self.metrics["dense_evaluations"],
                "sparse_evaluations": self.metrics["sparse_evaluations"],
            },
            "provider_queries": dict(self.metrics["provider_queries"]),
            "cache": {
                "hits": self.metrics["cache_hits"],
                "misses": self.metrics["cache_misses"],
            },
            "training": {
                "env_steps": self.metrics["env_steps"],
                "gradient_updates": self.metrics["gradient_updates"],
            },
            "stages": {k: round(v, 3) for k, v in self.metrics["stage_seconds"].items()},
        }

    def get_prometheus_metrics(self) -> bytes:
        """Get Prometheus-formatted metrics."""
        if not PROMETHEUS_AVAILABLE or not self.enabled:
            return b"# Prometheus metrics not available\n"

        try:
            self.system_snapshot()
            return generate_latest(self.registry)
        except Exception as e:
            logger.error(f"Error generating Prometheus metrics: {e}")
            return f"# Error generating metrics: {e}\n".encode()


def monitor_stage(stage_name: str):
    """Decorator to time an experiment stage."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                return func(*args, **kwargs)
            except Exception:
                logger.error(f"Stage '{stage_name}' failed")
                raise
            finally:
                metrics_collector.record_stage(stage_name, time.perf_counter() - start_time)

        return wrapper
    return decorator


# Global metrics collector instance
metrics_collector = MetricsCollector()
