"""HTTP service wrapping the benchmark: app factory, handlers, and schemas."""

from .app import (
    create_app,
    handle_calibrate_offcp,
    handle_generate_scenarios,
    handle_replay_metrics,
    handle_run,
)

__all__ = [
    "create_app",
    "handle_run",
    "handle_replay_metrics",
    "handle_calibrate_offcp",
    "handle_generate_scenarios",
]
