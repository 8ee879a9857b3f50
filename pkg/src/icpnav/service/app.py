"""HTTP service over the navigation benchmark.

Handlers are plain functions taking and returning the pydantic models from
``schemas``; the FastAPI app is a thin routing layer over them, and the
command line calls the same handlers in process when no server is given.
"""

from __future__ import annotations

import functools
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..metrics import episode_metrics
from ..persist import parse_replay, read_replay, save_radii
from ..scenarios import generate_scenarios
from ..suite import calibrate_offline, run_suite
from .schemas import (
    EpisodeRowModel,
    HealthResponse,
    MetricsModel,
    OffcpRequest,
    OffcpResponse,
    ReplayRequest,
    RunRequest,
    RunResponse,
    ScenarioModel,
    ScenariosRequest,
    ScenariosResponse,
    SummaryModel,
)

__all__ = [
    "handle_run",
    "handle_replay_metrics",
    "handle_calibrate_offcp",
    "handle_generate_scenarios",
    "create_app",
]


def handle_run(req: RunRequest) -> RunResponse:
    cfg = req.to_config()
    suite = run_suite(cfg, workers=req.workers_override)
    return RunResponse(
        summary=SummaryModel.from_summary(suite.summary),
        episodes=[EpisodeRowModel.from_result(r) for r in suite.results],
        out=cfg.out_dir,
    )


def handle_replay_metrics(req: ReplayRequest) -> MetricsModel:
    if req.content is not None:
        log, meta = parse_replay(req.content)
    elif req.path is not None:
        log, meta = read_replay(req.path)
    else:
        raise ValueError("provide either a replay path or its content")
    metrics = episode_metrics(log.record, t_pred=meta.t_pred, r_r=meta.r_r, r_h=meta.r_h)
    return MetricsModel.from_metrics(metrics)


def handle_calibrate_offcp(req: OffcpRequest) -> OffcpResponse:
    cfg = req.config.to_config()
    calibrated = calibrate_offline(cfg)
    out = None
    if req.out is not None:
        save_radii(req.out, calibrated)
        out = str(Path(req.out))
    r = calibrated.radii
    return OffcpResponse(
        radii=[float(x) for x in r.radii],
        alpha=r.alpha,
        sample_count=r.sample_count,
        quantile_rule=r.quantile_rule,
        episodes=calibrated.episodes,
        out=out,
    )


def handle_generate_scenarios(req: ScenariosRequest) -> ScenariosResponse:
    scenarios = generate_scenarios(req.humans, req.count, req.seed, req.geometry)
    return ScenariosResponse(
        scenarios=[
            ScenarioModel(
                robot_start=(sc.robot_start.x, sc.robot_start.y),
                robot_goal=(sc.robot_goal.x, sc.robot_goal.y),
                human_starts=[(p.x, p.y) for p in sc.human_starts],
                human_goals=[(p.x, p.y) for p in sc.human_goals],
                arena=sc.arena,
                seed=sc.seed,
            )
            for sc in scenarios
        ]
    )


def _http_errors(fn):
    @functools.wraps(fn)
    def wrapped(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    return wrapped


def create_app() -> FastAPI:
    app = FastAPI(title="icpnav", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/suites/run", response_model=RunResponse)
    @_http_errors
    def suites_run(req: RunRequest) -> RunResponse:
        return handle_run(req)

    @app.post("/metrics/replay", response_model=MetricsModel)
    @_http_errors
    def metrics_replay(req: ReplayRequest) -> MetricsModel:
        return handle_replay_metrics(req)

    @app.post("/calibration/offcp", response_model=OffcpResponse)
    @_http_errors
    def calibration_offcp(req: OffcpRequest) -> OffcpResponse:
        return handle_calibrate_offcp(req)

    @app.post("/scenarios/generate", response_model=ScenariosResponse)
    @_http_errors
    def scenarios_generate(req: ScenariosRequest) -> ScenariosResponse:
        return handle_generate_scenarios(req)

    return app
