"""Benchmark suites: many scenarios, one method, deterministic artifacts.

A suite generates its scenarios from the suite seed, runs every case with a
freshly built policy whose randomness derives from (suite seed, case index),
and aggregates the episode metrics.  Cases run in parallel across processes;
results are merged in case order, so the artifacts do not depend on worker
count or scheduling.  A crash inside one episode is recorded as that case's
failure and never aborts the suite.
"""

from __future__ import annotations

import dataclasses
import math
import multiprocessing
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import AcpState, AcpVariant, OffcpRadii, offcp_calibrate
from .episode import MAX_EPISODE_STEPS, EpisodeLog, run_episode
from .geometry import WorldState
from .icp import ExecScheme, IcpConfig, IcpModules
from .metrics import EpisodeMetrics, MetricStat, SuiteSummary, aggregate, episode_metrics
from .mpc import MpcConfig
from .orca import OrcaParams, RolloutConfig
from .persist import ReplayMeta, write_episodes_csv, write_replay, write_summary_csv, save_radii
from .policies import AcpPolicy, IcpPolicy, OffcpPolicy, OrcaPolicy, Policy
from .prediction import ConstantVelocityPredictor, TrajectoryPredictor
from .scenarios import DEFAULT_ARENA, Scenario, generate_scenarios

__all__ = ["METHODS", "RunConfig", "CaseResult", "SuiteResult", "run_suite", "resolve_workers"]

METHODS = ("icp", "offcp", "acp_a", "acp_w", "orca")
WORKERS_ENV_VAR = "ICPNAV_WORKERS"

# Calibration scenarios must not reuse the evaluation cases; a fixed offset
# moves them onto a disjoint seed stream while staying reproducible.
_OFFCP_SCENARIO_SEED_OFFSET = 1_000_003


@dataclass(frozen=True)
class RunConfig:
    """Everything a suite needs, flat so config files map one to one."""

    method: str = "icp"
    n_humans: int = 10
    cases: int = 100
    seed: int = 0
    workers: int = 8
    out_dir: str | None = None
    geometry: str = "circle"
    max_steps: int = MAX_EPISODE_STEPS
    # shared physical constants
    dt: float = 0.25
    v_max: float = 1.0
    r_r: float = 0.4
    r_h: float = 0.4
    # horizons
    t_obs: int = 5
    t_pred: int = 5
    t_mpc: int = 10
    # planner weights and solver knobs
    omega_g: float = 1.0
    omega_v: float = 5.0
    omega_reg: float = 0.5
    scp_tol: float = 1e-4
    scp_max_iter: int = 20
    # crowd simulator
    neighbor_dist: float = 10.0
    max_neighbors: int = 10
    time_horizon: float = 5.0
    goal_noise_prob: float = 0.1
    goal_noise_mag: float = 0.5
    # conformal loop
    ni: int = 3
    cs: int = 2
    alpha: float = 0.05
    exec_scheme: str = "PSE"
    tol_plan: float = 0.01
    tol_radii: float = 0.01
    quantile_rule: str = "finite_sample"
    # baselines
    offcp_episodes: int = 8
    acp_window: int = 30
    acp_learning_rate: float | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.exec_scheme not in ("PSE", "SSE"):
            raise ValueError(f"exec_scheme must be 'PSE' or 'SSE', got {self.exec_scheme!r}")
        if self.cases < 1:
            raise ValueError(f"cases must be >= 1, got {self.cases}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.n_humans < 0:
            raise ValueError(f"n_humans must be non-negative, got {self.n_humans}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")

    @property
    def t_exec(self) -> int:
        return self.t_pred if self.exec_scheme == "PSE" else 1

    def mpc_config(self) -> MpcConfig:
        return MpcConfig(
            t_mpc=self.t_mpc,
            t_pred=self.t_pred,
            dt=self.dt,
            v_max=self.v_max,
            omega_g=self.omega_g,
            omega_v=self.omega_v,
            omega_reg=self.omega_reg,
            r_r=self.r_r,
            r_h=self.r_h,
            scp_tol=self.scp_tol,
            scp_max_iter=self.scp_max_iter,
        )

    def sim_params(self) -> OrcaParams:
        return OrcaParams(
            neighbor_dist=self.neighbor_dist,
            max_neighbors=self.max_neighbors,
            time_horizon=self.time_horizon,
            dt=self.dt,
            v_max=self.v_max,
        )

    def predictor(self) -> TrajectoryPredictor:
        return ConstantVelocityPredictor()

    def case_seed(self, case_index: int) -> int:
        return int(np.random.SeedSequence((self.seed, case_index)).generate_state(1)[0])


@dataclass(frozen=True)
class CaseResult:
    case_index: int
    log: EpisodeLog | None
    metrics: EpisodeMetrics | None
    error: str | None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class SuiteResult:
    config: RunConfig
    scenarios: tuple[Scenario, ...]
    results: tuple[CaseResult, ...]
    summary: SuiteSummary
    offcp: OffcpRadii | None


def _build_policy(cfg: RunConfig, case_index: int, offcp: OffcpRadii | None) -> Policy:
    mpc_cfg = cfg.mpc_config()
    predictor = cfg.predictor()
    if cfg.method == "icp":
        icp_cfg = IcpConfig(
            k_max=cfg.ni,
            cs=cfg.cs,
            alpha=cfg.alpha,
            exec_scheme=ExecScheme[cfg.exec_scheme],
            t_exec=cfg.t_exec,
            tol_plan=cfg.tol_plan,
            tol_radii=cfg.tol_radii,
            seed=cfg.case_seed(case_index),
            quantile_rule=cfg.quantile_rule,
        )
        modules = IcpModules(
            predictor=predictor,
            sim_params=cfg.sim_params(),
            mpc_cfg=mpc_cfg,
            t_obs=cfg.t_obs,
            goal_noise_prob=cfg.goal_noise_prob,
            goal_noise_mag=cfg.goal_noise_mag,
            goal_bounds=DEFAULT_ARENA,
        )
        return IcpPolicy(icp_cfg, modules)
    if cfg.method == "offcp":
        if offcp is None:
            raise ValueError("offcp method needs precalibrated radii")
        return OffcpPolicy(offcp.radii, predictor, mpc_cfg, cfg.t_obs, cfg.t_exec)
    if cfg.method in ("acp_a", "acp_w"):
        variant = AcpVariant.AVERAGE if cfg.method == "acp_a" else AcpVariant.WORST_CASE
        state = AcpState.initial(
            variant,
            t_pred=cfg.t_pred,
            alpha_target=cfg.alpha,
            learning_rate=cfg.acp_learning_rate,
            window_size=cfg.acp_window,
        )
        return AcpPolicy(state, predictor, mpc_cfg, cfg.t_obs, cfg.t_exec)
    return OrcaPolicy(cfg.sim_params())


def calibrate_offline(cfg: RunConfig) -> OffcpRadii:
    """Robot-free calibration on scenarios disjoint from the evaluation set."""
    calib = generate_scenarios(
        cfg.n_humans,
        cfg.offcp_episodes,
        seed=cfg.seed + _OFFCP_SCENARIO_SEED_OFFSET,
        geometry=cfg.geometry,
    )

    def scenario_gen(e: int) -> WorldState:
        return calib[e].to_world(cfg.dt, r_r=cfg.r_r, r_h=cfg.r_h)

    rollout = RolloutConfig(
        episodes=1,
        t_obs=cfg.t_obs,
        t_pred=cfg.t_pred,
        goal_noise_prob=cfg.goal_noise_prob,
        goal_noise_mag=cfg.goal_noise_mag,
        goal_bounds=DEFAULT_ARENA,
        include_robot=False,
    )
    return offcp_calibrate(
        scenario_gen,
        cfg.sim_params(),
        rollout,
        cfg.predictor(),
        episodes=cfg.offcp_episodes,
        alpha=cfg.alpha,
        seed=cfg.seed,
        quantile_rule=cfg.quantile_rule,
    )


def _run_case(args: tuple[RunConfig, Scenario, int, OffcpRadii | None]) -> CaseResult:
    cfg, scenario, case_index, offcp = args
    try:
        policy = _build_policy(cfg, case_index, offcp)
        log = run_episode(
            scenario,
            policy,
            cfg.sim_params(),
            t_pred=cfg.t_pred,
            r_r=cfg.r_r,
            r_h=cfg.r_h,
            max_steps=cfg.max_steps,
        )
        metrics = episode_metrics(log.record, t_pred=cfg.t_pred, r_r=cfg.r_r, r_h=cfg.r_h)
        return CaseResult(case_index=case_index, log=log, metrics=metrics, error=None)
    except Exception as exc:
        detail = traceback.format_exception_only(type(exc), exc)[-1].strip()
        return CaseResult(case_index=case_index, log=None, metrics=None, error=detail)


def resolve_workers(cfg_workers: int, cases: int, override: int | None = None) -> int:
    """Explicit override beats the environment, which beats the config."""
    if override is not None:
        workers = override
    else:
        env = os.environ.get(WORKERS_ENV_VAR)
        workers = int(env) if env else cfg_workers
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return min(workers, cases)


def _summarize(cfg: RunConfig, results: tuple[CaseResult, ...]) -> SuiteSummary:
    scored = [r.metrics for r in results if r.metrics is not None]
    successes = sum(1 for m in scored if m.success)
    if not scored:
        return SuiteSummary(
            case_count=len(results),
            success_rate=0.0,
            nt=None,
            pl=None,
            itr=None,
            sd=None,
            cr=None,
        )
    summary = aggregate(scored)
    # Crashed cases count against the success rate even though they carry
    # no metrics to pool.
    return dataclasses.replace(
        summary, case_count=len(results), success_rate=successes / len(results)
    )


def run_suite(cfg: RunConfig, workers: int | None = None) -> SuiteResult:
    """Run every case, aggregate, and (when configured) write artifacts."""
    scenarios = generate_scenarios(cfg.n_humans, cfg.cases, cfg.seed, cfg.geometry)
    offcp = calibrate_offline(cfg) if cfg.method == "offcp" else None

    n_workers = resolve_workers(cfg.workers, cfg.cases, workers)
    jobs = [(cfg, scenarios[i], i, offcp) for i in range(cfg.cases)]
    if n_workers == 1:
        results = tuple(_run_case(job) for job in jobs)
    else:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx) as pool:
            results = tuple(pool.map(_run_case, jobs))
    results = tuple(sorted(results, key=lambda r: r.case_index))

    summary = _summarize(cfg, results)
    suite = SuiteResult(
        config=cfg, scenarios=scenarios, results=results, summary=summary, offcp=offcp
    )
    if cfg.out_dir is not None:
        write_artifacts(Path(cfg.out_dir), suite)
    return suite


def write_artifacts(out_dir: Path, suite: SuiteResult) -> dict[str, Path]:
    """Replays, the per-episode table, and the summary row."""
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = suite.config
    paths: dict[str, Path] = {}
    for result in suite.results:
        if result.log is None:
            continue
        path = out_dir / f"replay_case{result.case_index:04d}.jsonl"
        meta = ReplayMeta(
            method=cfg.method,
            case_index=result.case_index,
            seed=cfg.seed,
            t_pred=cfg.t_pred,
            r_r=cfg.r_r,
            r_h=cfg.r_h,
        )
        write_replay(path, meta, result.log)
        paths[path.name] = path

    episodes_path = out_dir / "episodes.csv"
    write_episodes_csv(
        episodes_path,
        [(r.case_index, r.metrics, r.error) for r in suite.results],
    )
    paths["episodes.csv"] = episodes_path

    summary_path = out_dir / "summary.csv"
    write_summary_csv(
        summary_path, cfg.method, cfg.ni, cfg.cs, cfg.exec_scheme, suite.summary
    )
    paths["summary.csv"] = summary_path

    if suite.offcp is not None:
        radii_path = out_dir / "radii.json"
        save_radii(radii_path, suite.offcp)
        paths["radii.json"] = radii_path
    return paths
