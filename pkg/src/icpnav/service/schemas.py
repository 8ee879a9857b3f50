"""Request and response bodies of the HTTP service.

``RunRequest`` mirrors the flat run configuration one to one (with the
CLI-facing names ``humans`` and ``out``), so a config file, a command line,
and a POST body all describe the same object.
"""

from __future__ import annotations

from pydantic import BaseModel

from ..metrics import EpisodeMetrics, SuiteSummary
from ..suite import CaseResult, RunConfig

__all__ = [
    "HealthResponse",
    "RunRequest",
    "MetricStatModel",
    "SummaryModel",
    "EpisodeRowModel",
    "RunResponse",
    "ReplayRequest",
    "MetricsModel",
    "OffcpRequest",
    "OffcpResponse",
    "ScenariosRequest",
    "ScenarioModel",
    "ScenariosResponse",
]


class HealthResponse(BaseModel):
    status: str
    version: str


class RunRequest(BaseModel):
    method: str = "icp"
    humans: int = 10
    cases: int = 100
    seed: int = 0
    workers: int = 8
    out: str | None = None
    geometry: str = "circle"
    max_steps: int = 400
    dt: float = 0.25
    v_max: float = 1.0
    r_r: float = 0.4
    r_h: float = 0.4
    t_obs: int = 5
    t_pred: int = 5
    t_mpc: int = 10
    omega_g: float = 1.0
    omega_v: float = 5.0
    omega_reg: float = 0.5
    scp_tol: float = 1e-4
    scp_max_iter: int = 20
    neighbor_dist: float = 10.0
    max_neighbors: int = 10
    time_horizon: float = 5.0
    goal_noise_prob: float = 0.1
    goal_noise_mag: float = 0.5
    ni: int = 3
    cs: int = 2
    alpha: float = 0.05
    exec_scheme: str = "PSE"
    tol_plan: float = 0.01
    tol_radii: float = 0.01
    quantile_rule: str = "finite_sample"
    offcp_episodes: int = 8
    acp_window: int = 30
    acp_learning_rate: float | None = None
    # Set only by an explicit --workers flag; beats the environment variable.
    workers_override: int | None = None

    def to_config(self) -> RunConfig:
        data = self.model_dump(exclude={"workers_override"})
        data["n_humans"] = data.pop("humans")
        data["out_dir"] = data.pop("out")
        return RunConfig(**data)

    @classmethod
    def from_config(cls, cfg: RunConfig, workers_override: int | None = None) -> "RunRequest":
        return cls(
            method=cfg.method,
            humans=cfg.n_humans,
            cases=cfg.cases,
            seed=cfg.seed,
            workers=cfg.workers,
            out=cfg.out_dir,
            geometry=cfg.geometry,
            max_steps=cfg.max_steps,
            dt=cfg.dt,
            v_max=cfg.v_max,
            r_r=cfg.r_r,
            r_h=cfg.r_h,
            t_obs=cfg.t_obs,
            t_pred=cfg.t_pred,
            t_mpc=cfg.t_mpc,
            omega_g=cfg.omega_g,
            omega_v=cfg.omega_v,
            omega_reg=cfg.omega_reg,
            scp_tol=cfg.scp_tol,
            scp_max_iter=cfg.scp_max_iter,
            neighbor_dist=cfg.neighbor_dist,
            max_neighbors=cfg.max_neighbors,
            time_horizon=cfg.time_horizon,
            goal_noise_prob=cfg.goal_noise_prob,
            goal_noise_mag=cfg.goal_noise_mag,
            ni=cfg.ni,
            cs=cfg.cs,
            alpha=cfg.alpha,
            exec_scheme=cfg.exec_scheme,
            tol_plan=cfg.tol_plan,
            tol_radii=cfg.tol_radii,
            quantile_rule=cfg.quantile_rule,
            offcp_episodes=cfg.offcp_episodes,
            acp_window=cfg.acp_window,
            acp_learning_rate=cfg.acp_learning_rate,
            workers_override=workers_override,
        )


class MetricStatModel(BaseModel):
    mean: float
    std: float
    count: int


class SummaryModel(BaseModel):
    case_count: int
    success_rate: float
    nt: MetricStatModel | None
    pl: MetricStatModel | None
    itr: MetricStatModel | None
    sd: MetricStatModel | None
    cr: MetricStatModel | None

    @classmethod
    def from_summary(cls, s: SuiteSummary) -> "SummaryModel":
        def stat(x) -> MetricStatModel | None:
            return None if x is None else MetricStatModel(mean=x.mean, std=x.std, count=x.count)

        return cls(
            case_count=s.case_count,
            success_rate=s.success_rate,
            nt=stat(s.nt),
            pl=stat(s.pl),
            itr=stat(s.itr),
            sd=stat(s.sd),
            cr=stat(s.cr),
        )


class EpisodeRowModel(BaseModel):
    case: int
    outcome: str
    nt: float | None = None
    pl: float | None = None
    itr: float | None = None
    sd: float | None = None
    cr: float | None = None
    error: str | None = None

    @classmethod
    def from_result(cls, r: CaseResult) -> "EpisodeRowModel":
        if r.metrics is None:
            return cls(case=r.case_index, outcome="Error", error=r.error)
        m = r.metrics
        return cls(
            case=r.case_index,
            outcome=m.outcome.value,
            nt=m.nt,
            pl=m.pl,
            itr=m.itr,
            sd=m.sd,
            cr=m.cr,
        )


class RunResponse(BaseModel):
    summary: SummaryModel
    episodes: list[EpisodeRowModel]
    out: str | None


class ReplayRequest(BaseModel):
    """Either a path the service can read or the replay text itself."""

    path: str | None = None
    content: str | None = None


class MetricsModel(BaseModel):
    outcome: str
    nt: float
    pl: float
    itr: float
    sd: float | None
    cr: float | None

    @classmethod
    def from_metrics(cls, m: EpisodeMetrics) -> "MetricsModel":
        return cls(outcome=m.outcome.value, nt=m.nt, pl=m.pl, itr=m.itr, sd=m.sd, cr=m.cr)


class OffcpRequest(BaseModel):
    config: RunRequest = RunRequest()
    out: str | None = None


class OffcpResponse(BaseModel):
    radii: list[float]
    alpha: float
    sample_count: int
    quantile_rule: str
    episodes: int
    out: str | None


class ScenariosRequest(BaseModel):
    humans: int = 10
    count: int = 1
    seed: int = 0
    geometry: str = "circle"


class ScenarioModel(BaseModel):
    robot_start: tuple[float, float]
    robot_goal: tuple[float, float]
    human_starts: list[tuple[float, float]]
    human_goals: list[tuple[float, float]]
    arena: tuple[float, float, float, float]
    seed: int


class ScenariosResponse(BaseModel):
    scenarios: list[ScenarioModel]
