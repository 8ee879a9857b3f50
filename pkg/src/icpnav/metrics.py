"""Episode scoring: navigation, social-awareness, and coverage metrics.

Intrusion compares the robot's current position against human ground-truth
positions up to the prediction horizon ahead; coverage multiplies the
per-step hit indicators over the whole horizon for every (planning step,
human) pair, using the strict inequality of the published coverage-rate
definition.  Social distance is reported as absent when an episode has no
intrusion steps, and coverage as absent when no prediction has a complete
ground-truth horizon to compare against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .conformal import ConformalRadii
from .geometry import HorizonPrediction

__all__ = [
    "EpisodeMetrics",
    "EpisodeRecord",
    "MetricStat",
    "Outcome",
    "SuiteSummary",
    "aggregate",
    "episode_metrics",
    "summarize_records",
]


class Outcome(enum.Enum):
    SUCCESS = "Success"
    COLLISION = "Collision"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class EpisodeRecord:
    """Everything one episode produced, time-aligned on simulation steps.

    ``robot`` holds S+1 positions for an S-step episode; ``humans`` holds the
    matching ground truth.  Planning cycles are sparse under multi-step
    execution, so each issued prediction carries the step index it was made
    at together with the radii in force for it.
    """

    robot: np.ndarray  # (S + 1, 2)
    humans: np.ndarray  # (N, S + 1, 2)
    dt: float
    outcome: Outcome
    prediction_steps: tuple[int, ...]
    predictions: tuple[HorizonPrediction, ...]
    radii_in_force: tuple[ConformalRadii, ...]
    cycle_wall_times: tuple[float, ...]

    def __post_init__(self) -> None:
        robot = np.asarray(self.robot, dtype=float)
        humans = np.asarray(self.humans, dtype=float)
        if robot.ndim != 2 or robot.shape[1] != 2 or robot.shape[0] < 1:
            raise ValueError(f"robot trajectory must be (S+1, 2), got {robot.shape}")
        if humans.ndim != 3 or humans.shape[2] != 2:
            raise ValueError(f"human trajectories must be (N, S+1, 2), got {humans.shape}")
        if humans.shape[0] > 0 and humans.shape[1] != robot.shape[0]:
            raise ValueError("human and robot trajectories must be time-aligned")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (
            len(self.prediction_steps)
            == len(self.predictions)
            == len(self.radii_in_force)
            == len(self.cycle_wall_times)
        ):
            raise ValueError("per-cycle sequences must align")
        last = -1
        for step in self.prediction_steps:
            if not 0 <= step < robot.shape[0]:
                raise ValueError(f"prediction step {step} outside episode")
            if step <= last:
                raise ValueError("prediction steps must be strictly increasing")
            last = step
        for pred in self.predictions:
            if humans.shape[0] > 0 and pred.n_humans != humans.shape[0]:
                raise ValueError("prediction human count does not match the episode")
        object.__setattr__(self, "robot", robot)
        object.__setattr__(self, "humans", humans)

    @property
    def steps(self) -> int:
        return int(self.robot.shape[0]) - 1

    @property
    def n_humans(self) -> int:
        return int(self.humans.shape[0])


@dataclass(frozen=True)
class EpisodeMetrics:
    """Scalar metrics of one episode; None marks an undefined value."""

    outcome: Outcome
    nt: float
    pl: float
    itr: float
    sd: float | None
    cr: float | None

    @property
    def success(self) -> bool:
        return self.outcome is Outcome.SUCCESS


def _intrusion_distances(rec: EpisodeRecord, t_pred: int) -> list[float]:
    """Per executed step, the closest robot-to-future-human distance.

    Step t looks at human ground truth up to t_pred steps ahead, clipped at
    the episode end; entries are math.inf when no human step is in range.
    """
    out: list[float] = []
    steps = rec.steps
    for t in range(steps):
        hi = min(t + t_pred, steps)
        if rec.n_humans == 0 or hi <= t:
            out.append(math.inf)
            continue
        future = rec.humans[:, t + 1 : hi + 1, :]  # (N, <=t_pred, 2)
        d = np.linalg.norm(future - rec.robot[t][None, None, :], axis=2)
        out.append(float(np.min(d)))
    return out


def episode_metrics(rec: EpisodeRecord, t_pred: int, r_r: float, r_h: float) -> EpisodeMetrics:
    """Score one episode; social distance and coverage may be absent."""
    if t_pred < 1:
        raise ValueError(f"t_pred must be >= 1, got {t_pred}")
    if rec.steps < 1:
        raise ValueError("episode must contain at least one executed step")
    threshold = r_r + r_h

    pl = float(np.sum(np.linalg.norm(np.diff(rec.robot, axis=0), axis=1)))
    nt = rec.steps * rec.dt

    closest = _intrusion_distances(rec, t_pred)
    intruding = [d for d in closest if d < threshold]
    itr = len(intruding) / rec.steps
    sd = float(np.mean(intruding)) if intruding else None

    hits: list[float] = []
    for step, pred, radii in zip(rec.prediction_steps, rec.predictions, rec.radii_in_force):
        horizon = min(pred.horizon, radii.t_pred)
        if horizon < t_pred or step + t_pred > rec.steps or rec.n_humans == 0:
            continue  # no complete ground-truth horizon to compare against
        truth = rec.humans[:, step + 1 : step + t_pred + 1, :]  # (N, t_pred, 2)
        err = np.linalg.norm(pred.positions[:, :t_pred, :] - truth, axis=2)
        covered = np.all(err < radii.radii[None, :t_pred], axis=1)  # strict, as published
        hits.extend(float(c) for c in covered)
    cr = float(np.mean(hits)) if hits else None

    return EpisodeMetrics(outcome=rec.outcome, nt=nt, pl=pl, itr=itr, sd=sd, cr=cr)


@dataclass(frozen=True)
class MetricStat:
    """Population mean and standard deviation over a metric's defined pool."""

    mean: float
    std: float
    count: int


@dataclass(frozen=True)
class SuiteSummary:
    case_count: int
    success_rate: float
    nt: MetricStat | None
    pl: MetricStat | None
    itr: MetricStat | None
    sd: MetricStat | None
    cr: MetricStat | None


def _stat(values: list[float]) -> MetricStat | None:
    if not values:
        return None
    arr = np.asarray(values, dtype=float)
    return MetricStat(mean=float(arr.mean()), std=float(arr.std()), count=len(values))


def aggregate(metrics: list[EpisodeMetrics] | tuple[EpisodeMetrics, ...]) -> SuiteSummary:
    """Pool per-episode metrics: success rate over all cases, the rest over
    successful cases only, with absent values excluded metric by metric."""
    if not metrics:
        raise ValueError("cannot aggregate an empty suite")
    successes = [m for m in metrics if m.success]
    return SuiteSummary(
        case_count=len(metrics),
        success_rate=len(successes) / len(metrics),
        nt=_stat([m.nt for m in successes]),
        pl=_stat([m.pl for m in successes]),
        itr=_stat([m.itr for m in successes]),
        sd=_stat([m.sd for m in successes if m.sd is not None]),
        cr=_stat([m.cr for m in successes if m.cr is not None]),
    )


def summarize_records(
    records: list[EpisodeRecord] | tuple[EpisodeRecord, ...],
    t_pred: int,
    r_r: float,
    r_h: float,
) -> SuiteSummary:
    """Score every record and aggregate in one call."""
    return aggregate([episode_metrics(rec, t_pred, r_r, r_h) for rec in records])
