"""Alternating calibration and replanning: the interaction-aware control loop.

Each planning cycle starts from a zero-radius plan, then repeatedly
(1) simulates calibration episodes in which the crowd reacts to the robot
executing the current plan, (2) recalibrates per-step uncertainty radii from
the prediction errors observed in those episodes, and (3) replans against
the inflated discs with a proximal pull toward the previous plan.  The loop
stops early once consecutive plans and radii settle within tolerance, and
the first ``t_exec`` actions of the final usable plan are executed.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import mpc as _mpc
from . import orca as _orca
from .conformal import (
    QUANTILE_RULES,
    ConformalRadii,
    conformal_radii,
    min_sample_count,
    score_dataset,
)
from .geometry import Trajectory, Vec2, WorldState
from .mpc import MpcConfig, PlanStatus, RobotPlan, stationary_plan
from .orca import OrcaParams, RolloutConfig
from .prediction import TrajectoryPredictor, window_from_worlds

__all__ = [
    "ExecScheme",
    "IcpConfig",
    "IcpModules",
    "IcpStepDiagnostics",
    "converged",
    "icp_step",
]


class ExecScheme(enum.Enum):
    """How much of each plan is executed before replanning."""

    PSE = "PSE"  # execute the full prediction horizon
    SSE = "SSE"  # execute a single action


@dataclass(frozen=True)
class IcpConfig:
    """Loop controls for the alternating calibration/replanning cycle.

    ``seed`` scopes every simulated rollout of this control loop; the
    harness assigns one per episode so cycles at different time steps and
    iteration indices draw distinct, reproducible streams.  Negative
    tolerances never compare as converged, which forces the full ``k_max``
    rounds.
    """

    k_max: int = 3
    cs: int = 2
    alpha: float = 0.05
    exec_scheme: ExecScheme = ExecScheme.PSE
    t_exec: int = 5
    tol_plan: float = 0.01
    tol_radii: float = 0.01
    seed: int = 0
    quantile_rule: str = "finite_sample"

    def __post_init__(self) -> None:
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if self.cs < 1:
            raise ValueError(f"cs must be >= 1, got {self.cs}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.t_exec < 1:
            raise ValueError(f"t_exec must be >= 1, got {self.t_exec}")
        if self.exec_scheme is ExecScheme.SSE and self.t_exec != 1:
            raise ValueError(f"SSE executes exactly one action per cycle, got t_exec={self.t_exec}")
        if not (math.isfinite(self.tol_plan) and math.isfinite(self.tol_radii)):
            raise ValueError("convergence tolerances must be finite")
        if self.quantile_rule not in QUANTILE_RULES:
            raise ValueError(
                f"unknown quantile rule {self.quantile_rule!r}, expected {QUANTILE_RULES}"
            )


PlanFn = Callable[..., RobotPlan]
CalibrateFn = Callable[..., "_orca.CalibrationDataset"]


@dataclass(frozen=True)
class IcpModules:
    """The pluggable pieces one control loop coordinates.

    ``planner`` and ``calibrator`` default to the real implementations and
    exist so tests can substitute deterministic stand-ins.
    """

    predictor: TrajectoryPredictor
    sim_params: OrcaParams
    mpc_cfg: MpcConfig
    t_obs: int = 5
    rollout_pad: int = 0
    goal_noise_prob: float = 0.1
    goal_noise_mag: float = 0.5
    goal_bounds: tuple[float, float, float, float] | None = None
    planner: PlanFn = _mpc.plan
    calibrator: CalibrateFn = _orca.rollout_calibration

    def __post_init__(self) -> None:
        if self.t_obs < 1:
            raise ValueError(f"t_obs must be >= 1, got {self.t_obs}")
        if self.rollout_pad < 0:
            raise ValueError(f"rollout_pad must be non-negative, got {self.rollout_pad}")
        if abs(self.sim_params.dt - self.mpc_cfg.dt) > 1e-12:
            raise ValueError(
                f"simulator dt {self.sim_params.dt} does not match planner dt {self.mpc_cfg.dt}"
            )


@dataclass(frozen=True)
class IcpStepDiagnostics:
    """Trace of one planning cycle.

    ``plans`` and ``radii`` hold iterations 0..k in order, so their length is
    at most ``k_max + 1``; iteration 0 always carries all-zero radii.
    """

    plans: tuple[RobotPlan, ...]
    radii: tuple[ConformalRadii, ...]
    feasible: tuple[bool, ...]
    sample_counts: tuple[int, ...]
    rule_fallbacks: tuple[int, ...]
    converged: bool
    zero_velocity: bool
    executed_plan: RobotPlan
    wall_time_s: float

    def __post_init__(self) -> None:
        if not (len(self.plans) == len(self.radii) == len(self.feasible)):
            raise ValueError("plans, radii, and feasibility flags must align")
        if len(self.sample_counts) != len(self.plans) - 1:
            raise ValueError("one calibration round per iteration after the zero-radius plan")


def converged(
    plan_a: RobotPlan,
    plan_b: RobotPlan,
    radii_a: ConformalRadii,
    radii_b: ConformalRadii,
    tol_plan: float,
    tol_radii: float,
) -> bool:
    """Non-strict settlement test on consecutive plans and radii."""
    if plan_a.positions.shape != plan_b.positions.shape:
        raise ValueError("plans must span the same horizon")
    if radii_a.t_pred != radii_b.t_pred:
        raise ValueError("radii must span the same horizon")
    plan_diff = float(np.max(np.linalg.norm(plan_a.positions - plan_b.positions, axis=1)))
    radii_diff = float(np.max(np.abs(radii_a.radii - radii_b.radii)))
    return plan_diff <= tol_plan and radii_diff <= tol_radii


def _padded_recent(
    history: Sequence[WorldState], world: WorldState, count: int
) -> tuple[WorldState, ...]:
    seq = (*history, world)
    if len(seq) >= count:
        return tuple(seq[-count:])
    return (seq[0],) * (count - len(seq)) + tuple(seq)


def _conditioning_trajectory(
    history: Sequence[WorldState], world: WorldState, conditioning: RobotPlan, t_obs: int
) -> tuple[WorldState, Trajectory]:
    """Robot path for calibration rollouts: replayed recent past plus the plan.

    The rollout starts ``t_obs`` steps in the past so the simulated
    observation window lines up with what the predictor sees at execution
    time, and the plan then covers exactly the prediction-horizon part of
    each sample.  At episode start the missing past is a held position.
    """
    seq = _padded_recent(history, world, t_obs + 1)
    past = np.array([[w.robot.position.x, w.robot.position.y] for w in seq])
    positions = np.vstack([past, conditioning.positions[1:]])
    return seq[0], Trajectory(start_step=seq[0].time_step, positions=positions, dt=world.dt)


def icp_step(
    world: WorldState,
    history: Sequence[WorldState],
    goal: Vec2,
    cfg: IcpConfig,
    modules: IcpModules,
) -> tuple[np.ndarray, IcpStepDiagnostics]:
    """Run one planning cycle and return (executed actions, trace).

    ``history`` holds the states strictly before ``world``, most recent
    last; short histories are padded by repeating the earliest state.  The
    returned actions are the first ``cfg.t_exec`` velocities of the last
    feasible plan; when the planner never produced one this cycle the robot
    holds still and the trace is flagged.
    """
    start_time = time.perf_counter()
    mpc_cfg = modules.mpc_cfg
    if cfg.exec_scheme is ExecScheme.PSE and cfg.t_exec != mpc_cfg.t_pred:
        raise ValueError(
            f"PSE executes the prediction horizon: t_exec {cfg.t_exec} != t_pred {mpc_cfg.t_pred}"
        )
    if cfg.t_exec > mpc_cfg.t_mpc:
        raise ValueError(f"cannot execute {cfg.t_exec} actions from a {mpc_cfg.t_mpc}-step plan")

    window = window_from_worlds((*history, world), modules.t_obs)
    predictions = modules.predictor.predict(window, mpc_cfg.t_pred)

    zeros = ConformalRadii.zeros(mpc_cfg.t_pred, cfg.alpha)
    plan0 = modules.planner(world, goal, predictions, zeros, None, mpc_cfg)
    plans: list[RobotPlan] = [plan0]
    radii_seq: list[ConformalRadii] = [zeros]
    sample_counts: list[int] = []
    rule_fallbacks: list[int] = []
    cache = plan0 if plan0.status is PlanStatus.FEASIBLE else None
    converged_flag = False

    if world.n_humans == 0:
        converged_flag = True  # nothing to calibrate against
    else:
        rollout_cfg = RolloutConfig(
            episodes=cfg.cs,
            t_obs=modules.t_obs,
            t_pred=mpc_cfg.t_pred,
            pad=modules.rollout_pad,
            goal_noise_prob=modules.goal_noise_prob,
            goal_noise_mag=modules.goal_noise_mag,
            goal_bounds=modules.goal_bounds,
            include_robot=True,
        )
        for k in range(1, cfg.k_max + 1):
            conditioning = cache if cache is not None else stationary_plan(
                world.robot.position, goal, mpc_cfg
            )
            start_world, robot_traj = _conditioning_trajectory(
                history, world, conditioning, modules.t_obs
            )
            seed = int(
                np.random.SeedSequence((cfg.seed, world.time_step, k)).generate_state(1)[0]
            )
            dataset = modules.calibrator(
                start_world, robot_traj, modules.sim_params, rollout_cfg, seed
            )
            scores = score_dataset(dataset, modules.predictor)
            rule = cfg.quantile_rule
            if scores.n_samples < min_sample_count(cfg.alpha, rule):
                # Too few samples for the requested rule; the empirical rule
                # degrades to the max observed error instead of failing.
                rule = "empirical"
                rule_fallbacks.append(k)
            radii_k = conformal_radii(scores, cfg.alpha, rule)
            sample_counts.append(scores.n_samples)
            prev = plans[-1]
            plan_k = modules.planner(world, goal, predictions, radii_k, prev, mpc_cfg)
            plans.append(plan_k)
            radii_seq.append(radii_k)
            if plan_k.status is PlanStatus.FEASIBLE:
                cache = plan_k
            if converged(prev, plan_k, radii_seq[-2], radii_k, cfg.tol_plan, cfg.tol_radii):
                converged_flag = True
                break

    zero_velocity = False
    if cache is None:
        executed = stationary_plan(world.robot.position, goal, mpc_cfg)
        zero_velocity = True
    elif cache is plans[-1]:
        executed = cache
    else:
        executed = replace(cache, status=PlanStatus.CACHED_FALLBACK)

    actions = executed.velocities[: cfg.t_exec].copy()
    diagnostics = IcpStepDiagnostics(
        plans=tuple(plans),
        radii=tuple(radii_seq),
        feasible=tuple(p.status is PlanStatus.FEASIBLE for p in plans),
        sample_counts=tuple(sample_counts),
        rule_fallbacks=tuple(rule_fallbacks),
        converged=converged_flag,
        zero_velocity=zero_velocity,
        executed_plan=executed,
        wall_time_s=time.perf_counter() - start_time,
    )
    return actions, diagnostics
