"""Per-cycle navigation controllers sharing one runner interface.

Every policy maps (current world, past worlds, goal) to a short block of
velocity commands plus a trace of what it believed when planning them.  The
iterative method wraps the full calibrate-replan loop; the offline and
online-adaptive variants plan once per cycle against fixed or adapted radii;
the reactive baseline emits a single avoidance step with no prediction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from . import mpc as _mpc
from .baselines import AcpState, acp_update, coverage_indicators, orca_robot_policy
from .conformal import ConformalRadii
from .geometry import HorizonPrediction, Vec2, WorldState
from .icp import IcpConfig, IcpModules, icp_step
from .mpc import MpcConfig, PlanStatus, RobotPlan
from .orca import OrcaParams
from .prediction import TrajectoryPredictor, window_from_worlds

__all__ = [
    "CycleInfo",
    "Policy",
    "IcpPolicy",
    "OffcpPolicy",
    "AcpPolicy",
    "OrcaPolicy",
]


@dataclass(frozen=True)
class CycleInfo:
    """What one planning cycle saw and decided."""

    prediction: HorizonPrediction | None
    radii: ConformalRadii | None
    plan: RobotPlan | None
    wall_time_s: float
    alpha: float | None = None

    def __post_init__(self) -> None:
        if (self.prediction is None) != (self.radii is None):
            raise ValueError("prediction and radii must be logged together")


class Policy(Protocol):
    def plan_cycle(
        self, world: WorldState, history: Sequence[WorldState], goal: Vec2
    ) -> tuple[np.ndarray, CycleInfo]: ...


class IcpPolicy:
    """The iterative calibrate-replan controller."""

    def __init__(self, cfg: IcpConfig, modules: IcpModules) -> None:
        self._cfg = cfg
        self._modules = modules

    def plan_cycle(
        self, world: WorldState, history: Sequence[WorldState], goal: Vec2
    ) -> tuple[np.ndarray, CycleInfo]:
        actions, diag = icp_step(world, history, goal, self._cfg, self._modules)
        # The step already consumed the prediction; recompute it for the
        # trace.  Predictors are pure functions of the window, so this is
        # the same array the loop calibrated against.
        window = window_from_worlds((*history, world), self._modules.t_obs)
        prediction = self._modules.predictor.predict(window, self._modules.mpc_cfg.t_pred)
        info = CycleInfo(
            prediction=prediction,
            radii=diag.radii[-1],
            plan=diag.executed_plan,
            wall_time_s=diag.wall_time_s,
        )
        return actions, info


class _SingleSolvePolicy:
    """Shared plan-once-per-cycle skeleton for the conformal baselines."""

    def __init__(
        self,
        predictor: TrajectoryPredictor,
        mpc_cfg: MpcConfig,
        t_obs: int,
        t_exec: int,
    ) -> None:
        if t_exec < 1 or t_exec > mpc_cfg.t_mpc:
            raise ValueError(f"t_exec must be in [1, {mpc_cfg.t_mpc}], got {t_exec}")
        self._predictor = predictor
        self._mpc_cfg = mpc_cfg
        self._t_obs = t_obs
        self._t_exec = t_exec

    def _radii_for_cycle(self, world: WorldState, history: Sequence[WorldState]) -> ConformalRadii:
        raise NotImplementedError

    def _alpha(self) -> float | None:
        return None

    def plan_cycle(
        self, world: WorldState, history: Sequence[WorldState], goal: Vec2
    ) -> tuple[np.ndarray, CycleInfo]:
        start = time.perf_counter()
        radii = self._radii_for_cycle(world, history)
        window = window_from_worlds((*history, world), self._t_obs)
        prediction = self._predictor.predict(window, self._mpc_cfg.t_pred)
        plan = _mpc.plan(world, goal, prediction, radii, None, self._mpc_cfg)
        if plan.status is not PlanStatus.FEASIBLE:
            # No feasibility recourse here: hold still for one cycle and
            # replan from the new state.
            plan = _mpc.stationary_plan(world.robot.position, goal, self._mpc_cfg)
        actions = plan.velocities[: self._t_exec].copy()
        info = CycleInfo(
            prediction=prediction,
            radii=radii,
            plan=plan,
            wall_time_s=time.perf_counter() - start,
            alpha=self._alpha(),
        )
        return actions, info


class OffcpPolicy(_SingleSolvePolicy):
    """Plans against radii calibrated once, before deployment."""

    def __init__(
        self,
        radii: ConformalRadii,
        predictor: TrajectoryPredictor,
        mpc_cfg: MpcConfig,
        t_obs: int,
        t_exec: int,
    ) -> None:
        super().__init__(predictor, mpc_cfg, t_obs, t_exec)
        if radii.t_pred != mpc_cfg.t_pred:
            raise ValueError(
                f"calibrated radii span {radii.t_pred} steps, planner predicts {mpc_cfg.t_pred}"
            )
        self._radii = radii

    def _radii_for_cycle(self, world: WorldState, history: Sequence[WorldState]) -> ConformalRadii:
        return self._radii


class AcpPolicy(_SingleSolvePolicy):
    """Adapts its miscoverage level online from resolved prediction errors.

    Each cycle first settles every past prediction whose full horizon has
    now been observed, feeding the coverage outcome to the adaptive update,
    then plans with the refreshed radii.
    """

    def __init__(
        self,
        state: AcpState,
        predictor: TrajectoryPredictor,
        mpc_cfg: MpcConfig,
        t_obs: int,
        t_exec: int,
    ) -> None:
        super().__init__(predictor, mpc_cfg, t_obs, t_exec)
        if state.t_pred != mpc_cfg.t_pred:
            raise ValueError(
                f"adaptive state spans {state.t_pred} steps, planner predicts {mpc_cfg.t_pred}"
            )
        self._state = state
        self._pending: list[tuple[int, HorizonPrediction, ConformalRadii]] = []

    @property
    def state(self) -> AcpState:
        return self._state

    def _resolve_matured(self, world: WorldState, history: Sequence[WorldState]) -> None:
        t_pred = self._mpc_cfg.t_pred
        now = world.time_step
        by_step = {w.time_step: w for w in history}
        by_step[world.time_step] = world
        still_pending = []
        for issued_at, prediction, radii in self._pending:
            if issued_at + t_pred > now:
                still_pending.append((issued_at, prediction, radii))
                continue
            realized = np.stack(
                [by_step[issued_at + tau].human_positions() for tau in range(1, t_pred + 1)],
                axis=1,
            )  # (N, t_pred, 2)
            diff = prediction.positions - realized
            errors = np.hypot(diff[..., 0], diff[..., 1])
            if errors.shape[0] == 0:
                continue
            covered = coverage_indicators(errors, radii)
            self._state = acp_update(self._state, covered, errors)
        self._pending = still_pending

    def _radii_for_cycle(self, world: WorldState, history: Sequence[WorldState]) -> ConformalRadii:
        self._resolve_matured(world, history)
        return self._state.radii

    def _alpha(self) -> float | None:
        return self._state.alpha_t

    def plan_cycle(
        self, world: WorldState, history: Sequence[WorldState], goal: Vec2
    ) -> tuple[np.ndarray, CycleInfo]:
        actions, info = super().plan_cycle(world, history, goal)
        assert info.prediction is not None and info.radii is not None
        self._pending.append((world.time_step, info.prediction, info.radii))
        return actions, info


class OrcaPolicy:
    """Reactive avoidance with no prediction; one step per cycle."""

    def __init__(self, params: OrcaParams) -> None:
        self._params = params

    def plan_cycle(
        self, world: WorldState, history: Sequence[WorldState], goal: Vec2
    ) -> tuple[np.ndarray, CycleInfo]:
        start = time.perf_counter()
        v = orca_robot_policy(world, goal, self._params)
        actions = np.array([[v.x, v.y]], dtype=float)
        info = CycleInfo(
            prediction=None, radii=None, plan=None, wall_time_s=time.perf_counter() - start
        )
        return actions, info
