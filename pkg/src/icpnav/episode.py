"""Closed-loop episode execution.

The runner alternates policy cycles with simulator steps: the policy emits a
block of velocity commands, each command advances the crowd simulator one
control step with the robot's motion overridden, and the episode ends on
goal arrival, on contact, or on timeout.  Everything observed along the way
is kept so metrics and replays can be produced afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import orca as _orca
from .geometry import Vec2, WorldState
from .metrics import EpisodeRecord, Outcome
from .orca import OrcaParams
from .policies import Policy
from .scenarios import Scenario

__all__ = ["EpisodeLog", "run_episode", "MAX_EPISODE_STEPS"]

MAX_EPISODE_STEPS = 400


@dataclass(frozen=True)
class EpisodeLog:
    """An episode record plus the per-cycle extras a replay preserves."""

    record: EpisodeRecord
    plan_positions: tuple[np.ndarray, ...]
    alphas: tuple[float, ...] | None

    def __post_init__(self) -> None:
        if len(self.plan_positions) != len(self.record.prediction_steps):
            raise ValueError("one planned path per planning cycle")
        if self.alphas is not None and len(self.alphas) != len(self.record.prediction_steps):
            raise ValueError("one alpha per planning cycle")


def _separation(world: WorldState) -> float:
    if not world.humans:
        return math.inf
    r = world.robot.position
    return min(math.hypot(h.position.x - r.x, h.position.y - r.y) for h in world.humans)


def run_episode(
    scenario: Scenario,
    policy: Policy,
    sim_params: OrcaParams,
    t_pred: int,
    r_r: float = 0.4,
    r_h: float = 0.4,
    max_steps: int = MAX_EPISODE_STEPS,
) -> EpisodeLog:
    """Drive ``policy`` through ``scenario`` until it ends.

    Success means the robot's center comes within its own radius of the
    goal; contact closer than the summed radii is a collision; otherwise
    the episode times out after ``max_steps`` simulator steps.
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    goal = scenario.robot_goal
    world = scenario.to_world(sim_params.dt, r_r=r_r, r_h=r_h)
    worlds: list[WorldState] = [world]

    prediction_steps: list[int] = []
    predictions = []
    radii_in_force = []
    cycle_wall_times: list[float] = []
    plan_positions: list[np.ndarray] = []
    alphas: list[float] = []
    saw_alpha = False

    outcome: Outcome | None = None
    while outcome is None:
        actions, info = policy.plan_cycle(world, tuple(worlds[:-1]), goal)
        actions = np.asarray(actions, dtype=float)
        if actions.ndim != 2 or actions.shape[1] != 2 or actions.shape[0] < 1:
            raise ValueError(f"policy must return a (k, 2) action block, got {actions.shape}")
        if info.prediction is not None:
            assert info.radii is not None
            prediction_steps.append(world.time_step)
            predictions.append(info.prediction)
            radii_in_force.append(info.radii)
            cycle_wall_times.append(info.wall_time_s)
            plan_positions.append(
                np.zeros((0, 2)) if info.plan is None else info.plan.positions.copy()
            )
            if info.alpha is not None:
                saw_alpha = True
                alphas.append(info.alpha)

        for action in actions:
            world = _orca.step(world, sim_params, robot_override=Vec2(action[0], action[1]))
            worlds.append(world)
            if _separation(world) < r_r + r_h:
                outcome = Outcome.COLLISION
                break
            rx = world.robot.position.x - goal.x
            ry = world.robot.position.y - goal.y
            if math.hypot(rx, ry) <= r_r:
                outcome = Outcome.SUCCESS
                break
            if world.time_step >= max_steps:
                outcome = Outcome.TIMEOUT
                break

    robot = np.array([[w.robot.position.x, w.robot.position.y] for w in worlds], dtype=float)
    n_humans = len(scenario.human_starts)
    humans = np.stack([w.human_positions() for w in worlds], axis=1) if n_humans else np.zeros(
        (0, len(worlds), 2)
    )
    record = EpisodeRecord(
        robot=robot,
        humans=humans,
        dt=sim_params.dt,
        outcome=outcome,
        prediction_steps=tuple(prediction_steps),
        predictions=tuple(predictions),
        radii_in_force=tuple(radii_in_force),
        cycle_wall_times=tuple(cycle_wall_times),
    )
    if saw_alpha and len(alphas) != len(prediction_steps):
        raise RuntimeError("policy reported alpha on some cycles but not all")
    return EpisodeLog(
        record=record,
        plan_positions=tuple(plan_positions),
        alphas=tuple(alphas) if saw_alpha else None,
    )
