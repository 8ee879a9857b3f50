"""Reference policies: fixed offline radii, online alpha adaptation, plain ORCA.

The offline variant calibrates once on robot-free crowd simulations and keeps
those radii for every episode.  The adaptive variants maintain a sliding
window of realized prediction errors and retune the failure probability after
each resolved horizon; they differ only in how per-human coverage gradients
aggregate.  The ORCA robot runs the same reciprocal-avoidance step as the
simulated humans.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .conformal import ConformalRadii, ScoreSet, conformal_radii, score_dataset
from .geometry import Vec2, WorldState
from .orca import OrcaParams, RolloutConfig, rollout_calibration
from .orca import step as orca_step
from .prediction import TrajectoryPredictor

__all__ = [
    "ALPHA_MAX",
    "ALPHA_MIN",
    "WARMUP_MIN_SAMPLES",
    "WARMUP_RADIUS",
    "AcpState",
    "AcpVariant",
    "OffcpRadii",
    "acp_update",
    "coverage_indicators",
    "offcp_calibrate",
    "orca_robot_policy",
]

ALPHA_MIN = 1e-4
ALPHA_MAX = 1.0 - 1e-4
# Until the sliding window holds this many error samples the adaptive radii
# fall back to a fixed half-meter interval.
WARMUP_MIN_SAMPLES = 5
WARMUP_RADIUS = 0.5


class AcpVariant(enum.Enum):
    """How per-human coverage gradients are aggregated into one update."""

    AVERAGE = "ACP-A"
    WORST_CASE = "ACP-W"

    @property
    def default_learning_rate(self) -> float:
        return 0.05 if self is AcpVariant.AVERAGE else 0.01


def _fallback_radii(t_pred: int, alpha: float) -> ConformalRadii:
    return ConformalRadii(
        radii=np.full(t_pred, WARMUP_RADIUS),
        alpha=alpha,
        sample_count=0,
        quantile_rule="empirical",
    )


@dataclass(frozen=True)
class AcpState:
    """Sliding-window calibration state for one episode of online adaptation.

    The window holds the last ``window_size`` resolved horizons as
    (humans, t_pred) error blocks together with the radii that were in force
    when each block's predictions were issued.  ``radii`` is what the planner
    should use right now; ``used_fallback`` records whether it came from the
    warm-up constant instead of the window.
    """

    variant: AcpVariant
    alpha_t: float
    learning_rate: float
    alpha_target: float
    t_pred: int
    radii: ConformalRadii
    window_size: int = 30
    window_errors: tuple[np.ndarray, ...] = ()
    window_radii: tuple[np.ndarray, ...] = ()
    used_fallback: bool = True

    def __post_init__(self) -> None:
        if not ALPHA_MIN <= self.alpha_t <= ALPHA_MAX:
            raise ValueError(f"alpha_t must lie in [{ALPHA_MIN}, {ALPHA_MAX}], got {self.alpha_t}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0.0):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.alpha_target < 1.0:
            raise ValueError(f"alpha_target must be in (0, 1), got {self.alpha_target}")
        if self.t_pred < 1:
            raise ValueError(f"t_pred must be >= 1, got {self.t_pred}")
        if self.window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {self.window_size}")
        if len(self.window_errors) != len(self.window_radii):
            raise ValueError("error blocks and radii snapshots must align")
        if len(self.window_errors) > self.window_size:
            raise ValueError("window exceeds its configured size")
        for block in self.window_errors:
            if block.ndim != 2 or block.shape[1] != self.t_pred:
                raise ValueError(f"error blocks must be (humans, {self.t_pred}), got {block.shape}")
        if self.radii.t_pred != self.t_pred:
            raise ValueError("radii horizon does not match t_pred")

    @classmethod
    def initial(
        cls,
        variant: AcpVariant,
        t_pred: int,
        alpha_target: float = 0.05,
        learning_rate: float | None = None,
        window_size: int = 30,
    ) -> "AcpState":
        if learning_rate is None:
            learning_rate = variant.default_learning_rate
        return cls(
            variant=variant,
            alpha_t=alpha_target,
            learning_rate=learning_rate,
            alpha_target=alpha_target,
            t_pred=t_pred,
            radii=_fallback_radii(t_pred, alpha_target),
            window_size=window_size,
        )

    @property
    def window_sample_count(self) -> int:
        return sum(int(block.shape[0]) for block in self.window_errors)


def coverage_indicators(errors: np.ndarray, radii: ConformalRadii) -> np.ndarray:
    """Per-human indicator: True when every step's error fits its radius."""
    e = np.asarray(errors, dtype=float)
    if e.ndim != 2 or e.shape[1] != radii.t_pred:
        raise ValueError(f"errors must be (humans, {radii.t_pred}), got {e.shape}")
    return np.all(e <= radii.radii[None, :], axis=1)


def _window_radii(state: AcpState, blocks: tuple[np.ndarray, ...], alpha: float) -> tuple[ConformalRadii, bool]:
    n = sum(int(b.shape[0]) for b in blocks)
    if n < WARMUP_MIN_SAMPLES:
        return _fallback_radii(state.t_pred, alpha), True
    stacked = np.vstack(blocks)  # (n, t_pred)
    scores = ScoreSet(scores=stacked.T.copy())
    # The empirical rule keeps q <= n for every alpha, which matters because
    # the adapted alpha can be clamped near zero where the finite-sample rule
    # would demand thousands of samples.
    return conformal_radii(scores, alpha, quantile_rule="empirical"), False


def acp_update(state: AcpState, covered: np.ndarray, errors: np.ndarray) -> AcpState:
    """Fold one resolved horizon into the state and retune the radii.

    ``covered`` holds one boolean per human (True when that human's realized
    path stayed inside every issued interval); ``errors`` holds the matching
    (humans, t_pred) prediction errors, which join the sliding window.
    """
    miss = 1.0 - np.asarray(covered, dtype=float)
    e = np.asarray(errors, dtype=float)
    if miss.ndim != 1 or miss.shape[0] < 1:
        raise ValueError("update needs at least one human outcome")
    if e.shape != (miss.shape[0], state.t_pred):
        raise ValueError(f"errors must be ({miss.shape[0]}, {state.t_pred}), got {e.shape}")
    if not np.all(np.isfinite(e)) or np.any(e < 0.0):
        raise ValueError("errors must be finite and non-negative")

    if state.variant is AcpVariant.AVERAGE:
        gradient = state.alpha_target - float(np.mean(miss))
    else:
        gradient = state.alpha_target - float(np.max(miss))
    alpha_next = min(max(state.alpha_t + state.learning_rate * gradient, ALPHA_MIN), ALPHA_MAX)

    blocks = (*state.window_errors, e.copy())[-state.window_size :]
    snaps = (*state.window_radii, state.radii.radii.copy())[-state.window_size :]
    radii, fallback = _window_radii(state, blocks, alpha_next)
    return replace(
        state,
        alpha_t=alpha_next,
        window_errors=blocks,
        window_radii=snaps,
        radii=radii,
        used_fallback=fallback,
    )


@dataclass(frozen=True)
class OffcpRadii:
    """Radii calibrated once, before any episode runs, and then frozen."""

    radii: ConformalRadii
    episodes: int
    n_samples: int

    def __post_init__(self) -> None:
        if self.episodes < 1 or self.n_samples < 1:
            raise ValueError("offline calibration must have seen at least one sample")


def offcp_calibrate(
    scenario_gen: Callable[[int], WorldState],
    params: OrcaParams,
    rollout: RolloutConfig,
    predictor: TrajectoryPredictor,
    episodes: int,
    alpha: float,
    seed: int,
    quantile_rule: str = "finite_sample",
) -> OffcpRadii:
    """Calibrate fixed radii from robot-free crowd episodes.

    Episode e simulates the world ``scenario_gen(e)`` with no robot present,
    windows it exactly like the interactive rollouts, and scores the
    predictor on every (human, window) sample; the pooled scores give one
    radii vector reused unchanged for the whole suite.
    """
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    cfg = replace(rollout, episodes=1, include_robot=False)
    pooled: list[np.ndarray] = []
    for e in range(episodes):
        world = scenario_gen(e)
        episode_seed = int(np.random.SeedSequence((seed, e)).generate_state(1)[0])
        dataset = rollout_calibration(world, None, params, cfg, episode_seed)
        pooled.append(score_dataset(dataset, predictor).scores)
    scores = ScoreSet(scores=np.concatenate(pooled, axis=1))
    radii = conformal_radii(scores, alpha, quantile_rule=quantile_rule)
    return OffcpRadii(radii=radii, episodes=episodes, n_samples=scores.n_samples)


def orca_robot_policy(world: WorldState, goal: Vec2, params: OrcaParams) -> Vec2:
    """One reciprocal-avoidance step for the robot, same policy as the crowd."""
    if abs(params.dt - world.dt) > 1e-12:
        raise ValueError(f"policy dt {params.dt} does not match world dt {world.dt}")
    focused = replace(world, robot=replace(world.robot, goal=goal))
    return orca_step(focused, params).robot.velocity
