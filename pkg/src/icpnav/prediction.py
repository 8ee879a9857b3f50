"""Human trajectory predictors over a fixed observation window.

The predictor contract is deliberately small so externally trained models can
be plugged in: anything mapping an observation window to per-human future
positions over a horizon satisfies it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .geometry import HorizonPrediction, WorldState

__all__ = [
    "ObservationWindow",
    "TrajectoryPredictor",
    "ConstantVelocityPredictor",
    "window_from_worlds",
]


@dataclass(frozen=True)
class ObservationWindow:
    """Recent positions of every agent, oldest first.

    ``robot_positions`` is None for robot-free data (offline calibration of
    human-only crowds).
    """

    human_positions: np.ndarray  # (N, t_obs, 2)
    robot_positions: np.ndarray | None  # (t_obs, 2)
    dt: float

    def __post_init__(self) -> None:
        hp = np.asarray(self.human_positions, dtype=float)
        if hp.ndim != 3 or hp.shape[2] != 2:
            raise ValueError(f"human_positions must have shape (N, t_obs, 2), got {hp.shape}")
        if hp.shape[1] < 1:
            raise ValueError("observation window must contain at least one step")
        if not np.all(np.isfinite(hp)):
            raise ValueError("observed positions must be finite")
        object.__setattr__(self, "human_positions", hp)
        if self.robot_positions is not None:
            rp = np.asarray(self.robot_positions, dtype=float)
            if rp.shape != (hp.shape[1], 2):
                raise ValueError(
                    f"robot_positions must have shape ({hp.shape[1]}, 2), got {rp.shape}"
                )
            object.__setattr__(self, "robot_positions", rp)
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def n_humans(self) -> int:
        return int(self.human_positions.shape[0])

    @property
    def t_obs(self) -> int:
        return int(self.human_positions.shape[1])


@runtime_checkable
class TrajectoryPredictor(Protocol):
    """Maps an observation window to future human positions."""

    def predict(self, window: ObservationWindow, t_pred: int) -> HorizonPrediction: ...


class ConstantVelocityPredictor:
    """Extrapolates each human with the mean of its last two displacements.

    A window of two steps carries a single displacement, which is then used
    as-is; the minimum window length is two.
    """

    min_t_obs = 2

    def predict(self, window: ObservationWindow, t_pred: int) -> HorizonPrediction:
        if t_pred < 1:
            raise ValueError(f"t_pred must be >= 1, got {t_pred}")
        if window.t_obs < self.min_t_obs:
            raise ValueError(
                f"constant-velocity prediction needs at least {self.min_t_obs} observed "
                f"steps, got {window.t_obs}"
            )
        pos = window.human_positions
        tail = pos[:, -3:, :] if window.t_obs >= 3 else pos[:, -2:, :]
        velocity = (tail[:, -1, :] - tail[:, 0, :]) / ((tail.shape[1] - 1) * window.dt)
        steps = np.arange(1, t_pred + 1, dtype=float)
        future = pos[:, -1, None, :] + velocity[:, None, :] * (steps[None, :, None] * window.dt)
        return HorizonPrediction(positions=future)


def window_from_worlds(worlds: Sequence[WorldState], t_obs: int) -> ObservationWindow:
    """Build a window from the most recent world states, oldest first.

    Histories shorter than ``t_obs`` are padded by repeating the earliest
    state, which is the episode-start convention.
    """
    if not worlds:
        raise ValueError("need at least one world state")
    if t_obs < 1:
        raise ValueError(f"t_obs must be >= 1, got {t_obs}")
    recent = list(worlds)[-t_obs:]
    while len(recent) < t_obs:
        recent.insert(0, recent[0])
    n = recent[0].n_humans
    if any(w.n_humans != n for w in recent):
        raise ValueError("human count changed within the observation history")
    human = np.stack([w.human_positions() for w in recent], axis=1)
    robot = np.array([[w.robot.position.x, w.robot.position.y] for w in recent])
    return ObservationWindow(human_positions=human, robot_positions=robot, dt=recent[0].dt)
