"""Planar state types shared across the simulator, predictor, planner, and metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Vec2",
    "AgentState",
    "WorldState",
    "Trajectory",
    "HorizonPrediction",
    "euclidean_distance",
]


@dataclass(frozen=True)
class Vec2:
    """Immutable 2D vector with finite components."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Vec2 components must be finite, got ({self.x}, {self.y})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, scalar: float) -> "Vec2":
        return Vec2(self.x * scalar, self.y * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @staticmethod
    def from_array(arr: np.ndarray) -> "Vec2":
        return Vec2(float(arr[0]), float(arr[1]))


def euclidean_distance(a: Vec2, b: Vec2) -> float:
    """Euclidean distance between two points."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class AgentState:
    """Kinematic state of one disc-shaped agent."""

    position: Vec2
    velocity: Vec2
    goal: Vec2
    radius: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise ValueError(f"agent radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class WorldState:
    """Snapshot of the robot and all humans at one simulation step."""

    time_step: int
    robot: AgentState
    humans: tuple[AgentState, ...]
    dt: float

    def __post_init__(self) -> None:
        if self.time_step < 0:
            raise ValueError(f"time_step must be non-negative, got {self.time_step}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "humans", tuple(self.humans))

    @property
    def n_humans(self) -> int:
        return len(self.humans)

    def human_positions(self) -> np.ndarray:
        """(N, 2) array of human positions."""
        return np.array([[h.position.x, h.position.y] for h in self.humans], dtype=float).reshape(
            len(self.humans), 2
        )

    def human_velocities(self) -> np.ndarray:
        """(N, 2) array of human velocities."""
        return np.array([[h.velocity.x, h.velocity.y] for h in self.humans], dtype=float).reshape(
            len(self.humans), 2
        )


@dataclass(frozen=True)
class Trajectory:
    """Sequence of positions sampled every ``dt`` starting at ``start_step``."""

    start_step: int
    positions: np.ndarray  # (K, 2)
    dt: float

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"positions must have shape (K, 2), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("trajectory positions must be finite")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return int(self.positions.shape[0])

    def displacements(self) -> np.ndarray:
        """(K-1, 2) array of consecutive position differences."""
        return np.diff(self.positions, axis=0)

    def max_step_speed(self) -> float:
        """Largest implied speed between consecutive samples."""
        if len(self) < 2:
            return 0.0
        return float(np.max(np.linalg.norm(self.displacements(), axis=1))) / self.dt

    def check_speed(self, v_max: float, tol: float = 1e-9) -> None:
        """Raise if any implied step speed exceeds ``v_max`` beyond ``tol``."""
        speed = self.max_step_speed()
        if speed > v_max + tol:
            raise ValueError(f"trajectory step speed {speed} exceeds v_max {v_max}")


@dataclass(frozen=True)
class HorizonPrediction:
    """Predicted future positions for every human over a fixed horizon."""

    positions: np.ndarray  # (N, T_pred, 2)

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 3 or pos.shape[2] != 2:
            raise ValueError(f"positions must have shape (N, T_pred, 2), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("predicted positions must be finite")
        object.__setattr__(self, "positions", pos)

    @property
    def n_humans(self) -> int:
        return int(self.positions.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.positions.shape[1])
