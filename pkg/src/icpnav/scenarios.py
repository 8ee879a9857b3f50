"""Randomized test-case geometry.

The default layout is the circle crossing standard in crowd-navigation
benchmarks: the robot and every human start on a 6 m circle with jittered
angle and radius and swap to the antipodal point, which forces everyone
through the center.  A square-random layout is available behind a flag.
Placement is rejection-sampled so no two agents start within each other's
inflated discs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import AgentState, Vec2, WorldState

__all__ = ["Scenario", "generate_scenarios"]

DEFAULT_RADIUS = 6.0
DEFAULT_ARENA = (-8.0, -8.0, 8.0, 8.0)
ANGLE_JITTER = 0.3
RADIUS_JITTER = 0.5
MIN_GAP = 0.1
MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class Scenario:
    """Start and goal layout of one test case."""

    robot_start: Vec2
    robot_goal: Vec2
    human_starts: tuple[Vec2, ...]
    human_goals: tuple[Vec2, ...]
    arena: tuple[float, float, float, float]
    seed: int

    def __post_init__(self) -> None:
        if len(self.human_starts) != len(self.human_goals):
            raise ValueError("every human needs both a start and a goal")
        xmin, ymin, xmax, ymax = self.arena
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"degenerate arena {self.arena}")
        for p in (self.robot_start, self.robot_goal, *self.human_starts, *self.human_goals):
            if not (xmin <= p.x <= xmax and ymin <= p.y <= ymax):
                raise ValueError(f"point {p} outside arena {self.arena}")

    @property
    def n_humans(self) -> int:
        return len(self.human_starts)

    def to_world(self, dt: float, r_r: float = 0.4, r_h: float = 0.4) -> WorldState:
        """Initial world: everyone at rest at their start."""
        robot = AgentState(
            position=self.robot_start, velocity=Vec2(0.0, 0.0), goal=self.robot_goal, radius=r_r
        )
        humans = tuple(
            AgentState(position=s, velocity=Vec2(0.0, 0.0), goal=g, radius=r_h)
            for s, g in zip(self.human_starts, self.human_goals)
        )
        return WorldState(time_step=0, robot=robot, humans=humans, dt=dt)


def _place_separated(
    rng: np.random.Generator,
    draw,
    count: int,
    min_dist: float,
    budget: list[int],
) -> list[tuple[float, float]]:
    placed: list[tuple[float, float]] = []
    for k in range(count):
        while True:
            if budget[0] <= 0:
                raise ValueError(
                    f"could not separate {count} agents after {MAX_ATTEMPTS} attempts;"
                    " the arena is too crowded"
                )
            budget[0] -= 1
            p = draw(rng, k)
            if all(math.dist(p, q) >= min_dist for q in placed):
                placed.append(p)
                break
    return placed


def generate_scenarios(
    n_humans: int,
    count: int,
    seed: int,
    geometry: str = "circle",
    radius: float = DEFAULT_RADIUS,
    arena: tuple[float, float, float, float] = DEFAULT_ARENA,
    r_r: float = 0.4,
    r_h: float = 0.4,
) -> tuple[Scenario, ...]:
    """Deterministically draw ``count`` separated scenarios.

    Case i derives its stream from (seed, i), so scenarios are stable under
    reordering and independent of how many cases precede them.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if n_humans < 0:
        raise ValueError(f"n_humans must be non-negative, got {n_humans}")
    if geometry not in ("circle", "square"):
        raise ValueError(f"unknown geometry {geometry!r}, expected 'circle' or 'square'")
    # All pairwise radii are r_r + r_h at worst when the robot is involved
    # and r_h + r_h otherwise; one conservative bound keeps placement simple.
    min_dist = max(r_r + r_h, 2.0 * r_h) + MIN_GAP

    scenarios = []
    for case in range(count):
        rng = np.random.default_rng(np.random.SeedSequence((seed, case)))
        budget = [MAX_ATTEMPTS]
        slots = n_humans + 1
        if geometry == "circle":

            def draw_circle(r: np.random.Generator, k: int) -> tuple[float, float]:
                base = -math.pi / 2.0 + 2.0 * math.pi * k / slots
                ang = base + r.uniform(-ANGLE_JITTER, ANGLE_JITTER)
                rad = radius + r.uniform(-RADIUS_JITTER, RADIUS_JITTER)
                return (rad * math.cos(ang), rad * math.sin(ang))

            starts = _place_separated(rng, draw_circle, slots, min_dist, budget)
            goals = [(-x, -y) for x, y in starts]
        else:
            half = radius

            def draw_square(r: np.random.Generator, k: int) -> tuple[float, float]:
                return (r.uniform(-half, half), r.uniform(-half, half))

            starts = _place_separated(rng, draw_square, slots, min_dist, budget)
            goals = _place_separated(rng, draw_square, slots, min_dist, budget)

        scenarios.append(
            Scenario(
                robot_start=Vec2(*starts[0]),
                robot_goal=Vec2(*goals[0]),
                human_starts=tuple(Vec2(*p) for p in starts[1:]),
                human_goals=tuple(Vec2(*p) for p in goals[1:]),
                arena=arena,
                seed=seed,
            )
        )
    return tuple(scenarios)
