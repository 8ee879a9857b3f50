"""Reciprocal collision-avoidance crowd simulator.

Each agent computes one linear velocity constraint per neighbor from the
truncated velocity obstacle, takes half the responsibility for avoidance, and
picks the feasible velocity closest to its preferred velocity with an
incremental two-dimensional linear program.  When the constraints are
infeasible the velocity minimizing the maximum constraint violation is used
instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import AgentState, Trajectory, Vec2, WorldState

__all__ = [
    "OrcaParams",
    "HalfPlane",
    "RolloutConfig",
    "RolloutLog",
    "CalibrationDataset",
    "compute_halfplanes",
    "solve_velocity_lp",
    "preferred_velocity",
    "step",
    "rollout_calibration",
]

_EPS = 1e-10
# Two agents closer than this are treated as exactly coincident and one is
# nudged apart so the constraint geometry stays defined.
_COINCIDENT_DIST = 1e-9
_PERTURB_DIST = 1e-3


@dataclass(frozen=True)
class OrcaParams:
    """Tunable parameters of the reciprocal avoidance policy."""

    neighbor_dist: float = 10.0
    max_neighbors: int = 10
    time_horizon: float = 5.0
    dt: float = 0.25
    v_max: float = 1.0
    perturb_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("neighbor_dist", "time_horizon", "dt", "v_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive, got {value}")
        if self.max_neighbors < 0:
            raise ValueError(f"max_neighbors must be non-negative, got {self.max_neighbors}")


@dataclass(frozen=True)
class HalfPlane:
    """Velocity-space constraint ``normal . (v - point) >= 0`` with unit normal."""

    point: Vec2
    normal: Vec2

    def __post_init__(self) -> None:
        n = self.normal.norm()
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"normal must be a unit vector, got magnitude {n}")

    def contains(self, v: Vec2, tol: float = 0.0) -> bool:
        return self.normal.dot(v - self.point) >= -tol

    def violation(self, v: Vec2) -> float:
        """Positive when ``v`` is outside the feasible half-plane."""
        return max(0.0, -(self.normal.dot(v - self.point)))


# ---------------------------------------------------------------------------
# internal geometry on plain floats; lines are (px, py, dx, dy) with the
# feasible side to the left of the direction (dx, dy)


def _line_to_halfplane(line: tuple[float, float, float, float]) -> HalfPlane:
    px, py, dx, dy = line
    return HalfPlane(point=Vec2(px, py), normal=Vec2(-dy, dx))


def _halfplane_to_line(hp: HalfPlane) -> tuple[float, float, float, float]:
    return (hp.point.x, hp.point.y, hp.normal.y, -hp.normal.x)


def _avoidance_line(
    px: float,
    py: float,
    vx: float,
    vy: float,
    ox: float,
    oy: float,
    ovx: float,
    ovy: float,
    combined_radius: float,
    time_horizon: float,
    dt: float,
) -> tuple[float, float, float, float]:
    """One reciprocal constraint line for the agent at (px, py) against a neighbor."""
    rel_px = ox - px
    rel_py = oy - py
    rel_vx = vx - ovx
    rel_vy = vy - ovy
    dist_sq = rel_px * rel_px + rel_py * rel_py
    r_sq = combined_radius * combined_radius

    if dist_sq > r_sq:
        # No overlap: velocity obstacle truncated at time_horizon.
        inv_th = 1.0 / time_horizon
        wx = rel_vx - rel_px * inv_th
        wy = rel_vy - rel_py * inv_th
        w_len_sq = wx * wx + wy * wy
        dot1 = wx * rel_px + wy * rel_py
        if dot1 < 0.0 and dot1 * dot1 > r_sq * w_len_sq:
            # Closest point on the cutoff arc.
            w_len = math.sqrt(w_len_sq)
            uw_x = wx / w_len
            uw_y = wy / w_len
            dir_x = uw_y
            dir_y = -uw_x
            u_scale = combined_radius * inv_th - w_len
            ux = u_scale * uw_x
            uy = u_scale * uw_y
        else:
            # Closest point on one of the cone legs.
            leg = math.sqrt(dist_sq - r_sq)
            if rel_px * wy - rel_py * wx > 0.0:
                dir_x = (rel_px * leg - rel_py * combined_radius) / dist_sq
                dir_y = (rel_px * combined_radius + rel_py * leg) / dist_sq
            else:
                dir_x = -(rel_px * leg + rel_py * combined_radius) / dist_sq
                dir_y = -(-rel_px * combined_radius + rel_py * leg) / dist_sq
            dot2 = rel_vx * dir_x + rel_vy * dir_y
            ux = dot2 * dir_x - rel_vx
            uy = dot2 * dir_y - rel_vy
    else:
        # Overlapping discs: push apart within one control step.
        inv_dt = 1.0 / dt
        wx = rel_vx - rel_px * inv_dt
        wy = rel_vy - rel_py * inv_dt
        w_len = math.hypot(wx, wy)
        if w_len < _EPS:
            dist = math.sqrt(dist_sq)
            uw_x = -rel_px / dist if dist > 0.0 else 1.0
            uw_y = -rel_py / dist if dist > 0.0 else 0.0
        else:
            uw_x = wx / w_len
            uw_y = wy / w_len
        dir_x = uw_y
        dir_y = -uw_x
        u_scale = combined_radius * inv_dt - w_len
        ux = u_scale * uw_x
        uy = u_scale * uw_y

    # Each agent takes half the responsibility for getting out of the way.
    return (vx + 0.5 * ux, vy + 0.5 * uy, dir_x, dir_y)


def _lp1(
    lines: list[tuple[float, float, float, float]],
    line_no: int,
    radius: float,
    opt_x: float,
    opt_y: float,
    directional: bool,
) -> tuple[float, float] | None:
    """Optimize along one line segment clipped by the disk and prior lines."""
    px, py, dx, dy = lines[line_no]
    dot = px * dx + py * dy
    disc = dot * dot + radius * radius - (px * px + py * py)
    if disc < 0.0:
        return None
    sqrt_disc = math.sqrt(disc)
    t_left = -dot - sqrt_disc
    t_right = -dot + sqrt_disc

    for i in range(line_no):
        qx, qy, ex, ey = lines[i]
        denom = dx * ey - dy * ex
        numer = ex * (py - qy) - ey * (px - qx)
        if abs(denom) <= _EPS:
            if numer < 0.0:
                return None
            continue
        t = numer / denom
        if denom >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return None

    if directional:
        t = t_right if opt_x * dx + opt_y * dy > 0.0 else t_left
    else:
        t = dx * (opt_x - px) + dy * (opt_y - py)
        t = min(max(t, t_left), t_right)
    return (px + t * dx, py + t * dy)


def _lp2(
    lines: list[tuple[float, float, float, float]],
    radius: float,
    opt_x: float,
    opt_y: float,
    directional: bool,
) -> tuple[float, float, int]:
    """Incrementally satisfy each line; returns (x, y, index of first failure or len)."""
    if directional:
        rx = opt_x * radius
        ry = opt_y * radius
    elif opt_x * opt_x + opt_y * opt_y > radius * radius:
        scale = radius / math.hypot(opt_x, opt_y)
        rx = opt_x * scale
        ry = opt_y * scale
    else:
        rx = opt_x
        ry = opt_y

    for i, (px, py, dx, dy) in enumerate(lines):
        if dx * (py - ry) - dy * (px - rx) > 0.0:
            candidate = _lp1(lines, i, radius, opt_x, opt_y, directional)
            if candidate is None:
                return (rx, ry, i)
            rx, ry = candidate
    return (rx, ry, len(lines))


def _lp3(
    lines: list[tuple[float, float, float, float]],
    begin: int,
    radius: float,
    rx: float,
    ry: float,
) -> tuple[float, float]:
    """Minimize the maximum violation over the lines from ``begin`` onward."""
    distance = 0.0
    for i in range(begin, len(lines)):
        px, py, dx, dy = lines[i]
        if dx * (py - ry) - dy * (px - rx) > distance:
            proj: list[tuple[float, float, float, float]] = []
            for j in range(i):
                qx, qy, ex, ey = lines[j]
                denom = dx * ey - dy * ex
                if abs(denom) <= _EPS:
                    if dx * ex + dy * ey > 0.0:
                        continue  # parallel same direction: redundant
                    nx = 0.5 * (px + qx)
                    ny = 0.5 * (py + qy)
                else:
                    t = (ex * (py - qy) - ey * (px - qx)) / denom
                    nx = px + t * dx
                    ny = py + t * dy
                gx = ex - dx
                gy = ey - dy
                glen = math.hypot(gx, gy)
                proj.append((nx, ny, gx / glen, gy / glen))
            cx, cy, fail = _lp2(proj, radius, -dy, dx, True)
            if fail >= len(proj):
                # Keep the last iterate on numerical failure; lp2 cannot fail
                # here except through floating-point noise.
                rx, ry = cx, cy
            distance = dx * (py - ry) - dy * (px - rx)
    return (rx, ry)


def _solve_lines(
    lines: list[tuple[float, float, float, float]],
    pref_x: float,
    pref_y: float,
    v_max: float,
) -> tuple[float, float]:
    rx, ry, fail = _lp2(lines, v_max, pref_x, pref_y, False)
    if fail < len(lines):
        rx, ry = _lp3(lines, fail, v_max, rx, ry)
    return (rx, ry)


# ---------------------------------------------------------------------------
# public operations


def preferred_velocity(position: Vec2, goal: Vec2, params: OrcaParams) -> Vec2:
    """Goal-directed preferred velocity, capped at v_max, landing exactly when close."""
    dx = goal.x - position.x
    dy = goal.y - position.y
    dist = math.hypot(dx, dy)
    if dist <= params.v_max * params.dt:
        return Vec2(dx / params.dt, dy / params.dt)
    scale = params.v_max / dist
    return Vec2(dx * scale, dy * scale)


def _resolve_coincidences(
    positions: np.ndarray, seed: int, time_step: int
) -> np.ndarray:
    """Nudge exactly coincident agents apart; the later index moves."""
    n = positions.shape[0]
    if n < 2:
        return positions
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    out = positions
    for j in range(1, n):
        for i in range(j):
            if dist[i, j] < _COINCIDENT_DIST:
                rng = np.random.default_rng(np.random.SeedSequence((seed, time_step, j)))
                angle = rng.uniform(0.0, 2.0 * math.pi)
                if out is positions:
                    out = positions.copy()
                out[j, 0] += _PERTURB_DIST * math.cos(angle)
                out[j, 1] += _PERTURB_DIST * math.sin(angle)
                break
    return out


def _neighbor_lines(
    index: int,
    positions: np.ndarray,
    velocities: np.ndarray,
    radii: np.ndarray,
    params: OrcaParams,
) -> list[tuple[float, float, float, float]]:
    """Constraint lines for agent ``index`` against its nearest neighbors."""
    n = positions.shape[0]
    px, py = positions[index]
    vx, vy = velocities[index]
    diff = positions - positions[index]
    dist_sq = diff[:, 0] ** 2 + diff[:, 1] ** 2
    order = sorted(
        (j for j in range(n) if j != index and dist_sq[j] < params.neighbor_dist**2),
        key=lambda j: (dist_sq[j], j),
    )[: params.max_neighbors]
    lines = []
    for j in order:
        lines.append(
            _avoidance_line(
                px,
                py,
                vx,
                vy,
                positions[j, 0],
                positions[j, 1],
                velocities[j, 0],
                velocities[j, 1],
                radii[index] + radii[j],
                params.time_horizon,
                params.dt,
            )
        )
    return lines


def compute_halfplanes(
    agent: AgentState, neighbors: tuple[AgentState, ...] | list[AgentState], params: OrcaParams
) -> list[HalfPlane]:
    """Velocity constraints for ``agent`` against the neighbors within range."""
    all_pos = np.array(
        [[agent.position.x, agent.position.y]]
        + [[nb.position.x, nb.position.y] for nb in neighbors],
        dtype=float,
    )
    all_pos = _resolve_coincidences(all_pos, params.perturb_seed, 0)
    all_vel = np.array(
        [[agent.velocity.x, agent.velocity.y]]
        + [[nb.velocity.x, nb.velocity.y] for nb in neighbors],
        dtype=float,
    )
    radii = np.array([agent.radius] + [nb.radius for nb in neighbors], dtype=float)
    lines = _neighbor_lines(0, all_pos, all_vel, radii, params)
    return [_line_to_halfplane(line) for line in lines]


def solve_velocity_lp(
    halfplanes: list[HalfPlane] | tuple[HalfPlane, ...], preferred: Vec2, v_max: float
) -> Vec2:
    """Feasible velocity closest to ``preferred`` within the speed disk.

    Falls back to minimizing the maximum constraint violation when the
    half-planes have no common point inside the disk.
    """
    if not (math.isfinite(v_max) and v_max > 0.0):
        raise ValueError(f"v_max must be positive, got {v_max}")
    lines = [_halfplane_to_line(hp) for hp in halfplanes]
    rx, ry = _solve_lines(lines, preferred.x, preferred.y, v_max)
    return Vec2(rx, ry)


def step(
    world: WorldState, params: OrcaParams, robot_override: Vec2 | None = None
) -> WorldState:
    """Advance every agent one control step of ``params.dt`` seconds.

    Humans run the reciprocal avoidance policy against all other agents
    including the robot.  The robot follows ``robot_override`` when given,
    otherwise it runs the same policy toward its own goal.  Agents whose goal
    is reached have zero preferred velocity, so they hold position unless
    pressed by the constraints.
    """
    agents = (world.robot,) + world.humans
    n = len(agents)
    positions = np.array([[a.position.x, a.position.y] for a in agents], dtype=float)
    velocities = np.array([[a.velocity.x, a.velocity.y] for a in agents], dtype=float)
    radii = np.array([a.radius for a in agents], dtype=float)
    positions = _resolve_coincidences(positions, params.perturb_seed, world.time_step)

    new_vel = np.empty_like(velocities)
    for i, agent in enumerate(agents):
        if i == 0 and robot_override is not None:
            new_vel[0] = (robot_override.x, robot_override.y)
            continue
        pref = preferred_velocity(
            Vec2(positions[i, 0], positions[i, 1]), agent.goal, params
        )
        lines = _neighbor_lines(i, positions, velocities, radii, params)
        new_vel[i] = _solve_lines(lines, pref.x, pref.y, params.v_max)

    new_pos = positions + new_vel * world.dt
    new_agents = [
        replace(
            agent,
            position=Vec2(new_pos[i, 0], new_pos[i, 1]),
            velocity=Vec2(new_vel[i, 0], new_vel[i, 1]),
        )
        for i, agent in enumerate(agents)
    ]
    return WorldState(
        time_step=world.time_step + 1,
        robot=new_agents[0],
        humans=tuple(new_agents[1:]),
        dt=world.dt,
    )


# ---------------------------------------------------------------------------
# calibration rollouts


@dataclass(frozen=True)
class RolloutConfig:
    """Shape of the simulated calibration episodes."""

    episodes: int
    t_obs: int
    t_pred: int
    pad: int = 0
    goal_noise_prob: float = 0.1
    goal_noise_mag: float = 0.5
    goal_bounds: tuple[float, float, float, float] | None = None  # xmin, ymin, xmax, ymax
    include_robot: bool = True

    def __post_init__(self) -> None:
        if self.episodes < 1:
            raise ValueError(f"episodes must be >= 1, got {self.episodes}")
        if self.t_obs < 1 or self.t_pred < 1:
            raise ValueError("t_obs and t_pred must be >= 1")
        if self.pad < 0:
            raise ValueError(f"pad must be non-negative, got {self.pad}")
        if not 0.0 <= self.goal_noise_prob <= 1.0:
            raise ValueError(f"goal_noise_prob must be in [0, 1], got {self.goal_noise_prob}")

    @property
    def steps(self) -> int:
        return self.t_obs + self.t_pred + self.pad

    @property
    def windows_per_episode(self) -> int:
        return self.steps - (self.t_obs + self.t_pred) + 1


@dataclass(frozen=True)
class RolloutLog:
    """Full trajectories of one simulated calibration episode."""

    robot: Trajectory | None
    humans: np.ndarray  # (N, steps + 1, 2) including the start state
    seed_entropy: tuple[int, int]


@dataclass(frozen=True)
class CalibrationDataset:
    """Sliding-window samples collected from simulated episodes.

    Each of the M samples pairs an observation segment with the true future
    segment that a predictor is scored against.
    """

    robot_obs: np.ndarray | None  # (M, t_obs, 2)
    human_obs: np.ndarray  # (M, N, t_obs, 2)
    human_future: np.ndarray  # (M, N, t_pred, 2)
    dt: float
    logs: tuple[RolloutLog, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if self.human_obs.ndim != 4 or self.human_future.ndim != 4:
            raise ValueError("human_obs and human_future must be 4D (M, N, T, 2)")
        if self.human_obs.shape[0] != self.human_future.shape[0]:
            raise ValueError("observation and future sample counts differ")
        if self.human_obs.shape[1] != self.human_future.shape[1]:
            raise ValueError("observation and future human counts differ")

    @property
    def n_samples(self) -> int:
        return int(self.human_obs.shape[0])

    @property
    def n_humans(self) -> int:
        return int(self.human_obs.shape[1])


def _plan_velocity(plan: Trajectory, s: int) -> tuple[float, float]:
    """Velocity implied by the plan between its samples s and s+1, zero past the end."""
    if s + 1 < len(plan):
        d = (plan.positions[s + 1] - plan.positions[s]) / plan.dt
        return (float(d[0]), float(d[1]))
    return (0.0, 0.0)


def rollout_calibration(
    world: WorldState,
    robot_plan: Trajectory | None,
    params: OrcaParams,
    cfg: RolloutConfig,
    seed: int,
) -> CalibrationDataset:
    """Simulate crowd episodes from ``world`` and window them into samples.

    The robot is forced along ``robot_plan`` exactly (holding its final
    position once the plan runs out); with ``cfg.include_robot`` false the
    humans evolve with no robot present at all.  Human goals receive seeded
    random perturbations during the episodes.  Episode e draws its random
    stream from (seed, e), so the dataset is bit-identical for equal seeds
    and independent of execution order.
    """
    if cfg.include_robot:
        if robot_plan is None:
            raise ValueError("include_robot rollouts require a robot plan to follow")
        if robot_plan.dt != world.dt:
            raise ValueError("plan dt must match world dt")
        if len(robot_plan) < 1:
            raise ValueError("robot plan must contain at least the current position")
    n_humans = world.n_humans
    if n_humans == 0:
        raise ValueError("calibration rollouts need at least one human")

    steps = cfg.steps
    use_robot = cfg.include_robot
    base_goals = np.array([[h.goal.x, h.goal.y] for h in world.humans], dtype=float)
    human_pos0 = world.human_positions()
    human_vel0 = world.human_velocities()
    human_radii = np.array([h.radius for h in world.humans], dtype=float)

    robot_windows: list[np.ndarray] = []
    human_obs_windows: list[np.ndarray] = []
    human_fut_windows: list[np.ndarray] = []
    logs: list[RolloutLog] = []

    for episode in range(cfg.episodes):
        rng = np.random.default_rng(np.random.SeedSequence((seed, episode)))
        goals = base_goals.copy()
        if use_robot:
            positions = np.vstack(
                [[world.robot.position.x, world.robot.position.y], human_pos0]
            )
            velocities = np.vstack(
                [[world.robot.velocity.x, world.robot.velocity.y], human_vel0]
            )
            radii = np.concatenate([[world.robot.radius], human_radii])
            human_slice = slice(1, None)
        else:
            positions = human_pos0.copy()
            velocities = human_vel0.copy()
            radii = human_radii.copy()
            human_slice = slice(0, None)

        human_traj = np.empty((steps + 1, n_humans, 2), dtype=float)
        human_traj[0] = positions[human_slice]
        robot_traj = np.empty((steps + 1, 2), dtype=float)
        if use_robot:
            robot_traj[0] = positions[0]

        for s in range(steps):
            # Random goal drift keeps the simulated crowd from being a
            # single deterministic flow.
            if cfg.goal_noise_prob > 0.0:
                triggers = rng.uniform(size=n_humans) < cfg.goal_noise_prob
                for h in np.flatnonzero(triggers):
                    goals[h] += rng.uniform(-cfg.goal_noise_mag, cfg.goal_noise_mag, size=2)
                if cfg.goal_bounds is not None and np.any(triggers):
                    xmin, ymin, xmax, ymax = cfg.goal_bounds
                    goals[:, 0] = np.clip(goals[:, 0], xmin, xmax)
                    goals[:, 1] = np.clip(goals[:, 1], ymin, ymax)

            positions = _resolve_coincidences(
                positions, params.perturb_seed, world.time_step + s
            )
            if use_robot and robot_plan is not None:
                velocities[0] = _plan_velocity(robot_plan, s)

            new_vel = velocities.copy()
            for i in range(positions.shape[0]):
                if use_robot and i == 0:
                    continue  # robot velocity is forced
                h = i - 1 if use_robot else i
                pref = preferred_velocity(
                    Vec2(positions[i, 0], positions[i, 1]),
                    Vec2(goals[h, 0], goals[h, 1]),
                    params,
                )
                lines = _neighbor_lines(i, positions, velocities, radii, params)
                new_vel[i] = _solve_lines(lines, pref.x, pref.y, params.v_max)

            velocities = new_vel
            positions = positions + velocities * world.dt
            if use_robot:
                if robot_plan is not None and s + 1 < len(robot_plan):
                    positions[0] = robot_plan.positions[s + 1]
                elif robot_plan is not None:
                    positions[0] = robot_plan.positions[-1]
                robot_traj[s + 1] = positions[0]
            human_traj[s + 1] = positions[human_slice]

        robot_log = (
            Trajectory(start_step=world.time_step, positions=robot_traj.copy(), dt=world.dt)
            if use_robot
            else None
        )
        logs.append(
            RolloutLog(
                robot=robot_log,
                humans=np.swapaxes(human_traj, 0, 1).copy(),
                seed_entropy=(seed, episode),
            )
        )

        # Windows run over the simulated steps only (the seed state at index 0
        # is excluded): steps == t_obs + t_pred yields exactly one window.
        sim_humans = human_traj[1:]  # (steps, N, 2)
        sim_robot = robot_traj[1:] if use_robot else None
        for w in range(cfg.windows_per_episode):
            obs = sim_humans[w : w + cfg.t_obs]
            fut = sim_humans[w + cfg.t_obs : w + cfg.t_obs + cfg.t_pred]
            human_obs_windows.append(np.swapaxes(obs, 0, 1))
            human_fut_windows.append(np.swapaxes(fut, 0, 1))
            if use_robot:
                robot_windows.append(sim_robot[w : w + cfg.t_obs])

    return CalibrationDataset(
        robot_obs=np.stack(robot_windows) if use_robot else None,
        human_obs=np.stack(human_obs_windows),
        human_future=np.stack(human_fut_windows),
        dt=world.dt,
        logs=tuple(logs),
    )
