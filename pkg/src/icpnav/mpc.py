"""Receding-horizon planner that routes around uncertainty-inflated human discs.

The planner minimizes a quadratic cost (goal tracking, velocity smoothing,
and an optional proximal term toward a previous plan) over single-integrator
trajectories, subject to a per-step speed disk and disc-exclusion constraints
around each predicted human position.  The exclusion constraints are
non-convex, so the solver convexifies sequentially: each outer iteration
replaces every disc with the supporting half-plane nearest the current
iterate and solves the resulting cone QP.

The half-plane is contained in the disc's exterior, so every successful
subproblem solution satisfies the true constraints, and a subproblem built
at a truly feasible iterate always contains that iterate.  Failure is
therefore only possible at the first subproblem, where a recovery ladder
applies: re-initialize at a stop-short profile, then drop pathologically
deep violations, then give up with the profile flagged infeasible.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as _cvxmat
from cvxopt import solvers as _cvxsolvers

from .conformal import ConformalRadii
from .geometry import HorizonPrediction, Trajectory, Vec2, WorldState

__all__ = [
    "INITIAL_TOL",
    "DYNAMICS_TOL",
    "SPEED_TOL",
    "COLLISION_TOL",
    "PlanStatus",
    "MpcConfig",
    "SolveDiagnostics",
    "RobotPlan",
    "PlanCheck",
    "evaluate_objective",
    "plan",
    "check_plan",
    "stationary_plan",
]

# Residual bounds a plan must meet to be reported feasible.
INITIAL_TOL = 1e-6
DYNAMICS_TOL = 1e-6
SPEED_TOL = 1e-6
COLLISION_TOL = 1e-4

_SUBPROBLEM_SLACK = 1e-6
_DEGENERATE_DIST = 1e-9
_PROFILE_MARGIN = 1e-3
_PROFILE_BOW = 1e-3
_QP_OPTIONS = {"show_progress": False, "abstol": 1e-9, "reltol": 1e-8, "feastol": 1e-9}


class PlanStatus(enum.Enum):
    """Feasibility label of a plan; the cached label is applied by callers reusing plans."""

    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    CACHED_FALLBACK = "CachedFallback"


@dataclass(frozen=True)
class MpcConfig:
    """Planner horizon, cost weights, and solver knobs.

    ``t_mpc`` is the number of planned velocity steps.  Disc-exclusion
    constraints are imposed only on the first ``t_pred`` planned positions,
    matching the span of the prediction horizon.
    """

    t_mpc: int = 5
    t_pred: int = 5
    dt: float = 0.25
    v_max: float = 1.0
    omega_g: float = 1.0
    omega_v: float = 5.0
    omega_reg: float = 0.5
    r_r: float = 0.4
    r_h: float = 0.4
    scp_tol: float = 1e-4
    scp_max_iter: int = 20

    def __post_init__(self) -> None:
        if self.t_pred < 1 or self.t_mpc < self.t_pred:
            raise ValueError(
                f"need t_mpc >= t_pred >= 1, got t_mpc={self.t_mpc} t_pred={self.t_pred}"
            )
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (math.isfinite(self.v_max) and self.v_max > 0.0):
            raise ValueError(f"v_max must be positive, got {self.v_max}")
        for name in ("omega_g", "omega_v", "omega_reg"):
            w = getattr(self, name)
            if not (math.isfinite(w) and w >= 0.0):
                raise ValueError(f"{name} must be non-negative, got {w}")
        for name in ("r_r", "r_h"):
            r = getattr(self, name)
            if not (math.isfinite(r) and r > 0.0):
                raise ValueError(f"{name} must be positive, got {r}")
        if not (math.isfinite(self.scp_tol) and self.scp_tol > 0.0):
            raise ValueError(f"scp_tol must be positive, got {self.scp_tol}")
        if self.scp_max_iter < 1:
            raise ValueError(f"scp_max_iter must be >= 1, got {self.scp_max_iter}")

    @property
    def clearance(self) -> float:
        """Base exclusion radius before conformal inflation."""
        return self.r_r + self.r_h


@dataclass(frozen=True)
class SolveDiagnostics:
    """Bookkeeping from one planning call."""

    outer_iterations: int
    subproblem_solves: int
    converged: bool
    reinitialized: bool = False
    dropped: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class RobotPlan:
    """Planned robot motion: ``horizon + 1`` positions and ``horizon`` velocities."""

    positions: np.ndarray  # (t_mpc + 1, 2)
    velocities: np.ndarray  # (t_mpc, 2)
    dt: float
    status: PlanStatus
    objective: float
    max_residual: float
    diagnostics: SolveDiagnostics = field(
        default=SolveDiagnostics(outer_iterations=0, subproblem_solves=0, converged=False)
    )

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        vel = np.asarray(self.velocities, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 2:
            raise ValueError(f"positions must have shape (T+1, 2) with T >= 1, got {pos.shape}")
        if vel.shape != (pos.shape[0] - 1, 2):
            raise ValueError(f"velocities must have shape {(pos.shape[0] - 1, 2)}, got {vel.shape}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ValueError("plan arrays must be finite")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)

    @property
    def horizon(self) -> int:
        return int(self.velocities.shape[0])

    def start(self) -> Vec2:
        return Vec2.from_array(self.positions[0])

    def trajectory(self, start_step: int) -> Trajectory:
        """The planned positions as a trajectory beginning at ``start_step``."""
        return Trajectory(start_step=start_step, positions=self.positions, dt=self.dt)


@dataclass(frozen=True)
class PlanCheck:
    """Worst-case residual of each constraint family of a candidate plan."""

    initial_residual: float
    dynamics_residual: float
    speed_residual: float
    collision_residual: float

    @property
    def max_residual(self) -> float:
        return max(
            self.initial_residual,
            self.dynamics_residual,
            self.speed_residual,
            self.collision_residual,
        )

    @property
    def ok(self) -> bool:
        """True when every family is within its feasibility bound."""
        return (
            self.initial_residual <= INITIAL_TOL
            and self.dynamics_residual <= DYNAMICS_TOL
            and self.speed_residual <= SPEED_TOL
            and self.collision_residual <= COLLISION_TOL
        )


def evaluate_objective(
    positions: np.ndarray,
    velocities: np.ndarray,
    goal: Vec2,
    cfg: MpcConfig,
    prev_positions: np.ndarray | None = None,
) -> float:
    """Cost of a candidate plan under the planner's objective.

    Every position sample contributes to the goal term (the fixed first
    sample adds a constant), smoothing pairs consecutive planned velocities,
    and the proximal term compares positions index-wise against a previous
    plan when one is given.
    """
    pos = np.asarray(positions, dtype=float)
    vel = np.asarray(velocities, dtype=float)
    g = goal.to_array()
    total = cfg.omega_g * float(np.sum((pos - g) ** 2))
    if vel.shape[0] >= 2:
        total += cfg.omega_v * float(np.sum(np.diff(vel, axis=0) ** 2))
    if prev_positions is not None:
        prev = np.asarray(prev_positions, dtype=float)
        if prev.shape != pos.shape:
            raise ValueError(f"previous positions shape {prev.shape} != plan shape {pos.shape}")
        total += cfg.omega_reg * float(np.sum((pos - prev) ** 2))
    return total


# Each constraint is (human index, step tau in 1..t_pred, predicted center, radius).
_Constraint = tuple[int, int, np.ndarray, float]


def _constraint_list(
    predictions: HorizonPrediction, radii: ConformalRadii, cfg: MpcConfig
) -> list[_Constraint]:
    out: list[_Constraint] = []
    for i in range(predictions.n_humans):
        for tau in range(1, cfg.t_pred + 1):
            center = np.asarray(predictions.positions[i, tau - 1], dtype=float)
            out.append((i, tau, center, cfg.clearance + float(radii.radii[tau - 1])))
    return out


def _support_normal(
    point: np.ndarray, center: np.ndarray, start: np.ndarray, goal: np.ndarray
) -> np.ndarray:
    """Outward unit normal of the disc boundary point nearest ``point``.

    When the iterate sits exactly on the predicted center the boundary
    direction is undefined; fall back to pushing toward the plan start,
    then toward the goal, then along a fixed axis.
    """
    for d in (point - center, start - center, goal - center, np.array([1.0, 0.0])):
        n = float(np.linalg.norm(d))
        if n > _DEGENERATE_DIST:
            return d / n
    raise AssertionError("unreachable: fixed axis has unit norm")


def _straight_positions(x0: np.ndarray, goal: np.ndarray, cfg: MpcConfig) -> np.ndarray:
    """Full-speed profile toward the goal with exact landing, then hold."""
    pos = np.empty((cfg.t_mpc + 1, 2))
    pos[0] = x0
    cur = np.array(x0, dtype=float)
    for k in range(1, cfg.t_mpc + 1):
        delta = goal - cur
        dist = float(np.linalg.norm(delta))
        if dist <= cfg.v_max * cfg.dt:
            cur = np.array(goal, dtype=float)
        else:
            cur = cur + (cfg.v_max * cfg.dt / dist) * delta
        pos[k] = cur
    return pos


def _stop_positions(
    x0: np.ndarray, goal: np.ndarray, constraints: list[_Constraint], cfg: MpcConfig
) -> np.ndarray:
    """Straight profile truncated before it enters any exclusion disc.

    Sample k only has to clear the discs predicted for step k, so the profile
    advances while the advanced sample keeps a small margin and holds position
    otherwise.  A held sample can still end up inside a disc whose center
    moves onto it; the first subproblem handles that case or fails into the
    recovery ladder.
    """
    straight = _straight_positions(x0, goal, cfg)
    by_tau: dict[int, list[tuple[np.ndarray, float]]] = {}
    for _, tau, center, radius in constraints:
        by_tau.setdefault(tau, []).append((center, radius))
    pos = straight.copy()
    stopped = False
    for k in range(1, cfg.t_mpc + 1):
        if not stopped:
            for center, radius in by_tau.get(k, ()):
                if float(np.linalg.norm(straight[k] - center)) < radius + _PROFILE_MARGIN:
                    stopped = True
                    break
        if stopped:
            pos[k] = pos[k - 1]
    return pos


def _bowed(positions: np.ndarray, x0: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Copy of an initial profile with a microscopic lateral bow.

    A profile aimed straight at a disc center produces only coaxial
    supporting half-planes, which stalls the convexification at a saddle.
    The bow perturbs the linearization point only; it is never part of a
    returned plan.
    """
    d = goal - x0
    length = float(np.linalg.norm(d))
    if length < _DEGENERATE_DIST:
        return positions.copy()
    perp = np.array([-d[1], d[0]]) / length
    steps = positions.shape[0] - 1
    out = positions.copy()
    for k in range(1, steps + 1):
        out[k] = out[k] + _PROFILE_BOW * math.sin(math.pi * k / steps) * perp
    return out


def _deep_violations(
    profile: np.ndarray, constraints: list[_Constraint], cfg: MpcConfig
) -> tuple[list[_Constraint], list[_Constraint]]:
    """Split constraints into (kept, dropped) by violation depth at the profile.

    A constraint is dropped only when the profile violates it by more than
    the diameter of the uninflated exclusion disc, which indicates a
    predictor pathology rather than a navigable scene.
    """
    threshold = 2.0 * cfg.clearance
    kept: list[_Constraint] = []
    dropped: list[_Constraint] = []
    for item in constraints:
        _, tau, center, radius = item
        violation = radius - float(np.linalg.norm(profile[tau] - center))
        (dropped if violation > threshold else kept).append(item)
    return kept, dropped


class _Subproblem:
    """Fixed parts of the cone QP; only the disc linearizations change per iteration.

    Positions are eliminated: with x_k = x0 + dt * sum(v_1..v_k), the decision
    variable is the stacked velocity vector and the dynamics and initial
    condition hold exactly by construction.
    """

    def __init__(
        self,
        x0: np.ndarray,
        goal: np.ndarray,
        prev_positions: np.ndarray | None,
        cfg: MpcConfig,
    ) -> None:
        self.cfg = cfg
        self.x0 = x0
        self.goal = goal
        steps = cfg.t_mpc
        n = 2 * steps
        cum = np.kron(np.tril(np.ones((steps, steps))), np.eye(2))
        self.cum = cum
        diff = np.zeros((2 * (steps - 1), n))
        for k in range(steps - 1):
            diff[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = -np.eye(2)
            diff[2 * k : 2 * k + 2, 2 * k + 2 : 2 * k + 4] = np.eye(2)
        x0_rep = np.tile(x0, steps)
        w_pos = cfg.omega_g + (cfg.omega_reg if prev_positions is not None else 0.0)
        quad = 2.0 * (w_pos * cfg.dt**2 * cum.T @ cum + cfg.omega_v * diff.T @ diff)
        if w_pos == 0.0:
            # Degenerate weights leave a singular Hessian; a tiny ridge keeps
            # the KKT system solvable without visibly moving the optimum.
            quad = quad + 1e-9 * np.eye(n)
        lin = cfg.omega_g * (x0_rep - np.tile(goal, steps))
        if prev_positions is not None:
            lin = lin + cfg.omega_reg * (x0_rep - np.asarray(prev_positions, float)[1:].reshape(-1))
        self.P = _cvxmat(quad)
        self.q = _cvxmat(2.0 * cfg.dt * cum.T @ lin)
        cone_g = np.zeros((3 * steps, n))
        cone_h = np.zeros(3 * steps)
        for k in range(steps):
            cone_h[3 * k] = cfg.v_max
            cone_g[3 * k + 1, 2 * k] = -1.0
            cone_g[3 * k + 2, 2 * k + 1] = -1.0
        self.cone_g = cone_g
        self.cone_h = cone_h
        self.dims = {"l": 0, "q": [3] * steps, "s": []}

    def solve(
        self, iterate: np.ndarray, constraints: list[_Constraint]
    ) -> tuple[np.ndarray, np.ndarray] | None:
        """One convexified solve linearized at ``iterate``; None on failure."""
        cfg = self.cfg
        steps = cfg.t_mpc
        n = 2 * steps
        n_l = len(constraints)
        lin_g = np.zeros((n_l, n))
        lin_h = np.zeros(n_l)
        for row, (_, tau, center, radius) in enumerate(constraints):
            normal = _support_normal(iterate[tau], center, self.x0, self.goal)
            lin_g[row, : 2 * tau] = -cfg.dt * np.tile(normal, tau)
            lin_h[row] = float(normal @ (self.x0 - center)) - radius
        dims = dict(self.dims, l=n_l)
        g_all = _cvxmat(np.vstack([lin_g, self.cone_g]))
        h_all = _cvxmat(np.concatenate([lin_h, self.cone_h]))
        try:
            sol = _cvxsolvers.coneqp(self.P, self.q, g_all, h_all, dims, options=_QP_OPTIONS)
        except (ValueError, ArithmeticError):
            return None
        if sol["status"] != "optimal":
            return None
        u = np.array(sol["x"]).reshape(-1)
        if n_l and float(np.max(lin_g @ u - lin_h)) > _SUBPROBLEM_SLACK:
            return None
        velocities = u.reshape(steps, 2)
        positions = np.vstack([self.x0, self.x0 + cfg.dt * np.cumsum(velocities, axis=0)])
        return positions, velocities


def _clamp_speeds(velocities: np.ndarray, v_max: float) -> np.ndarray:
    """Radially scale any velocity whose norm exceeds ``v_max``."""
    speeds = np.linalg.norm(velocities, axis=1)
    factor = np.minimum(1.0, v_max / np.maximum(speeds, 1e-300))
    return velocities * factor[:, None]


def _residuals(
    positions: np.ndarray,
    velocities: np.ndarray,
    constraints: list[_Constraint],
    start: np.ndarray | None,
    cfg: MpcConfig,
) -> PlanCheck:
    initial = 0.0 if start is None else float(np.linalg.norm(positions[0] - start))
    recon = positions[:-1] + cfg.dt * velocities
    dynamics = float(np.max(np.linalg.norm(positions[1:] - recon, axis=1)))
    speed = max(0.0, float(np.max(np.linalg.norm(velocities, axis=1))) - cfg.v_max)
    collision = 0.0
    for _, tau, center, radius in constraints:
        collision = max(collision, radius - float(np.linalg.norm(positions[tau] - center)))
    return PlanCheck(
        initial_residual=initial,
        dynamics_residual=dynamics,
        speed_residual=speed,
        collision_residual=max(0.0, collision),
    )


def _run_scp(
    sub: _Subproblem, initial: np.ndarray, constraints: list[_Constraint], cfg: MpcConfig
) -> tuple[tuple[np.ndarray, np.ndarray] | None, int, int, bool]:
    """Iterate linearize-and-solve from ``initial``.

    Returns (solution or None, subproblem solves, outer iterations,
    converged).  None means the very first subproblem failed; a later
    failure just stops refinement because the previous iterate is already
    truly feasible.
    """
    iterate = initial
    best: tuple[np.ndarray, np.ndarray] | None = None
    solves = 0
    outer_done = 0
    converged = False
    for outer in range(1, cfg.scp_max_iter + 1):
        result = sub.solve(iterate, constraints)
        solves += 1
        outer_done = outer
        if result is None:
            if best is None:
                return None, solves, outer_done, False
            break
        positions, velocities = result
        displacement = float(np.max(np.linalg.norm(positions - iterate, axis=1)))
        best = result
        iterate = positions
        if not constraints or displacement < cfg.scp_tol:
            converged = True
            break
    return best, solves, outer_done, converged


def plan(
    state: WorldState,
    goal: Vec2,
    predictions: HorizonPrediction,
    radii: ConformalRadii,
    prev_plan: RobotPlan | None,
    cfg: MpcConfig,
) -> RobotPlan:
    """Plan ``cfg.t_mpc`` velocity steps from the current robot position.

    Exclusion constraints cover steps 1..t_pred around every predicted human
    position, inflated by the calibrated radius for that step.  When
    ``prev_plan`` is given it serves both as the proximal-cost target and as
    the first linearization point; otherwise the proximal term is dropped
    and iteration starts from a stop-short straight profile.

    A returned plan is labeled feasible only if it passes the same residual
    audit exposed by ``check_plan``.
    """
    if abs(state.dt - cfg.dt) > 1e-12:
        raise ValueError(f"world dt {state.dt} does not match planner dt {cfg.dt}")
    if predictions.horizon < cfg.t_pred:
        raise ValueError(f"predictions cover {predictions.horizon} steps, need {cfg.t_pred}")
    if radii.t_pred != cfg.t_pred:
        raise ValueError(f"radii cover {radii.t_pred} steps, need {cfg.t_pred}")
    x0 = state.robot.position.to_array()
    g = goal.to_array()
    constraints = _constraint_list(predictions, radii, cfg)

    prev_positions: np.ndarray | None = None
    if prev_plan is not None:
        if prev_plan.horizon != cfg.t_mpc:
            raise ValueError(
                f"previous plan spans {prev_plan.horizon} steps, config wants {cfg.t_mpc}"
            )
        if float(np.linalg.norm(prev_plan.positions[0] - x0)) > 1e-9:
            raise ValueError("previous plan does not start at the current robot position")
        prev_positions = prev_plan.positions

    sub = _Subproblem(x0, g, prev_positions, cfg)
    profile = _stop_positions(x0, g, constraints, cfg)

    reinitialized = False
    dropped: tuple[tuple[int, int], ...] = ()
    first_iterate = prev_positions if prev_positions is not None else _bowed(profile, x0, g)
    result, total_solves, outers, converged = _run_scp(sub, first_iterate, constraints, cfg)

    if result is None and prev_positions is not None:
        reinitialized = True
        result, solves, outers, converged = _run_scp(sub, _bowed(profile, x0, g), constraints, cfg)
        total_solves += solves

    if result is None:
        kept, deep = _deep_violations(profile, constraints, cfg)
        if deep:
            dropped = tuple((i, tau) for i, tau, _, _ in deep)
            result, solves, outers, converged = _run_scp(sub, _bowed(profile, x0, g), kept, cfg)
            total_solves += solves

    if result is None:
        positions = profile
        velocities = np.diff(profile, axis=0) / cfg.dt
        outers = 0
        converged = False
    else:
        velocities = _clamp_speeds(result[1], cfg.v_max)
        positions = np.vstack([x0, x0 + cfg.dt * np.cumsum(velocities, axis=0)])

    check = _residuals(positions, velocities, constraints, x0, cfg)
    status = PlanStatus.FEASIBLE if result is not None and check.ok else PlanStatus.INFEASIBLE
    return RobotPlan(
        positions=positions,
        velocities=velocities,
        dt=cfg.dt,
        status=status,
        objective=evaluate_objective(positions, velocities, goal, cfg, prev_positions),
        max_residual=check.max_residual,
        diagnostics=SolveDiagnostics(
            outer_iterations=outers,
            subproblem_solves=total_solves,
            converged=converged,
            reinitialized=reinitialized,
            dropped=dropped,
        ),
    )


def check_plan(
    candidate: RobotPlan,
    predictions: HorizonPrediction,
    radii: ConformalRadii,
    cfg: MpcConfig,
    start: Vec2 | None = None,
) -> PlanCheck:
    """Independent residual audit of a plan against a prediction set.

    Reports the worst violation per constraint family.  The initial-condition
    family is only measurable when ``start`` is supplied.
    """
    if candidate.horizon != cfg.t_mpc:
        raise ValueError(f"plan spans {candidate.horizon} steps, config wants {cfg.t_mpc}")
    if predictions.horizon < cfg.t_pred:
        raise ValueError(f"predictions cover {predictions.horizon} steps, need {cfg.t_pred}")
    if radii.t_pred != cfg.t_pred:
        raise ValueError(f"radii cover {radii.t_pred} steps, need {cfg.t_pred}")
    constraints = _constraint_list(predictions, radii, cfg)
    return _residuals(
        candidate.positions,
        candidate.velocities,
        constraints,
        None if start is None else start.to_array(),
        cfg,
    )


def stationary_plan(
    position: Vec2, goal: Vec2, cfg: MpcConfig, status: PlanStatus = PlanStatus.INFEASIBLE
) -> RobotPlan:
    """All-zero-velocity plan used as the last-resort fallback.

    Dynamics, speed, and initial condition are exact by construction; whether
    holding still clears the exclusion discs depends on predictions the
    caller can audit via ``check_plan``.
    """
    positions = np.tile(position.to_array(), (cfg.t_mpc + 1, 1))
    velocities = np.zeros((cfg.t_mpc, 2))
    return RobotPlan(
        positions=positions,
        velocities=velocities,
        dt=cfg.dt,
        status=status,
        objective=evaluate_objective(positions, velocities, goal, cfg),
        max_residual=0.0,
    )
