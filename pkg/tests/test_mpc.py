"""Planner tests: cone-QP solutions against an independent nonlinear-programming oracle.

The oracle solves the same program with scipy's SLSQP over the stacked
velocity variable, using the true quadratic disc-exclusion constraints
instead of the planner's sequential convexification.  It is initialized from
a locally rebuilt straight-line profile so it shares no code with the
implementation under test.
"""

import numpy as np
import pytest
from scipy.optimize import minimize

from icpnav import mpc
from icpnav.conformal import ConformalRadii
from icpnav.geometry import AgentState, HorizonPrediction, Vec2, WorldState
from icpnav.mpc import MpcConfig, PlanStatus, RobotPlan, SolveDiagnostics


def make_state(x: float, y: float, dt: float = 0.25) -> WorldState:
    robot = AgentState(Vec2(x, y), Vec2(0.0, 0.0), Vec2(0.0, 0.0), 0.4)
    return WorldState(time_step=0, robot=robot, humans=(), dt=dt)


def static_pred(centers, t_pred: int) -> HorizonPrediction:
    arr = np.array([[c] * t_pred for c in centers], dtype=float).reshape(len(centers), t_pred, 2)
    return HorizonPrediction(arr)


def zero_radii(t_pred: int) -> ConformalRadii:
    return ConformalRadii.zeros(t_pred, 0.05)


def const_radii(value: float, t_pred: int) -> ConformalRadii:
    return ConformalRadii(np.full(t_pred, value), 0.05, 20)


def straight_profile(x0, goal, cfg: MpcConfig) -> np.ndarray:
    """Independent full-speed-toward-goal profile for oracle initialization."""
    pos = [np.array(x0, dtype=float)]
    for _ in range(cfg.t_mpc):
        d = np.asarray(goal, dtype=float) - pos[-1]
        dist = float(np.linalg.norm(d))
        step = d if dist <= cfg.v_max * cfg.dt else d * (cfg.v_max * cfg.dt / dist)
        pos.append(pos[-1] + step)
    return np.array(pos)


def slsqp_oracle(x0, goal, cfg: MpcConfig, discs, prev_positions=None):
    """Solve the planner's program with SLSQP on the true nonlinear constraints.

    discs is a list of (tau, center, radius) exclusion constraints.
    Returns (objective, positions, scipy result).
    """
    steps, dt = cfg.t_mpc, cfg.dt
    x0 = np.asarray(x0, dtype=float)
    goal_arr = np.asarray(goal, dtype=float)

    def unpack(u):
        v = u.reshape(steps, 2)
        return np.vstack([x0, x0 + dt * np.cumsum(v, axis=0)]), v

    def objective(u):
        x, v = unpack(u)
        total = cfg.omega_g * np.sum((x - goal_arr) ** 2)
        if steps >= 2:
            total += cfg.omega_v * np.sum(np.diff(v, axis=0) ** 2)
        if prev_positions is not None:
            total += cfg.omega_reg * np.sum((x - prev_positions) ** 2)
        return float(total)

    cons = []
    for k in range(steps):
        cons.append(
            {"type": "ineq", "fun": lambda u, k=k: cfg.v_max**2 - float(np.sum(u[2 * k : 2 * k + 2] ** 2))}
        )
    for tau, center, radius in discs:
        cons.append(
            {
                "type": "ineq",
                "fun": lambda u, tau=tau, c=np.asarray(center, dtype=float), r=radius: float(
                    np.sum((unpack(u)[0][tau] - c) ** 2) - r * r
                ),
            }
        )
    init = (np.diff(straight_profile(x0, goal_arr, cfg), axis=0) / dt).reshape(-1)
    res = minimize(
        objective, init, method="SLSQP", constraints=cons, options={"maxiter": 500, "ftol": 1e-12}
    )
    positions, _ = unpack(res.x)
    return float(res.fun), positions, res


def rel_diff(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-12)


class TestMpcConfig:
    def test_defaults(self):
        cfg = MpcConfig()
        assert cfg.t_mpc == 5 and cfg.t_pred == 5
        assert cfg.dt == 0.25 and cfg.v_max == 1.0
        assert (cfg.omega_g, cfg.omega_v, cfg.omega_reg) == (1.0, 5.0, 0.5)
        assert cfg.r_r == 0.4 and cfg.r_h == 0.4
        assert cfg.clearance == pytest.approx(0.8)

    def test_horizon_ordering_enforced(self):
        with pytest.raises(ValueError, match="t_mpc >= t_pred"):
            MpcConfig(t_mpc=3, t_pred=4)
        with pytest.raises(ValueError, match="t_mpc >= t_pred"):
            MpcConfig(t_pred=0)

    def test_weight_and_radius_validation(self):
        with pytest.raises(ValueError, match="omega_v"):
            MpcConfig(omega_v=-1.0)
        with pytest.raises(ValueError, match="r_h"):
            MpcConfig(r_h=0.0)
        with pytest.raises(ValueError, match="scp_max_iter"):
            MpcConfig(scp_max_iter=0)
        MpcConfig(omega_g=0.0, omega_v=0.0, omega_reg=0.0)  # zero weights are allowed

    def test_dt_and_speed_validation(self):
        with pytest.raises(ValueError, match="dt"):
            MpcConfig(dt=0.0)
        with pytest.raises(ValueError, match="v_max"):
            MpcConfig(v_max=-1.0)


class TestEvaluateObjective:
    def test_goal_term_hand_computed(self):
        cfg = MpcConfig(t_mpc=2, t_pred=1)
        positions = np.array([[0.0, 0.0], [0.25, 0.0], [0.5, 0.0]])
        velocities = np.array([[1.0, 0.0], [1.0, 0.0]])
        # goal distances squared: 0.25, 0.0625, 0; no velocity change
        value = mpc.evaluate_objective(positions, velocities, Vec2(0.5, 0.0), cfg)
        assert value == pytest.approx(0.3125, rel=1e-12)

    def test_proximal_term_hand_computed(self):
        cfg = MpcConfig(t_mpc=2, t_pred=1)
        positions = np.array([[0.0, 0.0], [0.25, 0.0], [0.5, 0.0]])
        velocities = np.array([[1.0, 0.0], [1.0, 0.0]])
        prev = positions + np.array([0.0, 0.1])
        value = mpc.evaluate_objective(positions, velocities, Vec2(0.5, 0.0), cfg, prev)
        assert value == pytest.approx(0.3125 + 0.5 * 3 * 0.01, rel=1e-12)

    def test_smoothing_term_hand_computed(self):
        cfg = MpcConfig(t_mpc=2, t_pred=1)
        positions = np.array([[0.0, 0.0], [0.25, 0.0], [0.25, 0.25]])
        velocities = np.array([[1.0, 0.0], [0.0, 1.0]])
        # goal distances squared: 0.125, 0.0625, 0; velocity change (-1, 1)
        value = mpc.evaluate_objective(positions, velocities, Vec2(0.25, 0.25), cfg)
        assert value == pytest.approx(0.1875 + 5.0 * 2.0, rel=1e-12)

    def test_prev_shape_mismatch_rejected(self):
        cfg = MpcConfig(t_mpc=2, t_pred=1)
        positions = np.zeros((3, 2))
        velocities = np.zeros((2, 2))
        with pytest.raises(ValueError, match="shape"):
            mpc.evaluate_objective(positions, velocities, Vec2(0, 0), cfg, np.zeros((4, 2)))


class TestRobotPlanType:
    def test_shape_validation(self):
        with pytest.raises(ValueError, match="velocities"):
            RobotPlan(np.zeros((3, 2)), np.zeros((3, 2)), 0.25, PlanStatus.FEASIBLE, 0.0, 0.0)
        with pytest.raises(ValueError, match="positions"):
            RobotPlan(np.zeros((1, 2)), np.zeros((0, 2)), 0.25, PlanStatus.FEASIBLE, 0.0, 0.0)
        with pytest.raises(ValueError, match="finite"):
            RobotPlan(
                np.full((3, 2), np.nan), np.zeros((2, 2)), 0.25, PlanStatus.FEASIBLE, 0.0, 0.0
            )
        with pytest.raises(ValueError, match="dt"):
            RobotPlan(np.zeros((3, 2)), np.zeros((2, 2)), 0.0, PlanStatus.FEASIBLE, 0.0, 0.0)

    def test_trajectory_roundtrip(self):
        positions = np.array([[0.0, 0.0], [0.2, 0.1], [0.4, 0.2]])
        velocities = np.diff(positions, axis=0) / 0.25
        p = RobotPlan(positions, velocities, 0.25, PlanStatus.FEASIBLE, 0.0, 0.0)
        traj = p.trajectory(start_step=7)
        assert traj.start_step == 7 and traj.dt == 0.25
        assert np.array_equal(traj.positions, positions)
        assert p.horizon == 2
        assert p.start() == Vec2(0.0, 0.0)


class TestPlanStraightLine:
    def test_zero_smoothing_reaches_in_four_steps(self):
        """Goal 1 m away at v_max 1 and dt 0.25: with no smoothing cost the
        optimum is the full-speed profile, landing by step 4 and staying."""
        cfg = MpcConfig(t_mpc=10, t_pred=5, omega_v=0.0)
        p = mpc.plan(
            make_state(0.0, 0.0),
            Vec2(1.0, 0.0),
            HorizonPrediction(np.zeros((0, 5, 2))),
            zero_radii(5),
            None,
            cfg,
        )
        assert p.status is PlanStatus.FEASIBLE
        assert p.diagnostics.converged
        goal = np.array([1.0, 0.0])
        dist = np.linalg.norm(p.positions - goal, axis=1)
        assert np.all(dist[4:] <= 1e-3)
        assert np.max(np.abs(p.positions[:, 1])) <= 1e-9
        assert np.all(np.diff(p.positions[:, 0]) >= -1e-12)

    def test_default_weights_match_convex_oracle(self):
        """With smoothing active the profile glides; the unconstrained program
        is convex, so the cone-QP solution must match SLSQP to high accuracy."""
        cfg = MpcConfig(t_mpc=10, t_pred=5)
        p = mpc.plan(
            make_state(0.0, 0.0),
            Vec2(1.0, 0.0),
            HorizonPrediction(np.zeros((0, 5, 2))),
            zero_radii(5),
            None,
            cfg,
        )
        obj_oracle, pos_oracle, res = slsqp_oracle([0.0, 0.0], [1.0, 0.0], cfg, [])
        assert res.success
        assert rel_diff(p.objective, obj_oracle) <= 1e-5
        assert np.max(np.linalg.norm(p.positions - pos_oracle, axis=1)) <= 1e-3
        assert np.max(np.abs(p.positions[:, 1])) <= 1e-6
        assert np.all(np.diff(p.positions[:, 0]) >= -1e-9)

    def test_already_at_goal_stays(self):
        cfg = MpcConfig()
        p = mpc.plan(
            make_state(1.0, 1.0),
            Vec2(1.0, 1.0),
            HorizonPrediction(np.zeros((0, 5, 2))),
            zero_radii(5),
            None,
            cfg,
        )
        assert p.status is PlanStatus.FEASIBLE
        assert np.max(np.linalg.norm(p.velocities, axis=1)) <= 1e-6

    def test_single_step_horizon(self):
        cfg = MpcConfig(t_mpc=1, t_pred=1)
        p = mpc.plan(
            make_state(0.0, 0.0),
            Vec2(1.0, 0.0),
            HorizonPrediction(np.zeros((0, 1, 2))),
            zero_radii(1),
            None,
            cfg,
        )
        assert p.status is PlanStatus.FEASIBLE
        assert p.horizon == 1
        assert np.linalg.norm(p.velocities[0] - np.array([1.0, 0.0])) <= 1e-3
        check = mpc.check_plan(
            p, HorizonPrediction(np.zeros((0, 1, 2))), zero_radii(1), cfg, start=Vec2(0.0, 0.0)
        )
        assert check.ok


class TestPlanAroundBlocker:
    """A static human on or near the straight path to the goal."""

    def setup_method(self):
        self.cfg = MpcConfig(t_mpc=10, t_pred=10)
        self.state = make_state(-1.0, 0.0)
        self.goal = Vec2(2.0, 0.0)
        self.blocker = np.array([0.5, 0.0])
        self.pred = static_pred([(0.5, 0.0)], 10)

    def test_collinear_blocker_clearance(self):
        p = mpc.plan(self.state, self.goal, self.pred, zero_radii(10), None, self.cfg)
        assert p.status is PlanStatus.FEASIBLE
        clearance = np.min(np.linalg.norm(p.positions[1:] - self.blocker, axis=1))
        assert clearance >= 0.8 - 1e-6
        assert p.positions[-1][0] > 0.8  # routes past the blocker, not just short of it
        assert mpc.check_plan(p, self.pred, zero_radii(10), self.cfg, start=Vec2(-1.0, 0.0)).ok

    def test_inflated_radii_shrink_feasible_set(self):
        base = mpc.plan(self.state, self.goal, self.pred, zero_radii(10), None, self.cfg)
        inflated = mpc.plan(self.state, self.goal, self.pred, const_radii(0.2, 10), None, self.cfg)
        assert inflated.status is PlanStatus.FEASIBLE
        clearance = np.min(np.linalg.norm(inflated.positions[1:] - self.blocker, axis=1))
        assert clearance >= 1.0 - 1e-6
        assert inflated.objective >= base.objective - 1e-9

    def test_side_blocker_matches_nonlinear_oracle(self):
        """Off-axis blocker: convexification and the NLP oracle find the same
        local optimum (both route on the cheaper side)."""
        cfg = MpcConfig()
        pred = static_pred([(0.5, 0.3)], 5)
        p = mpc.plan(make_state(-1.0, 0.0), self.goal, pred, zero_radii(5), None, cfg)
        discs = [(tau, (0.5, 0.3), 0.8) for tau in range(1, 6)]
        obj_oracle, pos_oracle, res = slsqp_oracle([-1.0, 0.0], [2.0, 0.0], cfg, discs)
        assert res.success
        assert p.status is PlanStatus.FEASIBLE
        assert rel_diff(p.objective, obj_oracle) <= 1e-6
        assert np.max(np.linalg.norm(p.positions - pos_oracle, axis=1)) <= 1e-3

    def test_exclusion_only_spans_prediction_horizon(self):
        """Steps beyond t_pred carry no exclusion constraints even when the
        planning horizon is longer."""
        cfg = MpcConfig(t_mpc=8, t_pred=2)
        pred = static_pred([(1.0, 0.0)], 2)
        p = mpc.plan(make_state(0.0, 0.0), Vec2(2.0, 0.0), pred, zero_radii(2), None, cfg)
        assert p.status is PlanStatus.FEASIBLE
        dist = np.linalg.norm(p.positions - np.array([1.0, 0.0]), axis=1)
        assert dist[1] >= 0.8 - 1e-6 and dist[2] >= 0.8 - 1e-6
        assert np.min(dist[3:]) < 0.5

    def test_boxed_in_is_infeasible_with_stationary_best(self):
        """A human predicted 0.35 m ahead forever leaves no reachable point
        outside the 0.8 m disc at step one; the stop profile is returned."""
        cfg = MpcConfig()
        pred = static_pred([(0.35, 0.0)], 5)
        p = mpc.plan(make_state(0.0, 0.0), Vec2(2.0, 0.0), pred, zero_radii(5), None, cfg)
        assert p.status is PlanStatus.INFEASIBLE
        assert np.allclose(p.positions, 0.0)
        assert np.allclose(p.velocities, 0.0)
        assert p.max_residual == pytest.approx(0.8 - 0.35, abs=1e-12)
        assert p.diagnostics.subproblem_solves == 1
        assert not p.diagnostics.converged

    def test_pathological_violation_dropped(self):
        """A human predicted exactly on the robot with a large radius is a
        predictor pathology: its constraints are dropped so the solve can
        still produce a useful best-effort iterate, but the plan is labeled
        infeasible because the full constraint set remains violated."""
        cfg = MpcConfig()
        pred = static_pred([(0.0, 0.0), (5.0, 5.0)], 5)
        p = mpc.plan(make_state(0.0, 0.0), Vec2(2.0, 0.0), pred, const_radii(1.0, 5), None, cfg)
        assert p.status is PlanStatus.INFEASIBLE
        assert p.diagnostics.dropped == tuple((0, tau) for tau in range(1, 6))
        assert p.diagnostics.subproblem_solves >= 2
        assert p.positions[-1][0] >= 1.0  # best effort still makes progress
        assert p.max_residual > 1.0


class TestPrevPlanHandling:
    def setup_method(self):
        self.cfg = MpcConfig()
        self.state = make_state(-1.0, 0.0)
        self.goal = Vec2(2.0, 0.0)
        self.pred = static_pred([(0.5, 0.3)], 5)
        self.radii = zero_radii(5)

    def test_proximal_objective_bound(self):
        """Re-solving against a feasible previous plan can never end up worse
        than keeping that plan, because the previous plan stays feasible for
        the re-solve's first subproblem."""
        p0 = mpc.plan(self.state, self.goal, self.pred, self.radii, None, self.cfg)
        assert p0.status is PlanStatus.FEASIBLE
        p1 = mpc.plan(self.state, self.goal, self.pred, self.radii, p0, self.cfg)
        prev_obj = mpc.evaluate_objective(
            p0.positions, p0.velocities, self.goal, self.cfg, p0.positions
        )
        assert p1.objective <= prev_obj + 1e-8

    def test_large_proximal_weight_pins_resolve(self):
        cfg = MpcConfig(omega_reg=100.0)
        p0 = mpc.plan(self.state, self.goal, self.pred, self.radii, None, cfg)
        p1 = mpc.plan(self.state, self.goal, self.pred, self.radii, p0, cfg)
        assert np.max(np.linalg.norm(p1.positions - p0.positions, axis=1)) <= 1e-4

    def test_proximal_weight_inert_without_prev_plan(self):
        big = MpcConfig(omega_reg=1e6)
        none = MpcConfig(omega_reg=0.0)
        p_big = mpc.plan(self.state, self.goal, self.pred, self.radii, None, big)
        p_none = mpc.plan(self.state, self.goal, self.pred, self.radii, None, none)
        assert np.array_equal(p_big.positions, p_none.positions)
        assert np.array_equal(p_big.velocities, p_none.velocities)

    def test_prev_start_mismatch_rejected(self):
        p0 = mpc.plan(self.state, self.goal, self.pred, self.radii, None, self.cfg)
        other = make_state(0.0, 0.0)
        with pytest.raises(ValueError, match="start"):
            mpc.plan(other, self.goal, self.pred, self.radii, p0, self.cfg)

    def test_prev_horizon_mismatch_rejected(self):
        p0 = mpc.plan(self.state, self.goal, self.pred, self.radii, None, self.cfg)
        cfg8 = MpcConfig(t_mpc=8, t_pred=5)
        with pytest.raises(ValueError, match="previous plan"):
            mpc.plan(self.state, self.goal, self.pred, self.radii, p0, cfg8)


class TestPlanValidation:
    def test_dt_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dt"):
            mpc.plan(
                make_state(0.0, 0.0, dt=0.1),
                Vec2(1.0, 0.0),
                HorizonPrediction(np.zeros((0, 5, 2))),
                zero_radii(5),
                None,
                MpcConfig(),
            )

    def test_short_predictions_rejected(self):
        with pytest.raises(ValueError, match="predictions"):
            mpc.plan(
                make_state(0.0, 0.0),
                Vec2(1.0, 0.0),
                HorizonPrediction(np.zeros((1, 3, 2))),
                zero_radii(5),
                None,
                MpcConfig(),
            )

    def test_radii_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="radii"):
            mpc.plan(
                make_state(0.0, 0.0),
                Vec2(1.0, 0.0),
                HorizonPrediction(np.zeros((1, 5, 2))),
                zero_radii(3),
                None,
                MpcConfig(),
            )


class TestCheckPlan:
    def test_speed_violation_reported_exactly(self):
        cfg = MpcConfig(t_mpc=2, t_pred=1)
        velocities = np.array([[1.1, 0.0], [0.5, 0.0]])
        positions = np.vstack([[0.0, 0.0], 0.25 * np.cumsum(velocities, axis=0)])
        p = RobotPlan(positions, velocities, 0.25, PlanStatus.INFEASIBLE, 0.0, 0.0)
        check = mpc.check_plan(p, HorizonPrediction(np.zeros((0, 1, 2))), zero_radii(1), cfg)
        assert check.speed_residual == pytest.approx(0.1, rel=1e-12)
        assert not check.ok

    def test_dynamics_and_initial_residuals(self):
        cfg = MpcConfig(t_mpc=2, t_pred=1)
        velocities = np.array([[1.0, 0.0], [1.0, 0.0]])
        positions = np.array([[0.0, 0.0], [0.26, 0.0], [0.51, 0.0]])
        p = RobotPlan(positions, velocities, 0.25, PlanStatus.INFEASIBLE, 0.0, 0.0)
        check = mpc.check_plan(
            p, HorizonPrediction(np.zeros((0, 1, 2))), zero_radii(1), cfg, start=Vec2(0.05, 0.0)
        )
        assert check.initial_residual == pytest.approx(0.05, rel=1e-12)
        assert check.dynamics_residual == pytest.approx(0.01, abs=1e-12)

    def test_collision_residual_exact(self):
        cfg = MpcConfig(t_mpc=2, t_pred=2)
        velocities = np.zeros((2, 2))
        positions = np.zeros((3, 2))
        pred = static_pred([(0.7, 0.0)], 2)
        p = RobotPlan(positions, velocities, 0.25, PlanStatus.INFEASIBLE, 0.0, 0.0)
        check = mpc.check_plan(p, pred, zero_radii(2), cfg)
        assert check.collision_residual == pytest.approx(0.1, rel=1e-12)
        far = static_pred([(5.0, 0.0)], 2)
        assert mpc.check_plan(p, far, zero_radii(2), cfg).collision_residual == 0.0

    def test_feasible_plans_pass_on_random_scenes(self):
        """Every plan labeled feasible must pass the residual audit."""
        cfg = MpcConfig()
        feasible = 0
        for scene in range(20):
            rng = np.random.default_rng(100 + scene)
            x0 = rng.uniform(-2.0, 2.0, 2)
            goal = rng.uniform(-2.0, 2.0, 2)
            n_h = int(rng.integers(1, 4))
            centers = rng.uniform(-2.0, 2.0, (n_h, 2))
            vels = rng.uniform(-0.5, 0.5, (n_h, 2))
            pred = HorizonPrediction(
                np.stack(
                    [np.array([c + v * 0.25 * (t + 1) for t in range(5)]) for c, v in zip(centers, vels)]
                )
            )
            radii = ConformalRadii(rng.uniform(0.0, 0.3, 5), 0.05, 20)
            p = mpc.plan(make_state(*x0), Vec2(*goal), pred, radii, None, cfg)
            if p.status is PlanStatus.FEASIBLE:
                feasible += 1
                check = mpc.check_plan(p, pred, radii, cfg, start=Vec2(*x0))
                assert check.ok, f"scene {scene}: {check}"
                assert p.max_residual <= 1e-4
        assert feasible >= 12

    def test_horizon_mismatch_rejected(self):
        p = RobotPlan(np.zeros((3, 2)), np.zeros((2, 2)), 0.25, PlanStatus.FEASIBLE, 0.0, 0.0)
        with pytest.raises(ValueError, match="plan spans"):
            mpc.check_plan(p, HorizonPrediction(np.zeros((0, 5, 2))), zero_radii(5), MpcConfig())


class TestStationaryPlan:
    def test_holds_position_with_exact_bookkeeping(self):
        cfg = MpcConfig()
        p = mpc.stationary_plan(Vec2(1.0, 2.0), Vec2(3.0, 2.0), cfg)
        assert p.status is PlanStatus.INFEASIBLE
        assert np.all(p.velocities == 0.0)
        assert np.all(p.positions == np.array([1.0, 2.0]))
        # six position samples, each 2 m from the goal
        assert p.objective == pytest.approx(6 * 4.0, rel=1e-12)
        assert p.max_residual == 0.0

    def test_status_override(self):
        cfg = MpcConfig()
        p = mpc.stationary_plan(Vec2(0.0, 0.0), Vec2(1.0, 0.0), cfg, status=PlanStatus.FEASIBLE)
        assert p.status is PlanStatus.FEASIBLE


class TestOracleEquivalence:
    def test_convex_instances_match_oracle(self):
        """Humans placed beyond the reachable tube leave every exclusion
        constraint inactive, so the program is convex and both solvers must
        find the same optimum."""
        rng = np.random.default_rng(7)
        cfg = MpcConfig()
        for _ in range(10):
            x0 = rng.uniform(-2.0, 2.0, 2)
            goal = rng.uniform(-2.0, 2.0, 2)
            reach = float(np.linalg.norm(x0)) + cfg.v_max * cfg.dt * cfg.t_mpc + 2.0
            far = []
            for _i in range(2):
                angle = rng.uniform(0.0, 2.0 * np.pi)
                far.append(((reach + 3.0) * np.cos(angle), (reach + 3.0) * np.sin(angle)))
            pred = static_pred(far, 5)
            p = mpc.plan(make_state(*x0), Vec2(*goal), pred, zero_radii(5), None, cfg)
            assert p.status is PlanStatus.FEASIBLE
            discs = [(tau, c, 0.8) for c in far for tau in range(1, 6)]
            obj_oracle, _, res = slsqp_oracle(x0, goal, cfg, discs)
            assert res.success
            assert rel_diff(p.objective, obj_oracle) <= 1e-5


class TestDeterminism:
    def test_identical_inputs_identical_plans(self):
        cfg = MpcConfig()
        pred = static_pred([(0.5, 0.3)], 5)
        a = mpc.plan(make_state(-1.0, 0.0), Vec2(2.0, 0.0), pred, zero_radii(5), None, cfg)
        b = mpc.plan(make_state(-1.0, 0.0), Vec2(2.0, 0.0), pred, zero_radii(5), None, cfg)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.velocities, b.velocities)
        assert a.objective == b.objective
        assert a.diagnostics == b.diagnostics
