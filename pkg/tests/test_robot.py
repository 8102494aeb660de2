import math

import pytest

from proxsim.geometry import Arena, Pose, SimConfig, UserState, Vec2
from proxsim.proxy import ProxyState
from proxsim.robot import (
    ACCEL_LIMIT,
    RobotState,
    STATUS_ACTIVE,
    STATUS_ESTOP,
    STATUS_RAIL_LIMIT,
    STATUS_TRACKING_LOSS,
    latch_estop,
    release_estop,
    speed_cap,
    step_robot,
)

ARENA = Arena()
CONFIG = SimConfig()


def tracked_user(t=0.0):
    return UserState(Pose(Vec2(2.0, 0.5), 0.0), True, t)


def untracked_user(t=0.0):
    return UserState(Pose(Vec2(2.0, 0.5), 0.0), False, t)


class TestSpeedCap:
    @pytest.mark.parametrize("remaining,expected", [
        (2.0, 1.1),
        (0.5, 0.5),
        (0.9, 0.8),
        (0.8, 0.5),
        (1.0, 1.1),
        (0.0, 0.5),
    ])
    def test_profile(self, remaining, expected):
        assert speed_cap(remaining) == pytest.approx(expected, abs=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            speed_cap(-0.1)


class TestStepRobot:
    def test_fixed_point(self):
        robot = RobotState(Vec2(2.0, 2.0))
        proxy = ProxyState(Vec2(2.0, 2.0))
        out = step_robot(robot, proxy, tracked_user(), ARENA, CONFIG)
        assert out.position == robot.position
        assert out.velocity == Vec2(0.0, 0.0)
        assert out.status == STATUS_ACTIVE

    def test_travel_time_matches_profile_oracle(self):
        # 1D closure of a 2 m gap vs dense integration of the same
        # accel-limited, speed-capped profile
        def oracle_time(distance, dt=1e-4):
            x = v = t = 0.0
            while distance - x > 0.01:
                cap = speed_cap(distance - x)
                brake = math.sqrt(2 * ACCEL_LIMIT * (distance - x))
                v = min(v + ACCEL_LIMIT * dt, cap, brake)
                x += v * dt
                t += dt
            return t

        robot = RobotState(Vec2(0.5, 2.0))
        proxy = ProxyState(Vec2(2.5, 2.0))
        t = 0.0
        while robot.position.distance_to(proxy.position) > 0.01:
            robot = step_robot(robot, proxy, tracked_user(t), ARENA, CONFIG)
            t += CONFIG.dt
            assert t < 10.0
        expected = oracle_time(2.0)
        assert t == pytest.approx(expected, rel=0.10)

    def test_speed_cap_never_exceeded(self):
        robot = RobotState(Vec2(0.1, 0.1))
        proxy = ProxyState(Vec2(3.5, 3.2))
        t = 0.0
        for _ in range(600):
            gap = proxy.position.distance_to(robot.position)
            robot = step_robot(robot, proxy, tracked_user(t), ARENA, CONFIG)
            assert robot.velocity.norm() <= speed_cap(gap) + 1e-9
            t += CONFIG.dt

    def test_tracking_loss_halts_within_timeout_plus_frame(self):
        robot = RobotState(Vec2(1.0, 2.0))
        proxy = ProxyState(Vec2(3.0, 2.0))
        t = 0.0
        # tracked for a while, then the tracker drops out
        for _ in range(30):
            t += CONFIG.dt
            robot = step_robot(robot, proxy, tracked_user(t), ARENA, CONFIG)
        assert robot.status == STATUS_ACTIVE
        lost_at = t
        halted_at = None
        for _ in range(60):
            t += CONFIG.dt
            robot = step_robot(robot, proxy, untracked_user(t), ARENA, CONFIG)
            if robot.status == STATUS_TRACKING_LOSS:
                halted_at = t
                break
        assert halted_at is not None
        assert halted_at - lost_at <= CONFIG.tracking_loss_timeout + CONFIG.dt + 1e-9
        assert robot.velocity == Vec2(0.0, 0.0)

    def test_halted_position_constant_until_tracking_returns(self):
        robot = RobotState(Vec2(1.0, 2.0), status=STATUS_TRACKING_LOSS,
                           last_tracked_time=0.0, tracking_valid=False)
        proxy = ProxyState(Vec2(3.0, 2.0))
        held = robot.position
        t = 1.0
        for _ in range(20):
            t += CONFIG.dt
            robot = step_robot(robot, proxy, untracked_user(t), ARENA, CONFIG)
            assert robot.position == held
        robot = step_robot(robot, proxy, tracked_user(t + CONFIG.dt), ARENA, CONFIG)
        assert robot.status == STATUS_ACTIVE

    def test_tracking_hold_under_timeout_keeps_active(self):
        robot = RobotState(Vec2(1.0, 2.0))
        proxy = ProxyState(Vec2(1.0, 2.0))
        t = 0.0
        for _ in range(int(0.4 / CONFIG.dt)):
            t += CONFIG.dt
            robot = step_robot(robot, proxy, untracked_user(t), ARENA, CONFIG)
        assert robot.status == STATUS_ACTIVE

    def test_rail_limit_halt_and_recovery(self):
        # robot driving hard at the wall: the clamp must engage and halt it
        robot = RobotState(Vec2(0.05, 2.0), Vec2(-0.5, 0.0))
        proxy = ProxyState(Vec2(0.021, 2.0))
        user = tracked_user()
        out = step_robot(robot, proxy, user, ARENA, CONFIG)
        if out.status == STATUS_RAIL_LIMIT:
            assert out.velocity == Vec2(0.0, 0.0)
            assert out.position.x >= ARENA.safety_margin - 1e-12
        # pursuit of an interior proxy resumes
        proxy2 = ProxyState(Vec2(2.0, 2.0))
        out2 = step_robot(out, proxy2, user, ARENA, CONFIG)
        assert out2.status == STATUS_ACTIVE

    def test_steady_state_gap_below_two_centimeters(self):
        # proxy drifting slower than 0.4 m/s: within a second of tracking
        # the robot closes to < 2 cm and stays there
        robot = RobotState(Vec2(1.2, 2.0))
        t = 0.0
        proxy_x = 1.3
        drift = Vec2(0.35, 0.0)
        for k in range(int(2.0 / CONFIG.dt)):
            t += CONFIG.dt
            proxy_x += drift.x * CONFIG.dt
            robot = step_robot(robot, ProxyState(Vec2(proxy_x, 2.0), drift),
                               tracked_user(t), ARENA, CONFIG)
            if k >= int(1.0 / CONFIG.dt):
                assert robot.position.distance_to(Vec2(proxy_x, 2.0)) < 0.02


class TestEstop:
    def test_latch(self):
        robot = RobotState(Vec2(1.0, 1.0), Vec2(0.5, 0.0))
        latched = latch_estop(robot)
        assert latched.status == STATUS_ESTOP
        assert latched.velocity == Vec2(0.0, 0.0)

    def test_latched_ignores_pursuit(self):
        robot = latch_estop(RobotState(Vec2(1.0, 1.0)))
        proxy = ProxyState(Vec2(3.0, 3.0))
        out = step_robot(robot, proxy, tracked_user(1.0), ARENA, CONFIG)
        assert out.status == STATUS_ESTOP
        assert out.position == robot.position

    def test_release_with_tracking(self):
        robot = latch_estop(RobotState(Vec2(1.0, 1.0)))
        robot = step_robot(robot, ProxyState(Vec2(1, 1)), tracked_user(1.0), ARENA, CONFIG)
        released = release_estop(robot)
        assert released.status == STATUS_ACTIVE

    def test_release_without_tracking_downgrades(self):
        robot = latch_estop(RobotState(Vec2(1.0, 1.0)))
        robot = step_robot(robot, ProxyState(Vec2(1, 1)), untracked_user(1.0), ARENA, CONFIG)
        released = release_estop(robot)
        assert released.status == STATUS_TRACKING_LOSS

    def test_release_noop_when_not_latched(self):
        robot = RobotState(Vec2(1.0, 1.0))
        assert release_estop(robot) == robot
