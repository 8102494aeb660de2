"""Cartesian column robot chasing the proxy under speed and safety limits.

The robot pursues the proxy with a distance-dependent speed cap matching the
measured drive profile (slow for short hops, fast for long hauls), a fixed
acceleration limit, a software stop at the rail margins, a latched e-stop,
and an automatic halt when user tracking drops out for too long.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import Arena, SimConfig, UserState, Vec2, clamp_to_arena
from .proxy import ProxyState

STATUS_ACTIVE = "active"
STATUS_TRACKING_LOSS = "halted_tracking_loss"
STATUS_ESTOP = "halted_estop"
STATUS_RAIL_LIMIT = "halted_rail_limit"

# Drive speed profile: short hops crawl, long hauls run.
SPEED_NEAR = 0.5
SPEED_FAR = 1.1
RAMP_LO = 0.8
RAMP_HI = 1.0

# Discrete pursuit would teleport without a slew limit on velocity.
ACCEL_LIMIT = 3.0


@dataclass(frozen=True)
class RobotState:
    position: Vec2
    velocity: Vec2 = Vec2(0.0, 0.0)
    status: str = STATUS_ACTIVE
    # Tracker bookkeeping: when the user was last seen, and whether the
    # current frame's tracking is valid.
    last_tracked_time: float | None = None
    tracking_valid: bool = True


def speed_cap(remaining: float) -> float:
    """Maximum drive speed for a given remaining travel distance."""
    if remaining < 0:
        raise ValueError("remaining distance must be >= 0")
    if remaining <= RAMP_LO:
        return SPEED_NEAR
    if remaining >= RAMP_HI:
        return SPEED_FAR
    t = (remaining - RAMP_LO) / (RAMP_HI - RAMP_LO)
    return SPEED_NEAR + t * (SPEED_FAR - SPEED_NEAR)


def latch_estop(robot: RobotState) -> RobotState:
    return replace(robot, velocity=Vec2(0.0, 0.0), status=STATUS_ESTOP)


def release_estop(robot: RobotState) -> RobotState:
    """Release is refused while tracking is invalid: the halt downgrades."""
    if robot.status != STATUS_ESTOP:
        return robot
    if not robot.tracking_valid:
        return replace(robot, status=STATUS_TRACKING_LOSS)
    return replace(robot, status=STATUS_ACTIVE)


def step_robot(
    robot: RobotState,
    proxy: ProxyState,
    user: UserState,
    arena: Arena,
    config: SimConfig,
) -> RobotState:
    """Advance the robot one fixed step of proxy pursuit with safety stops."""
    if user.tracked:
        last_seen = user.time
    else:
        # Unseen since the last tracked frame; a loss on the very first
        # frame counts from that frame.
        last_seen = robot.last_tracked_time if robot.last_tracked_time is not None else user.time

    if robot.status == STATUS_ESTOP:
        return replace(robot, velocity=Vec2(0.0, 0.0),
                       last_tracked_time=last_seen, tracking_valid=user.tracked)

    if not user.tracked and user.time - last_seen > config.tracking_loss_timeout:
        return replace(
            robot,
            velocity=Vec2(0.0, 0.0),
            status=STATUS_TRACKING_LOSS,
            last_tracked_time=last_seen,
            tracking_valid=False,
        )

    dt = config.dt
    gap = proxy.position - robot.position
    dist = gap.norm()
    cap = speed_cap(dist)

    # Pursuit with feedforward: match the proxy's velocity plus a closing
    # component limited to what the acceleration bound can still brake away
    # before arrival (a bare gap/dt law overshoots and rings).
    if dist > 1e-12:
        closing = min(dist / dt, math.sqrt(2.0 * ACCEL_LIMIT * dist))
        desired = proxy.velocity + gap * (closing / dist)
    else:
        desired = proxy.velocity
    speed = desired.norm()
    if speed > cap:
        desired = desired * (cap / speed)

    dv = desired - robot.velocity
    dv_norm = dv.norm()
    max_dv = ACCEL_LIMIT * dt
    if dv_norm > max_dv:
        dv = dv * (max_dv / dv_norm)
    v = robot.velocity + dv

    # The cap is absolute: braking to honor it is never slew-limited.
    speed = v.norm()
    if speed > cap:
        v = v * (cap / speed)

    p = Vec2(robot.position.x + v.x * dt, robot.position.y + v.y * dt)
    clamped = clamp_to_arena(p, arena)
    if clamped.x != p.x or clamped.y != p.y:
        return RobotState(clamped, Vec2(0.0, 0.0), STATUS_RAIL_LIMIT,
                          last_seen, user.tracked)
    return RobotState(p, v, STATUS_ACTIVE, last_seen, user.tracked)
