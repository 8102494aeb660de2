"""Single authoritative frame pipeline: intention -> command -> proxy -> robot.

Batch trials, trace replay and the live service all step through this one
class, which is what makes a recorded live session replay bit-identically.
Scene edits (moving objects, changing omega, e-stop, ...) arrive as events;
the same event dicts are written into traces and re-applied on replay.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .geometry import VOI, Arena, SimConfig, UserState, Vec2, clamp_to_arena
from .intention import CommandPosition, WeightVector, command_position, compute_weights
from .proxy import ObstacleState, ProxyState, obstacle_radius, step_proxy
from .robot import RobotState, latch_estop, release_estop, step_robot


class EngineError(ValueError):
    """An event could not be applied; engine state is unchanged."""


@dataclass(frozen=True)
class FrameRecord:
    """Everything the pipeline produced for one frame."""

    t: float
    user: UserState
    weights: WeightVector | None
    command: CommandPosition
    obstacle_radius: float
    proxy: ProxyState
    robot: RobotState


class SimEngine:
    def __init__(
        self,
        arena: Arena,
        vois: list[VOI],
        config: SimConfig,
        start: Vec2 | None = None,
        proxy: ProxyState | None = None,
        robot: RobotState | None = None,
        extra_obstacles: list[ObstacleState] | None = None,
    ):
        self.arena = arena
        self.vois = list(vois)
        self.config = config
        home = start if start is not None else Vec2(arena.width / 2, arena.length / 2)
        home = clamp_to_arena(home, arena)
        self.proxy = proxy if proxy is not None else ProxyState(home)
        self.robot = robot if robot is not None else RobotState(home)
        self.extra_obstacles = list(extra_obstacles or [])
        self.weights: WeightVector | None = None
        self.command = CommandPosition(self.robot.position, degenerate=True)
        self.last_obstacle_radius = config.obstacle_radius_far

    def step(self, user: UserState) -> FrameRecord:
        """Advance one frame given the user state for that frame.

        While the user is untracked (or the scene is empty) the weights and
        command hold their previous values; the safety stops in the robot
        stepper take care of halting.
        """
        if user.tracked and self.vois:
            self.weights = compute_weights(user, self.vois, self.config)
            self.command = command_position(self.weights, self.vois, self.command, self.arena)
        if self.vois:
            radius = obstacle_radius(user, self.vois, self.config)
        else:
            radius = self.config.obstacle_radius_far
        self.last_obstacle_radius = radius
        obstacle = ObstacleState(user.pose.position, radius, self.config.user_obstacle_band)
        self.proxy = step_proxy(
            self.proxy, self.command, obstacle, self.arena, self.config, self.extra_obstacles
        )
        self.robot = step_robot(self.robot, self.proxy, user, self.arena, self.config)
        return FrameRecord(
            t=user.time,
            user=user,
            weights=self.weights,
            command=self.command,
            obstacle_radius=radius,
            proxy=self.proxy,
            robot=self.robot,
        )

    # -- scene events (shared by the live service and trace replay) --

    def apply_event(self, event: dict) -> None:
        kind = event.get("type")
        handler = getattr(self, f"_ev_{kind}", None)
        if handler is None:
            raise EngineError(f"unknown event type {kind!r}")
        handler(event)

    def _voi_index(self, voi_id: str) -> int:
        for i, v in enumerate(self.vois):
            if v.id == voi_id:
                return i
        raise EngineError(f"no VOI with id {voi_id!r}")

    def _check_inside(self, p: Vec2) -> None:
        if not self.arena.contains(p):
            raise EngineError(f"position ({p.x}, {p.y}) is outside the arena")

    def _ev_set_omega(self, event: dict) -> None:
        value = float(event["value"])
        if not 0.0 <= value <= 1.0:
            raise EngineError("omega must be within [0, 1]")
        self.config = replace(self.config, omega=value)

    def _ev_add_voi(self, event: dict) -> None:
        if any(v.id == event["id"] for v in self.vois):
            raise EngineError(f"duplicate VOI id {event['id']!r}")
        p = Vec2(float(event["x"]), float(event["y"]))
        self._check_inside(p)
        try:
            voi = VOI(
                id=str(event["id"]),
                position=p,
                radius=float(event.get("radius", 0.05)),
                prior=float(event.get("prior", 1.0)),
            )
        except ValueError as e:
            raise EngineError(str(e)) from e
        self.vois.append(voi)

    def _ev_move_voi(self, event: dict) -> None:
        i = self._voi_index(event["id"])
        p = Vec2(float(event["x"]), float(event["y"]))
        self._check_inside(p)
        self.vois[i] = replace(self.vois[i], position=p)

    def _ev_remove_voi(self, event: dict) -> None:
        del self.vois[self._voi_index(event["id"])]

    def _ev_set_prior(self, event: dict) -> None:
        i = self._voi_index(event["id"])
        prior = float(event["prior"])
        if not 0.0 <= prior <= 1.0:
            raise EngineError("prior must be within [0, 1]")
        self.vois[i] = replace(self.vois[i], prior=prior)

    def _ev_estop(self, event: dict) -> None:
        self.robot = latch_estop(self.robot)

    def _ev_release_estop(self, event: dict) -> None:
        self.robot = release_estop(self.robot)
