"""Live simulation session: steering, scene edits, pause/reset, recording.

One session owns one engine. Messages are queued and applied at the start of
the next physics step in arrival order; physics advances at the fixed frame
rate while unpaused. Everything here is synchronous so tests can drive a
session frame by frame; the async service loop lives in app.py.
"""

from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable

from ..engine import EngineError, FrameRecord, SimEngine
from ..geometry import Pose, SimConfig, UserState, Vec2, normalize_angle
from ..harness import generate_trial
from ..persistence import Scenario, TraceMeta, TraceWriter, frame_from_record, scenario_to_dict
from . import protocol
from .protocol import (
    AckReply,
    ErrorReply,
    MetricsView,
    ServerTick,
    WarningNotice,
)

# Messages that edit the scene are also written into a recording so the
# trace replays bit-identically.
_RECORDED_EVENTS = {
    "set_omega", "add_voi", "move_voi", "remove_voi", "set_prior",
    "estop", "release_estop",
}

DETECTION_WEIGHT = 1.0 - 1e-12


class LiveSession:
    def __init__(
        self,
        scenario: Scenario,
        config: SimConfig | None = None,
        recordings_dir: str | Path = "recordings",
    ):
        self.scenario = scenario
        self.base_config = scenario.build_config(config)
        self.recordings_dir = Path(recordings_dir)
        self._queue: list[tuple[Any, Callable[[Any], None] | None]] = []
        self._notices: list[WarningNotice] = []
        self._record_counter = 0
        self.writer: TraceWriter | None = None
        self.recording_path: str | None = None
        self._reset_state(scenario)

    def _reset_state(self, scenario: Scenario) -> None:
        self.engine = SimEngine(
            scenario.arena,
            list(scenario.vois),
            self.base_config,
            start=scenario.home(),
            extra_obstacles=list(scenario.obstacles),
        )
        start = scenario.start_pose()
        self.user_pose = start
        self.t = 0.0
        self.paused = False
        self.tracking_lost = False
        self.steer_forward = 0.0
        self.steer_strafe = 0.0
        self.steer_heading_rate = 0.0
        self.latest: FrameRecord | None = None
        self.min_clearance: float | None = None
        self.last_detection_time: float | None = None
        self.last_contact: dict | None = None
        self._locks: dict[str, float] = {}
        self._in_contact: set[str] = set()

    # -- message intake ----------------------------------------------------

    def enqueue(self, message: Any, reply_to: Callable[[Any], None] | None = None) -> None:
        self._queue.append((message, reply_to))

    def drain_notices(self) -> list[WarningNotice]:
        out, self._notices = self._notices, []
        return out

    def pump(self) -> list[Any]:
        """Apply all queued messages in arrival order; returns the replies."""
        queued, self._queue = self._queue, []
        replies = []
        for message, reply_to in queued:
            reply = self._apply(message)
            replies.append(reply)
            if reply_to is not None:
                reply_to(reply)
        return replies

    def _apply(self, msg: Any) -> Any:
        kind = msg.type
        try:
            if kind == "steer":
                speed = math.hypot(msg.forward, msg.strafe)
                scale = protocol.MAX_STEER_SPEED / speed if speed > protocol.MAX_STEER_SPEED else 1.0
                self.steer_forward = msg.forward * scale
                self.steer_strafe = msg.strafe * scale
                self.steer_heading_rate = msg.heading_rate
            elif kind == "pause":
                self.paused = True
            elif kind == "resume":
                self.paused = False
            elif kind == "set_tracking":
                self.tracking_lost = msg.lost
            elif kind == "reset":
                self._do_reset(msg.seed)
            elif kind == "record_start":
                return self._start_recording(msg.path)
            elif kind == "record_stop":
                self._stop_recording()
            elif kind in _RECORDED_EVENTS:
                event = msg.model_dump(exclude={"v"})
                self.engine.apply_event(event)
                self._write_event(event)
            else:
                return ErrorReply(message=f"unhandled message type {kind!r}")
        except EngineError as e:
            return ErrorReply(message=str(e))
        return AckReply(applied=kind)

    def _do_reset(self, seed: int | None) -> None:
        if self.writer is not None:
            self._stop_recording()
            self._notices.append(WarningNotice(message="recording stopped by reset"))
        scenario = self.scenario
        if seed is not None and self.scenario.vois:
            spec = generate_trial(
                seed, len(self.scenario.vois) - 1, self.scenario.arena
            )
            scenario = replace(
                self.scenario, vois=spec.vois, user_start=spec.user_start
            )
        self._reset_state(scenario)

    # -- recording ---------------------------------------------------------

    def _current_scenario(self) -> Scenario:
        return replace(
            self.scenario,
            vois=tuple(self.engine.vois),
            user_start=self.user_pose,
            config_overrides={},
        )

    def _start_recording(self, path: str | None) -> Any:
        if self.writer is not None:
            return ErrorReply(message="already recording")
        if path is None:
            self.recordings_dir.mkdir(parents=True, exist_ok=True)
            self._record_counter += 1
            path = str(self.recordings_dir / f"session-{self._record_counter:03d}.jsonl")
        p, r = self.engine.proxy, self.engine.robot
        cmd = self.engine.command
        initial = {
            "proxy": [p.position.x, p.position.y, p.velocity.x, p.velocity.y],
            "robot": [r.position.x, r.position.y, r.velocity.x, r.velocity.y, r.status],
            "command": [cmd.target.x, cmd.target.y, cmd.degenerate],
        }
        if self.engine.weights is not None:
            initial["weights"] = {
                e.voi_id: [e.raw, e.effective] for e in self.engine.weights.entries
            }
        meta = TraceMeta(
            scenario=scenario_to_dict(self._current_scenario()),
            config={k: getattr(self.engine.config, k) for k in SimConfig.__dataclass_fields__},
            initial=initial,
        )
        try:
            self.writer = TraceWriter(path, meta)
        except OSError as e:
            return ErrorReply(message=f"cannot record to {path}: {e}")
        self.recording_path = path
        return AckReply(applied="record_start", detail=path)

    def _stop_recording(self) -> None:
        if self.writer is not None:
            try:
                self.writer.close()
            except OSError:
                pass
            self.writer = None
            self.recording_path = None

    def _write_event(self, event: dict) -> None:
        if self.writer is None:
            return
        try:
            self.writer.write_event(self.t + self.engine.config.dt, event)
        except OSError as e:
            self._recording_failed(e)

    def _write_frame(self, frame: FrameRecord) -> None:
        if self.writer is None:
            return
        try:
            self.writer.write_frame(frame_from_record(frame))
        except OSError as e:
            self._recording_failed(e)

    def _recording_failed(self, e: OSError) -> None:
        self._notices.append(WarningNotice(message=f"recording failed: {e}"))
        self._stop_recording()

    # -- physics -----------------------------------------------------------

    def step(self) -> FrameRecord | None:
        """Apply queued messages, then advance one frame unless paused."""
        self.pump()
        return self.step_frame()

    def step_frame(self) -> FrameRecord | None:
        if self.paused:
            return None
        dt = self.engine.config.dt
        self.t += dt
        if not self.tracking_lost:
            heading = normalize_angle(
                self.user_pose.heading + self.steer_heading_rate * dt
            )
            c, s = math.cos(heading), math.sin(heading)
            vx = c * self.steer_forward - s * self.steer_strafe
            vy = s * self.steer_forward + c * self.steer_strafe
            p = Vec2(self.user_pose.position.x + vx * dt, self.user_pose.position.y + vy * dt)
            arena = self.engine.arena
            p = Vec2(min(max(p.x, 0.0), arena.width), min(max(p.y, 0.0), arena.length))
            self.user_pose = Pose(p, heading)
        user = UserState(self.user_pose, not self.tracking_lost, self.t)
        rec = self.engine.step(user)
        self.latest = rec
        self._update_metrics(rec)
        self._write_frame(rec)
        return rec

    def _update_metrics(self, rec: FrameRecord) -> None:
        clearance = rec.user.pose.position.distance_to(rec.proxy.position)
        if self.min_clearance is None or clearance < self.min_clearance:
            self.min_clearance = clearance
        if rec.weights is not None:
            for entry in rec.weights.entries:
                if entry.effective >= DETECTION_WEIGHT:
                    self._locks.setdefault(entry.voi_id, rec.t)
                else:
                    self._locks.pop(entry.voi_id, None)
        contacts = set()
        for voi in self.engine.vois:
            if rec.user.pose.position.distance_to(voi.position) <= voi.radius + 1e-9:
                contacts.add(voi.id)
                if voi.id not in self._in_contact:
                    distance = rec.robot.position.distance_to(voi.physical_position())
                    self.last_contact = {
                        "voi_id": voi.id,
                        "distance": distance,
                        "success": distance <= self.engine.config.success_distance,
                        "t": rec.t,
                    }
                    if voi.id in self._locks:
                        self.last_detection_time = rec.t - self._locks[voi.id]
        self._in_contact = contacts

    # -- state snapshots -----------------------------------------------------

    def tick(self) -> ServerTick:
        engine = self.engine
        rec = self.latest
        user_pose = rec.user.pose if rec is not None else self.user_pose
        tracked = rec.user.tracked if rec is not None else not self.tracking_lost
        weights = {e.voi_id: e for e in rec.weights.entries} if rec is not None and rec.weights else {}
        vois = [
            protocol.VoiView(
                id=v.id, x=v.position.x, y=v.position.y, radius=v.radius, prior=v.prior,
                raw_weight=weights[v.id].raw if v.id in weights else None,
                effective_weight=weights[v.id].effective if v.id in weights else None,
            )
            for v in engine.vois
        ]
        proxy, robot = engine.proxy, engine.robot
        command = rec.command if rec is not None else engine.command
        metrics = MetricsView(
            min_user_proxy_clearance=self.min_clearance,
            last_detection_time=self.last_detection_time,
            last_contact_voi=self.last_contact["voi_id"] if self.last_contact else None,
            last_contact_distance=self.last_contact["distance"] if self.last_contact else None,
            last_contact_success=self.last_contact["success"] if self.last_contact else None,
        )
        return ServerTick(
            t=self.t,
            paused=self.paused,
            omega=engine.config.omega,
            arena_width=engine.arena.width,
            arena_length=engine.arena.length,
            user=protocol.UserView(
                x=user_pose.position.x, y=user_pose.position.y,
                heading=user_pose.heading, tracked=tracked,
            ),
            proxy=protocol.ProxyView(
                x=proxy.position.x, y=proxy.position.y,
                vx=proxy.velocity.x, vy=proxy.velocity.y,
            ),
            robot=protocol.RobotView(
                x=robot.position.x, y=robot.position.y,
                vx=robot.velocity.x, vy=robot.velocity.y, status=robot.status,
            ),
            command=protocol.CommandView(
                x=command.target.x, y=command.target.y, degenerate=command.degenerate,
            ),
            obstacle_radius=engine.last_obstacle_radius,
            vois=vois,
            metrics=metrics,
            recording=self.recording_path,
        )
