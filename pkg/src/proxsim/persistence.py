"""File formats: JSON-lines traces, YAML scenarios, CSV result tables.

Formats are versioned and byte-stable: floats are serialized with full
round-trip precision, field order is fixed, and identical inputs always
produce identical bytes. A trace being written by a live session follows a
single-writer contract and is not concurrently readable.

Trace format (``proxsim-trace/1``), one JSON object per line:

* header: ``{"format": "proxsim-trace/1", "meta": {...}}`` — optional
  ``meta`` carries the scenario, config, initial proxy/robot state and
  target id needed for self-contained replay.
* frame: ``{"t", "user": [x, y, heading, tracked], "proxy": [x, y],
  "robot": [x, y, status], "weights": {id: [raw, effective]},
  "command": [x, y]}`` — everything after ``user`` is optional.
* event: ``{"t", "event": {...}}`` — a scene edit applied before the next
  frame; replay re-applies events in file order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, IO, Iterable

import yaml

from .geometry import VOI, Arena, Pose, SimConfig, UserState, Vec2
from .proxy import ObstacleState
from .walker import WalkerParams
from .engine import FrameRecord

TRACE_FORMAT = "proxsim-trace/1"
SCENARIO_FORMAT = 1


class TraceError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceFrame:
    t: float
    user: UserState
    proxy: Vec2 | None = None
    robot: Vec2 | None = None
    robot_status: str | None = None
    weights: dict[str, tuple[float, float]] | None = None
    command: Vec2 | None = None


@dataclass(frozen=True)
class TraceEvent:
    t: float
    event: dict
    after_frame: int  # number of frames preceding this event


@dataclass
class TraceMeta:
    scenario: dict | None = None
    config: dict | None = None
    initial: dict | None = None
    target_id: str | None = None


@dataclass
class Trace:
    frames: list[TraceFrame] = field(default_factory=list)
    events: list[TraceEvent] = field(default_factory=list)
    meta: TraceMeta = field(default_factory=TraceMeta)


def frame_from_record(rec: FrameRecord) -> TraceFrame:
    weights = None
    if rec.weights is not None:
        weights = {e.voi_id: (e.raw, e.effective) for e in rec.weights.entries}
    return TraceFrame(
        t=rec.t,
        user=rec.user,
        proxy=rec.proxy.position,
        robot=rec.robot.position,
        robot_status=rec.robot.status,
        weights=weights,
        command=rec.command.target,
    )


def _frame_to_obj(f: TraceFrame) -> dict:
    obj: dict[str, Any] = {
        "t": f.t,
        "user": [f.user.pose.position.x, f.user.pose.position.y,
                 f.user.pose.heading, f.user.tracked],
    }
    if f.proxy is not None:
        obj["proxy"] = [f.proxy.x, f.proxy.y]
    if f.robot is not None:
        obj["robot"] = [f.robot.x, f.robot.y, f.robot_status]
    if f.weights is not None:
        obj["weights"] = {k: [v[0], v[1]] for k, v in f.weights.items()}
    if f.command is not None:
        obj["command"] = [f.command.x, f.command.y]
    return obj


def _require_finite(values: Iterable[float], line_no: int) -> None:
    for v in values:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise TraceError(f"line {line_no}: non-finite numeric field {v!r}")


def _frame_from_obj(obj: dict, line_no: int) -> TraceFrame:
    try:
        t = obj["t"]
        ux, uy, heading, tracked = obj["user"]
    except (KeyError, TypeError, ValueError) as e:
        raise TraceError(f"line {line_no}: malformed frame: {e}") from e
    _require_finite((t, ux, uy, heading), line_no)
    if not isinstance(tracked, bool):
        raise TraceError(f"line {line_no}: tracked flag must be a boolean")
    proxy = robot = command = None
    robot_status = None
    weights = None
    if "proxy" in obj:
        _require_finite(obj["proxy"], line_no)
        proxy = Vec2(*obj["proxy"])
    if "robot" in obj:
        rx, ry, robot_status = obj["robot"]
        _require_finite((rx, ry), line_no)
        robot = Vec2(rx, ry)
    if "weights" in obj:
        weights = {}
        for k, pair in obj["weights"].items():
            _require_finite(pair, line_no)
            weights[str(k)] = (pair[0], pair[1])
    if "command" in obj:
        _require_finite(obj["command"], line_no)
        command = Vec2(*obj["command"])
    user = UserState(Pose(Vec2(ux, uy), heading), tracked, t)
    return TraceFrame(t, user, proxy, robot, robot_status, weights, command)


class TraceWriter:
    """Streaming writer used by live sessions; one frame or event per line."""

    def __init__(self, path: str | Path, meta: TraceMeta | None = None):
        self.path = Path(path)
        self._fh: IO[str] = self.path.open("w", encoding="utf-8")
        header: dict[str, Any] = {"format": TRACE_FORMAT}
        if meta is not None:
            m: dict[str, Any] = {}
            if meta.scenario is not None:
                m["scenario"] = meta.scenario
            if meta.config is not None:
                m["config"] = meta.config
            if meta.initial is not None:
                m["initial"] = meta.initial
            if meta.target_id is not None:
                m["target_id"] = meta.target_id
            if m:
                header["meta"] = m
        self._fh.write(json.dumps(header) + "\n")

    def write_frame(self, frame: TraceFrame) -> None:
        self._fh.write(json.dumps(_frame_to_obj(frame)) + "\n")

    def write_event(self, t: float, event: dict) -> None:
        self._fh.write(json.dumps({"t": t, "event": event}) + "\n")

    def close(self) -> None:
        self._fh.close()


def save_trace(trace: Trace | list[TraceFrame], path: str | Path) -> None:
    if isinstance(trace, list):
        trace = Trace(frames=trace)
    writer = TraceWriter(path, trace.meta)
    try:
        pending = sorted(trace.events, key=lambda e: e.after_frame)
        ei = 0
        for i, frame in enumerate(trace.frames):
            while ei < len(pending) and pending[ei].after_frame <= i:
                writer.write_event(pending[ei].t, pending[ei].event)
                ei += 1
            writer.write_frame(frame)
        while ei < len(pending):
            writer.write_event(pending[ei].t, pending[ei].event)
            ei += 1
    finally:
        writer.close()


def load_trace(path: str | Path) -> Trace:
    trace = Trace()
    prev_t: float | None = None
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise TraceError(f"line {line_no}: invalid JSON: {e}") from e
            if not isinstance(obj, dict):
                raise TraceError(f"line {line_no}: expected an object")
            if "format" in obj:
                if obj["format"] != TRACE_FORMAT:
                    raise TraceError(f"line {line_no}: unsupported format {obj['format']!r}")
                meta = obj.get("meta") or {}
                trace.meta = TraceMeta(
                    scenario=meta.get("scenario"),
                    config=meta.get("config"),
                    initial=meta.get("initial"),
                    target_id=meta.get("target_id"),
                )
                continue
            if "event" in obj:
                trace.events.append(
                    TraceEvent(obj.get("t", 0.0), obj["event"], len(trace.frames))
                )
                continue
            frame = _frame_from_obj(obj, line_no)
            if prev_t is not None and frame.t <= prev_t:
                raise TraceError(
                    f"line {line_no}: frame time {frame.t!r} does not increase past {prev_t!r}"
                )
            prev_t = frame.t
            trace.frames.append(frame)
    return trace


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    arena: Arena = Arena()
    vois: tuple[VOI, ...] = ()
    config_overrides: dict = field(default_factory=dict)
    walker: WalkerParams | None = None
    user_start: Pose | None = None
    robot_start: Vec2 | None = None
    target_id: str | None = None
    obstacles: tuple[ObstacleState, ...] = ()

    def build_config(self, base: SimConfig | None = None) -> SimConfig:
        base = base if base is not None else SimConfig()
        if not self.config_overrides:
            return base
        values = {k: getattr(base, k) for k in SimConfig.__dataclass_fields__}
        values.update(self.config_overrides)
        return SimConfig(**values)

    def target(self) -> VOI:
        if not self.vois:
            raise ScenarioError("scenario has no VOIs")
        if self.target_id is None:
            return self.vois[0]
        for v in self.vois:
            if v.id == self.target_id:
                return v
        raise ScenarioError(f"target {self.target_id!r} is not among the VOIs")

    def start_pose(self) -> Pose:
        if self.user_start is not None:
            return self.user_start
        return Pose(Vec2(self.arena.width / 2, self.arena.length / 4), math.pi / 2)

    def home(self) -> Vec2:
        if self.robot_start is not None:
            return self.robot_start
        return Vec2(self.arena.width / 2, self.arena.length / 2)


def _expect_mapping(node: Any, path: str, allowed: set[str]) -> dict:
    if not isinstance(node, dict):
        raise ScenarioError(f"{path}: expected a mapping")
    unknown = set(node) - allowed
    if unknown:
        raise ScenarioError(f"{path}.{sorted(unknown)[0]}: unknown field")
    return node


def _number(node: dict, key: str, path: str, default: float | None = None) -> float:
    if key not in node:
        if default is None:
            raise ScenarioError(f"{path}.{key}: missing required field")
        return default
    v = node[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(f"{path}.{key}: expected a finite number")
    return float(v)


def _parse_vec(node: Any, path: str) -> Vec2:
    m = _expect_mapping(node, path, {"x", "y"})
    return Vec2(_number(m, "x", path), _number(m, "y", path))


def parse_scenario(doc: Any) -> Scenario:
    root = _expect_mapping(doc, "scenario", {
        "format", "arena", "vois", "config", "walker",
        "user_start", "robot_start", "target", "obstacles",
    })
    fmt = root.get("format", SCENARIO_FORMAT)
    if fmt != SCENARIO_FORMAT:
        raise ScenarioError(f"format: unsupported scenario format {fmt!r}")

    arena = Arena()
    if "arena" in root:
        node = _expect_mapping(root["arena"], "arena", {"width", "length", "safety_margin"})
        try:
            arena = Arena(
                _number(node, "width", "arena", 4.0),
                _number(node, "length", "arena", 4.0),
                _number(node, "safety_margin", "arena", 0.02),
            )
        except ValueError as e:
            raise ScenarioError(f"arena: {e}") from e

    vois: list[VOI] = []
    seen_ids: set[str] = set()
    for i, item in enumerate(root.get("vois") or []):
        path = f"vois[{i}]"
        node = _expect_mapping(item, path, {"id", "x", "y", "radius", "prior", "physical_offset"})
        voi_id = node.get("id")
        if not isinstance(voi_id, str) or not voi_id:
            raise ScenarioError(f"{path}.id: expected a non-empty string")
        if voi_id in seen_ids:
            raise ScenarioError(f"{path}.id: duplicate id {voi_id!r}")
        seen_ids.add(voi_id)
        offset = None
        if "physical_offset" in node:
            offset = _parse_vec(node["physical_offset"], f"{path}.physical_offset")
        position = Vec2(_number(node, "x", path), _number(node, "y", path))
        if not arena.contains(position):
            raise ScenarioError(f"{path}: position is outside the arena")
        radius = _number(node, "radius", path, 0.05)
        prior = _number(node, "prior", path, 1.0)
        if radius <= 0:
            raise ScenarioError(f"{path}.radius: must be positive")
        if not 0.0 <= prior <= 1.0:
            raise ScenarioError(f"{path}.prior: must be within [0, 1]")
        vois.append(VOI(voi_id, position, radius, prior, offset))

    overrides: dict = {}
    if "config" in root:
        allowed = set(SimConfig.__dataclass_fields__)
        node = _expect_mapping(root["config"], "config", allowed)
        for key, value in node.items():
            if key == "rng_seed":
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ScenarioError("config.rng_seed: expected an integer")
                overrides[key] = value
            else:
                overrides[key] = _number(node, key, "config")
        try:
            SimConfig(**{**{k: getattr(SimConfig(), k) for k in allowed}, **overrides})
        except ValueError as e:
            raise ScenarioError(f"config: {e}") from e

    walker = None
    if "walker" in root:
        node = _expect_mapping(root["walker"], "walker", {
            "walk_speed", "decision_delay", "turn_rate", "contact_radius",
            "gaze_noise", "scan_base", "glance_rate", "glance_duration",
            "glance_cutoff", "approach_distance", "approach_speed",
        })
        kwargs: dict[str, Any] = {}
        for key in ("decision_delay", "glance_duration"):
            if key in node:
                dd = node[key]
                if not (isinstance(dd, (list, tuple)) and len(dd) == 2):
                    raise ScenarioError(f"walker.{key}: expected [min, max]")
                kwargs[key] = (float(dd[0]), float(dd[1]))
        for key in ("walk_speed", "turn_rate", "contact_radius", "gaze_noise",
                    "scan_base", "glance_rate", "glance_cutoff",
                    "approach_distance", "approach_speed"):
            if key in node:
                kwargs[key] = _number(node, key, "walker")
        try:
            walker = WalkerParams(**kwargs)
        except ValueError as e:
            raise ScenarioError(f"walker: {e}") from e

    user_start = None
    if "user_start" in root:
        node = _expect_mapping(root["user_start"], "user_start", {"x", "y", "heading"})
        user_start = Pose(
            Vec2(_number(node, "x", "user_start"), _number(node, "y", "user_start")),
            _number(node, "heading", "user_start", 0.0),
        )
        if not arena.contains(user_start.position):
            raise ScenarioError("user_start: position is outside the arena")

    robot_start = None
    if "robot_start" in root:
        robot_start = _parse_vec(root["robot_start"], "robot_start")
        if not arena.contains(robot_start, arena.safety_margin):
            raise ScenarioError("robot_start: position is outside the arena margins")

    target_id = None
    if "target" in root:
        target_id = root["target"]
        if not isinstance(target_id, str):
            raise ScenarioError("target: expected a VOI id string")
        if target_id not in seen_ids:
            raise ScenarioError(f"target: {target_id!r} is not among the VOIs")

    obstacles: list[ObstacleState] = []
    for i, item in enumerate(root.get("obstacles") or []):
        path = f"obstacles[{i}]"
        node = _expect_mapping(item, path, {"x", "y", "radius", "influence_band"})
        radius = _number(node, "radius", path)
        if radius <= 0:
            raise ScenarioError(f"{path}.radius: must be positive")
        obstacles.append(ObstacleState(
            Vec2(_number(node, "x", path), _number(node, "y", path)),
            radius,
            _number(node, "influence_band", path, 0.30),
        ))

    return Scenario(
        arena=arena,
        vois=tuple(vois),
        config_overrides=overrides,
        walker=walker,
        user_start=user_start,
        robot_start=robot_start,
        target_id=target_id,
        obstacles=tuple(obstacles),
    )


def load_scenario(path: str | Path) -> Scenario:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ScenarioError(f"{path}: invalid YAML: {e}") from e
    if doc is None:
        raise ScenarioError(f"{path}: empty scenario document")
    return parse_scenario(doc)


def scenario_to_dict(s: Scenario) -> dict:
    doc: dict[str, Any] = {
        "format": SCENARIO_FORMAT,
        "arena": {"width": s.arena.width, "length": s.arena.length,
                  "safety_margin": s.arena.safety_margin},
        "vois": [],
    }
    for v in s.vois:
        item: dict[str, Any] = {"id": v.id, "x": v.position.x, "y": v.position.y,
                                "radius": v.radius, "prior": v.prior}
        if v.physical_offset is not None:
            item["physical_offset"] = {"x": v.physical_offset.x, "y": v.physical_offset.y}
        doc["vois"].append(item)
    if s.config_overrides:
        doc["config"] = dict(sorted(s.config_overrides.items()))
    if s.walker is not None:
        doc["walker"] = {
            "walk_speed": s.walker.walk_speed,
            "decision_delay": list(s.walker.decision_delay),
            "turn_rate": s.walker.turn_rate,
            "gaze_noise": s.walker.gaze_noise,
            "scan_base": s.walker.scan_base,
            "glance_rate": s.walker.glance_rate,
            "glance_duration": list(s.walker.glance_duration),
            "glance_cutoff": s.walker.glance_cutoff,
            "approach_distance": s.walker.approach_distance,
            "approach_speed": s.walker.approach_speed,
        }
        if s.walker.contact_radius is not None:
            doc["walker"]["contact_radius"] = s.walker.contact_radius
    if s.user_start is not None:
        doc["user_start"] = {"x": s.user_start.position.x, "y": s.user_start.position.y,
                             "heading": s.user_start.heading}
    if s.robot_start is not None:
        doc["robot_start"] = {"x": s.robot_start.x, "y": s.robot_start.y}
    if s.target_id is not None:
        doc["target"] = s.target_id
    if s.obstacles:
        doc["obstacles"] = [
            {"x": o.center.x, "y": o.center.y, "radius": o.radius,
             "influence_band": o.influence_band}
            for o in s.obstacles
        ]
    return doc


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(scenario_to_dict(s), sort_keys=False), encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# result tables
# ---------------------------------------------------------------------------

SUMMARY_COLUMNS = [
    "omega", "n_distractors", "n_trials", "success_rate", "success_ci95",
    "distance_mean", "distance_ci95", "detection_mean", "detection_ci95",
    "proxy_robot_mean", "proxy_robot_ci95", "collisions",
]

TRIAL_COLUMNS = [
    "omega", "n_distractors", "block", "persona", "seed", "success",
    "duration", "distance_at_contact", "detection_time",
    "min_user_proxy_clearance", "collision", "proxy_robot_final_mean",
    "max_obstacle_penetration", "speed_cap_violations", "margin_violations",
    "robot_clearance_deficit",
]

RESULTS_FORMAT = "# proxsim-results/1"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(rows: list[dict], columns: list[str], path: str | Path) -> None:
    lines = [RESULTS_FORMAT, ",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(row.get(c)) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_results(sweep, out_dir: str | Path) -> tuple[Path, Path]:
    """Write summary.csv and trials.csv for a finished sweep; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_path = out / "summary.csv"
    trials_path = out / "trials.csv"
    write_table(sweep.summary_rows(), SUMMARY_COLUMNS, summary_path)
    write_table(sweep.trial_rows(), TRIAL_COLUMNS, trials_path)
    return summary_path, trials_path
