"""Batch evaluation: seeded trial generation, trial execution, parameter sweeps.

Reproduces the evaluation protocol: scenes with 0..4 distractor balls at
random positions, a simulated user (synthetic walker or replayed trace)
reaching for the designated target, per-trial success/timing/safety metrics,
and full-factorial omega sweeps where every omega value sees identical
trials so the comparison is paired.
"""

from __future__ import annotations

import hashlib
import math
import random
import statistics
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from scipy.stats import t as t_dist

from .engine import FrameRecord, SimEngine
from .geometry import VOI, Arena, Pose, SimConfig, Vec2
from .intention import CommandPosition, WeightEntry, WeightVector
from .persistence import (
    Trace,
    TraceMeta,
    TraceWriter,
    Scenario,
    frame_from_record,
    parse_scenario,
    scenario_to_dict,
)
from .robot import RobotState, speed_cap
from .proxy import ProxyState
from .walker import Walker, WalkerParams, default_personas

BALL_RADIUS = 0.05
MIN_CENTER_SEPARATION = 0.10
MIN_USER_CLEARANCE = 0.30
PLACEMENT_INSET = 0.10
MAX_PLACEMENT_ATTEMPTS = 10_000
TRIAL_TIMEOUT = 120.0
DETECTION_WEIGHT = 1.0 - 1e-12
FINAL_WINDOW_FRAMES = 75  # one second at the fixed frame rate

_SEED_MASK = (1 << 63) - 1


def derive_seed(base: int, *parts: object) -> int:
    """Stable 63-bit sub-seed from a base seed and a label path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(base).encode())
    for p in parts:
        h.update(b"/")
        h.update(str(p).encode())
    return int.from_bytes(h.digest(), "big") & _SEED_MASK


@dataclass(frozen=True)
class TrialSpec:
    """One trial's scene: the first VOI is the designated target."""

    seed: int
    n_distractors: int
    vois: tuple[VOI, ...]
    user_start: Pose

    def __post_init__(self) -> None:
        if len(self.vois) != self.n_distractors + 1:
            raise ValueError("vois must contain the target plus the distractors")
        for i, a in enumerate(self.vois):
            for b in self.vois[i + 1:]:
                if a.position.distance_to(b.position) < MIN_CENTER_SEPARATION - 1e-9:
                    raise ValueError("VOI centers closer than the minimum separation")
            if a.position.distance_to(self.user_start.position) < MIN_USER_CLEARANCE - 1e-9:
                raise ValueError("VOI too close to the user start")

    def target(self) -> VOI:
        return self.vois[0]

    def with_target_prior(self, target_prior: float) -> "TrialSpec":
        """Give the target this prior; distractors split the remainder evenly."""
        if not 0.0 <= target_prior <= 1.0:
            raise ValueError("target prior must be within [0, 1]")
        if self.n_distractors == 0:
            priors = [target_prior]
        else:
            rest = (1.0 - target_prior) / self.n_distractors
            priors = [target_prior] + [rest] * self.n_distractors
        vois = tuple(replace(v, prior=p) for v, p in zip(self.vois, priors))
        return replace(self, vois=vois)


def generate_trial(
    seed: int,
    n_distractors: int,
    arena: Arena = Arena(),
    user_start: Pose | None = None,
) -> TrialSpec:
    """Rejection-sample a scene of one target plus distractor balls.

    Deterministic in the seed; placement keeps balls a diameter apart,
    clear of the user start, and inset from the walls.
    """
    if not 0 <= n_distractors <= 4:
        raise ValueError("n_distractors must be within 0..4")
    if user_start is None:
        rng = random.Random(derive_seed(seed, "user-start"))
        user_start = Pose(
            Vec2(
                rng.uniform(MIN_USER_CLEARANCE, arena.width - MIN_USER_CLEARANCE),
                rng.uniform(MIN_USER_CLEARANCE, arena.length - MIN_USER_CLEARANCE),
            ),
            rng.uniform(-math.pi, math.pi),
        )
    rng = random.Random(derive_seed(seed, "vois"))
    centers: list[Vec2] = []
    attempts = 0
    while len(centers) < n_distractors + 1:
        if attempts >= MAX_PLACEMENT_ATTEMPTS:
            raise RuntimeError("could not place VOIs under the spacing constraints")
        attempts += 1
        p = Vec2(
            rng.uniform(PLACEMENT_INSET, arena.width - PLACEMENT_INSET),
            rng.uniform(PLACEMENT_INSET, arena.length - PLACEMENT_INSET),
        )
        if p.distance_to(user_start.position) < MIN_USER_CLEARANCE:
            continue
        if any(p.distance_to(c) < MIN_CENTER_SEPARATION for c in centers):
            continue
        centers.append(p)
    vois = [VOI("target", centers[0], BALL_RADIUS)]
    vois += [
        VOI(f"distractor-{i}", c, BALL_RADIUS)
        for i, c in enumerate(centers[1:], start=1)
    ]
    return TrialSpec(seed, n_distractors, tuple(vois), user_start)


@dataclass(frozen=True)
class TrialResult:
    success: bool
    distance_at_contact: float | None
    detection_time: float | None
    min_user_proxy_clearance: float
    collision: bool
    duration: float
    frames: str | None = None  # path of the recorded trace, when requested
    proxy_robot_final_mean: float | None = None
    max_obstacle_penetration: float = 0.0
    speed_cap_violations: int = 0
    margin_violations: int = 0
    robot_clearance_deficit: float = 0.0
    n_frames: int = 0


def _spec_scenario(spec: TrialSpec, arena: Arena) -> Scenario:
    return Scenario(
        arena=arena,
        vois=spec.vois,
        user_start=spec.user_start,
        target_id=spec.vois[0].id,
    )


class _SafetyMonitor:
    """Accumulates the per-frame safety checks over one trial."""

    def __init__(self, arena: Arena):
        self.arena = arena
        self.min_clearance = math.inf
        self.collision = False
        self.max_penetration = 0.0
        self.speed_violations = 0
        self.margin_violations = 0
        self.robot_clearance_deficit = 0.0

    def observe(self, rec: FrameRecord, prev_robot: RobotState) -> None:
        clearance = rec.user.pose.position.distance_to(rec.proxy.position)
        self.min_clearance = min(self.min_clearance, clearance)
        penetration = rec.obstacle_radius - clearance
        if penetration > 1e-9:
            self.collision = True
        self.max_penetration = max(self.max_penetration, penetration)
        # The cap applies to the distance the pursuit decision saw.
        decision_gap = rec.proxy.position.distance_to(prev_robot.position)
        if rec.robot.velocity.norm() > speed_cap(decision_gap) + 1e-9:
            self.speed_violations += 1
        m = self.arena.safety_margin - 1e-9
        for p in (rec.proxy.position, rec.robot.position):
            if not self.arena.contains(p, m):
                self.margin_violations += 1
        # The robot may only be inside the user disc by as much as its lag
        # behind the (never-penetrating) proxy: any deeper means it moved
        # into the user on its own.
        robot_user = rec.user.pose.position.distance_to(rec.robot.position)
        robot_proxy = rec.robot.position.distance_to(rec.proxy.position)
        deficit = (rec.obstacle_radius - robot_user) - robot_proxy
        self.robot_clearance_deficit = max(self.robot_clearance_deficit, deficit)


class _FrameSource:
    """Uniform frame supplier over a walker or a recorded trace."""

    def __init__(self, spec: TrialSpec, source: WalkerParams | Trace, config: SimConfig):
        self.events_by_frame: dict[int, list[dict]] = {}
        if isinstance(source, WalkerParams):
            self.walker = Walker(
                list(spec.vois), spec.user_start, source, derive_seed(spec.seed, "walker")
            )
            self.frames = None
            self.dt = config.dt
        else:
            self.walker = None
            self.frames = source.frames
            for ev in source.events:
                self.events_by_frame.setdefault(ev.after_frame, []).append(ev.event)

    def __iter__(self):
        if self.walker is not None:
            k = 0
            while True:
                k += 1
                yield self.walker.step(k * self.dt, self.dt)
        else:
            for f in self.frames:
                yield f.user


def run_trial(
    spec: TrialSpec,
    source: WalkerParams | Trace,
    config: SimConfig,
    arena: Arena = Arena(),
    record_path: str | Path | None = None,
) -> TrialResult:
    """Simulate one trial until the user contacts the target (or times out).

    The user stream is open-loop (a walker or a trace), so identical specs
    produce identical user motion under every planner configuration.
    """
    engine = SimEngine(arena, list(spec.vois), config)
    target = spec.target()
    contact_threshold = target.radius + 1e-9
    if isinstance(source, WalkerParams):
        contact_threshold = (
            source.contact_radius if source.contact_radius is not None else target.radius
        ) + 1e-9

    writer = None
    if record_path is not None:
        meta = TraceMeta(
            scenario=scenario_to_dict(_spec_scenario(spec, arena)),
            config={k: getattr(config, k) for k in SimConfig.__dataclass_fields__},
            initial=_initial_state_dict(engine),
            target_id=target.id,
        )
        writer = TraceWriter(record_path, meta)

    monitor = _SafetyMonitor(arena)
    window: deque[float] = deque(maxlen=FINAL_WINDOW_FRAMES)
    frame_source = _FrameSource(spec, source, config)
    t_lock: float | None = None
    t_contact: float | None = None
    distance_at_contact: float | None = None
    last_t = 0.0
    n_frames = 0

    try:
        for index, user in enumerate(frame_source):
            for event in frame_source.events_by_frame.get(index, ()):
                engine.apply_event(event)
                if writer is not None:
                    writer.write_event(user.time, event)
            prev_robot = engine.robot
            rec = engine.step(user)
            n_frames += 1
            last_t = rec.t
            monitor.observe(rec, prev_robot)
            window.append(rec.robot.position.distance_to(rec.proxy.position))
            if writer is not None:
                writer.write_frame(frame_from_record(rec))
            if user.pose.position.distance_to(target.position) <= contact_threshold:
                t_contact = rec.t
                distance_at_contact = rec.robot.position.distance_to(
                    target.physical_position()
                )
                break
            # detection = the weight reaching 1 strictly before contact
            if t_lock is None and rec.weights is not None:
                if rec.weights.effective(target.id) >= DETECTION_WEIGHT:
                    t_lock = rec.t
            if rec.t > TRIAL_TIMEOUT:
                break
    finally:
        if writer is not None:
            writer.close()

    success = (
        distance_at_contact is not None
        and distance_at_contact <= config.success_distance
    )
    detection_time = None
    if t_contact is not None and t_lock is not None:
        detection_time = t_contact - t_lock
    return TrialResult(
        success=success,
        distance_at_contact=distance_at_contact,
        detection_time=detection_time,
        min_user_proxy_clearance=monitor.min_clearance,
        collision=monitor.collision,
        duration=t_contact if t_contact is not None else last_t,
        frames=str(record_path) if record_path is not None else None,
        proxy_robot_final_mean=(sum(window) / len(window)) if window else None,
        max_obstacle_penetration=monitor.max_penetration,
        speed_cap_violations=monitor.speed_violations,
        margin_violations=monitor.margin_violations,
        robot_clearance_deficit=monitor.robot_clearance_deficit,
        n_frames=n_frames,
    )


def _initial_state_dict(engine: SimEngine) -> dict:
    p, r = engine.proxy, engine.robot
    return {
        "proxy": [p.position.x, p.position.y, p.velocity.x, p.velocity.y],
        "robot": [r.position.x, r.position.y, r.velocity.x, r.velocity.y, r.status],
    }


def replay_trace(
    trace: Trace,
    config: SimConfig | None = None,
    collect: bool = False,
) -> tuple[TrialResult, list[FrameRecord]]:
    """Replay a self-contained recorded session through the batch pipeline.

    The trace header supplies the scenario, config and initial state; frames
    supply the user stream; recorded scene-edit events are re-applied in file
    order. Returns the trial result and (optionally) the recomputed frames.
    """
    if trace.meta.scenario is None:
        raise ValueError("trace has no embedded scenario; replay needs one")
    scenario = parse_scenario(trace.meta.scenario)
    if config is None:
        if trace.meta.config is not None:
            config = SimConfig(**trace.meta.config)
        else:
            config = scenario.build_config()
    engine = SimEngine(
        scenario.arena,
        list(scenario.vois),
        config,
        start=scenario.home(),
        extra_obstacles=list(scenario.obstacles),
    )
    if trace.meta.initial is not None:
        initial = trace.meta.initial
        px, py, pvx, pvy = initial["proxy"]
        rx, ry, rvx, rvy, status = initial["robot"]
        engine.proxy = ProxyState(Vec2(px, py), Vec2(pvx, pvy))
        engine.robot = RobotState(Vec2(rx, ry), Vec2(rvx, rvy), status)
        if "command" in initial:
            cx, cy, degenerate = initial["command"]
            engine.command = CommandPosition(Vec2(cx, cy), bool(degenerate))
        if "weights" in initial:
            engine.weights = WeightVector(tuple(
                WeightEntry(voi_id, pair[0], pair[1])
                for voi_id, pair in initial["weights"].items()
            ))

    target: VOI | None = None
    if trace.meta.target_id is not None or scenario.vois:
        try:
            target = scenario.target() if trace.meta.target_id is None else next(
                v for v in scenario.vois if v.id == trace.meta.target_id
            )
        except StopIteration:
            raise ValueError(f"target {trace.meta.target_id!r} is not in the scenario")

    events_by_frame: dict[int, list[dict]] = {}
    for ev in trace.events:
        events_by_frame.setdefault(ev.after_frame, []).append(ev.event)

    monitor = _SafetyMonitor(scenario.arena)
    window: deque[float] = deque(maxlen=FINAL_WINDOW_FRAMES)
    records: list[FrameRecord] = []
    t_lock = t_contact = distance_at_contact = None
    last_t = 0.0
    n_frames = 0
    for index, frame in enumerate(trace.frames):
        for event in events_by_frame.get(index, ()):
            engine.apply_event(event)
        prev_robot = engine.robot
        rec = engine.step(frame.user)
        n_frames += 1
        last_t = rec.t
        monitor.observe(rec, prev_robot)
        window.append(rec.robot.position.distance_to(rec.proxy.position))
        if collect:
            records.append(rec)
        if target is not None:
            if frame.user.pose.position.distance_to(target.position) <= target.radius + 1e-9:
                t_contact = rec.t
                distance_at_contact = rec.robot.position.distance_to(
                    target.physical_position()
                )
                break
            if t_lock is None and rec.weights is not None:
                if rec.weights.effective(target.id) >= DETECTION_WEIGHT:
                    t_lock = rec.t
        if rec.t > TRIAL_TIMEOUT:
            break

    success = (
        distance_at_contact is not None
        and distance_at_contact <= config.success_distance
    )
    detection_time = None
    if t_contact is not None and t_lock is not None:
        detection_time = t_contact - t_lock
    result = TrialResult(
        success=success,
        distance_at_contact=distance_at_contact,
        detection_time=detection_time,
        min_user_proxy_clearance=monitor.min_clearance,
        collision=monitor.collision,
        duration=t_contact if t_contact is not None else last_t,
        proxy_robot_final_mean=(sum(window) / len(window)) if window else None,
        max_obstacle_penetration=monitor.max_penetration,
        speed_cap_violations=monitor.speed_violations,
        margin_violations=monitor.margin_violations,
        robot_clearance_deficit=monitor.robot_clearance_deficit,
        n_frames=n_frames,
    )
    return result, records


def summarize(samples: Sequence[float]) -> tuple[float, float]:
    """Sample mean and 95% t-distribution confidence half-width."""
    n = len(samples)
    if n < 2:
        raise ValueError("summarize needs at least two samples")
    mean = sum(samples) / n
    sd = statistics.stdev(samples)
    hw = float(t_dist.ppf(0.975, n - 1)) * sd / math.sqrt(n)
    return mean, hw


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialKey:
    block: int
    condition: int
    persona: int


@dataclass
class SweepResult:
    omegas: list[float]
    conditions: list[int]
    blocks: int
    base_seed: int
    rows: list[dict] = field(default_factory=list)

    def _cell_rows(self, omega: float, condition: int) -> list[dict]:
        return [
            r for r in self.rows
            if r["omega"] == omega and r["n_distractors"] == condition
        ]

    def success_rate(self, omega: float, condition: int) -> float:
        rows = self._cell_rows(omega, condition)
        return sum(1 for r in rows if r["success"]) / len(rows)

    def success_ci(self, omega: float, condition: int) -> tuple[float, float]:
        """Success rate with its 95% half-width (0 for single-trial cells)."""
        rows = self._cell_rows(omega, condition)
        if len(rows) < 2:
            return self.success_rate(omega, condition), 0.0
        return summarize([1.0 if r["success"] else 0.0 for r in rows])

    def mean_success(self, omega: float) -> float:
        return sum(self.success_rate(omega, c) for c in self.conditions) / len(self.conditions)

    def mean_distance(self, omega: float, condition: int | None = None) -> float:
        rows = (
            self.rows if condition is None else
            [r for r in self.rows if r["n_distractors"] == condition]
        )
        values = [
            r["distance_at_contact"] for r in rows
            if r["omega"] == omega and r["distance_at_contact"] is not None
        ]
        return sum(values) / len(values) if values else math.inf

    def fitted_omega(self, condition: int | None = None) -> float:
        """Best success rate wins; statistical ties fall back to accuracy.

        Omegas whose success-rate confidence interval overlaps the best one's
        are treated as tied and ranked by mean distance at contact (then by
        lower omega), so the fit stays meaningful where success is rare.
        """
        def rate_ci(omega: float) -> tuple[float, float]:
            if condition is None:
                rates = [self.success_rate(omega, c) for c in self.conditions]
                hws = [self.success_ci(omega, c)[1] for c in self.conditions]
                return sum(rates) / len(rates), sum(hws) / len(hws)
            return self.success_ci(omega, condition)

        stats = {o: rate_ci(o) for o in self.omegas}
        best_rate, best_hw = max(stats.values(), key=lambda s: s[0])
        tied = [
            o for o, (rate, hw) in stats.items()
            if rate + hw + best_hw >= best_rate
        ]
        return min(tied, key=lambda o: (self.mean_distance(o, condition), o))

    def summary_rows(self) -> list[dict]:
        out = []
        for omega in self.omegas:
            for condition in self.conditions:
                rows = self._cell_rows(omega, condition)
                entry: dict = {
                    "omega": omega,
                    "n_distractors": condition,
                    "n_trials": len(rows),
                    "collisions": sum(1 for r in rows if r["collision"]),
                }
                rate, hw = self.success_ci(omega, condition)
                entry["success_rate"] = rate
                entry["success_ci95"] = hw
                for column, key in (
                    ("distance", "distance_at_contact"),
                    ("detection", "detection_time"),
                    ("proxy_robot", "proxy_robot_final_mean"),
                ):
                    values = [r[key] for r in rows if r[key] is not None]
                    if len(values) >= 2:
                        mean, hw = summarize(values)
                        entry[f"{column}_mean"] = mean
                        entry[f"{column}_ci95"] = hw
                    elif values:
                        entry[f"{column}_mean"] = values[0]
                        entry[f"{column}_ci95"] = None
                    else:
                        entry[f"{column}_mean"] = None
                        entry[f"{column}_ci95"] = None
                out.append(entry)
        return out

    def trial_rows(self) -> list[dict]:
        return self.rows

    def detection_failure_curve(self, bin_width: float = 1.0) -> list[dict]:
        """Empirical success rate by detection-time bin (contact trials).

        Trials whose weight never locked before contact land in the 'none'
        bin; the curve shows how late detection correlates with failure.
        """
        bins: dict[object, list[bool]] = {}
        for row in self.rows:
            if row["distance_at_contact"] is None:
                continue
            dt = row["detection_time"]
            key = "none" if dt is None else math.floor(dt / bin_width) * bin_width
            bins.setdefault(key, []).append(row["success"])
        curve = []
        for key in sorted(bins, key=lambda k: (-1.0 if k == "none" else float(k))):
            values = bins[key]
            curve.append({
                "detection_bin": key,
                "n": len(values),
                "success_rate": sum(values) / len(values),
            })
        return curve


def _row_from_result(
    omega: float, key: TrialKey, seed: int, result: TrialResult
) -> dict:
    return {
        "omega": omega,
        "n_distractors": key.condition,
        "block": key.block,
        "persona": key.persona,
        "seed": seed,
        "success": result.success,
        "duration": result.duration,
        "distance_at_contact": result.distance_at_contact,
        "detection_time": result.detection_time,
        "min_user_proxy_clearance": result.min_user_proxy_clearance,
        "collision": result.collision,
        "proxy_robot_final_mean": result.proxy_robot_final_mean,
        "max_obstacle_penetration": result.max_obstacle_penetration,
        "speed_cap_violations": result.speed_cap_violations,
        "margin_violations": result.margin_violations,
        "robot_clearance_deficit": result.robot_clearance_deficit,
    }


def _trial_task(args: tuple) -> list[dict]:
    key, omegas, base_seed, config, arena, persona_params, target_prior = args
    seed = derive_seed(base_seed, key.block, key.condition, key.persona)
    spec = generate_trial(seed, key.condition, arena)
    if target_prior is not None:
        spec = spec.with_target_prior(target_prior)
    rows = []
    for omega in omegas:
        cfg = replace(config, omega=omega)
        result = run_trial(spec, persona_params, cfg, arena)
        rows.append(_row_from_result(omega, key, seed, result))
    return rows


def run_sweep(
    omegas: Sequence[float],
    conditions: Sequence[int],
    blocks: int,
    base_seed: int,
    config: SimConfig | None = None,
    *,
    personas: Sequence[WalkerParams] | None = None,
    arena: Arena | None = None,
    target_prior: float | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Full factorial sweep; every omega sees identical trials (paired seeds)."""
    omegas = list(dict.fromkeys(float(o) for o in omegas))
    if not omegas:
        raise ValueError("at least one omega value is required")
    conditions = list(conditions)
    if not conditions or any(not 0 <= c <= 4 for c in conditions):
        raise ValueError("conditions must be within 0..4")
    config = config if config is not None else SimConfig()
    arena = arena if arena is not None else Arena()
    personas = list(personas) if personas is not None else default_personas()

    keys = [
        TrialKey(b, c, p)
        for b in range(blocks)
        for c in conditions
        for p in range(len(personas))
    ]
    tasks = [
        (key, omegas, base_seed, config, arena, personas[key.persona], target_prior)
        for key in keys
    ]

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_trial_task, tasks, chunksize=8))
    else:
        chunks = [_trial_task(t) for t in tasks]

    # Deterministic reduction: by (omega, condition, block, persona).
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["omega"], r["n_distractors"], r["block"], r["persona"]))
    return SweepResult(omegas, conditions, blocks, base_seed, rows)


COARSE_OMEGAS = [0.0, 0.25, 0.5, 0.75, 1.0]
REFINE_SPAN = 0.1
REFINE_STEP = 0.025


def two_phase_sweep(
    conditions: Sequence[int],
    blocks: int,
    base_seed: int,
    config: SimConfig | None = None,
    **kwargs,
) -> SweepResult:
    """Broad omega exploration (step 0.25) followed by local refinement."""
    coarse = run_sweep(COARSE_OMEGAS, conditions, blocks, base_seed, config, **kwargs)
    center = coarse.fitted_omega()
    steps = int(round(REFINE_SPAN / REFINE_STEP))
    fine = [
        round(center + k * REFINE_STEP, 6)
        for k in range(-steps, steps + 1)
    ]
    fine = [o for o in fine if 0.0 <= o <= 1.0 and o not in coarse.omegas]
    if not fine:
        return coarse
    refined = run_sweep(fine, conditions, blocks, base_seed, config, **kwargs)
    merged_omegas = sorted(coarse.omegas + refined.omegas)
    rows = coarse.rows + refined.rows
    rows.sort(key=lambda r: (r["omega"], r["n_distractors"], r["block"], r["persona"]))
    return SweepResult(merged_omegas, list(conditions), blocks, base_seed, rows)
