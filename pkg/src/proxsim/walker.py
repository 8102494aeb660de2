"""Synthetic user: scans the scene, picks the designated target, walks to it.

Stands in for a human participant when no recorded trace is available. The
walker looks around first (an initial sweep, then a gaze dwell per object,
ending on the target), then turns and walks straight at the target, glancing
at other objects along the way the way people do, and squares up on the
target at contact. Every random draw comes from the walker's own seeded
stream, so a trial's user motion is identical under any planner setting.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .geometry import VOI, Pose, UserState, Vec2, normalize_angle


@dataclass(frozen=True)
class WalkerParams:
    """Pacing knobs, calibrated so trial durations match human-paced sessions."""

    walk_speed: float = 1.0
    decision_delay: tuple[float, float] = (1.0, 3.0)  # per-object gaze dwell
    turn_rate: float = math.pi
    contact_radius: float | None = None  # None = the target's own radius
    gaze_noise: float = 0.1
    scan_base: float = 2.0  # initial look-around before the per-object gazes
    glance_rate: float = 0.3  # mid-walk glances per second
    glance_duration: tuple[float, float] = (0.3, 0.7)
    glance_cutoff: float = 0.5  # no glancing closer to the target than this
    approach_distance: float = 0.0  # 0 disables the final-approach taper
    approach_speed: float = 0.25

    def __post_init__(self) -> None:
        lo, hi = self.decision_delay
        glo, ghi = self.glance_duration
        if not (self.walk_speed > 0 and self.turn_rate > 0 and 0 < lo <= hi):
            raise ValueError("walker parameters must be positive")
        if self.gaze_noise < 0 or self.scan_base < 0:
            raise ValueError("walker parameters must be positive")
        if self.glance_rate < 0 or not 0 < glo <= ghi or self.glance_cutoff < 0:
            raise ValueError("walker parameters must be positive")
        if not (self.approach_distance >= 0 and self.approach_speed > 0):
            raise ValueError("walker parameters must be positive")


class Walker:
    """Stateful frame-by-frame user pose generator for one trial."""

    def __init__(self, vois: list[VOI], start: Pose, params: WalkerParams, seed: int):
        if not vois:
            raise ValueError("walker needs at least one VOI")
        self.params = params
        self.target = vois[0]
        self.rng = random.Random(seed)
        self.position = start.position
        self.heading = start.heading
        # Search order: look over the distractors, end on the target
        # (find it, confirm, then commit).
        others = list(range(1, len(vois)))
        self.rng.shuffle(others)
        order = others + [0]
        self.scan_points = [vois[i].position for i in order]
        self.dwells = [self.rng.uniform(*params.decision_delay) for _ in order]
        self.decision_time = params.scan_base + sum(self.dwells)
        self.glance_points = [v.position for v in vois[1:]]
        self.glance_until = 0.0
        self.glance_at: Vec2 | None = None
        self.contact_radius = (
            params.contact_radius if params.contact_radius is not None else self.target.radius
        )
        self.walking = False
        self.arrived = False

    def _bearing(self, to: Vec2) -> float:
        d = to - self.position
        return math.atan2(d.y, d.x)

    def _turn_toward(self, bearing: float, dt: float) -> float:
        err = normalize_angle(bearing - self.heading)
        max_step = self.params.turn_rate * dt
        return normalize_angle(self.heading + max(-max_step, min(max_step, err)))

    def _scan_target(self, t: float) -> Vec2:
        elapsed = t - self.params.scan_base
        for point, dwell in zip(self.scan_points, self.dwells):
            if elapsed < dwell:
                return point
            elapsed -= dwell
        return self.scan_points[-1]

    def step(self, t: float, dt: float) -> UserState:
        """Advance to time t (one frame after the previous call) and report the pose."""
        p = self.params
        noise = self.rng.gauss(0.0, p.gaze_noise)
        glance_roll = self.rng.random()
        if self.arrived:
            return UserState(Pose(self.position, self.heading), True, t)

        if t < self.decision_time:
            if t >= p.scan_base:
                bearing = self._bearing(self._scan_target(t))
                self.heading = self._turn_toward(bearing + noise, dt)
            else:
                self.heading = normalize_angle(self.heading + p.turn_rate * 0.25 * dt)
            return UserState(Pose(self.position, self.heading), True, t)

        bearing = self._bearing(self.target.position)
        if not self.walking:
            err = abs(normalize_angle(bearing - self.heading))
            if err > 0.05:
                self.heading = self._turn_toward(bearing, dt)
                return UserState(Pose(self.position, self.heading), True, t)
            self.walking = True  # committed: gaze noise no longer stalls the walk

        # Walk straight at the target; the gaze may wander, the feet do not.
        gap = self.position.distance_to(self.target.position) - self.contact_radius
        speed = p.walk_speed
        if p.approach_distance > 0 and gap < p.approach_distance:
            frac = max(0.0, gap) / p.approach_distance
            speed = p.approach_speed + (p.walk_speed - p.approach_speed) * frac
        advance = min(speed * dt, gap)
        direction = Vec2(math.cos(bearing), math.sin(bearing))
        self.position = self.position + direction * advance
        if gap - advance <= 1e-12:
            # Contact: snap to the exact contact ring, square up on the target.
            self.position = self.target.position - direction * self.contact_radius
            self.heading = bearing
            self.arrived = True
            self.glance_at = None
            return UserState(Pose(self.position, self.heading), True, t)

        # Mid-walk glances at other objects; none inside the cutoff — the
        # user squares up on the target for the final reach.
        if self.glance_at is not None and (t >= self.glance_until or gap <= p.glance_cutoff):
            self.glance_at = None
        may_glance = (
            self.glance_points
            and gap > p.glance_cutoff
            and self.glance_at is None
            and glance_roll < p.glance_rate * dt
        )
        if may_glance:
            self.glance_at = self.glance_points[self.rng.randrange(len(self.glance_points))]
            self.glance_until = t + self.rng.uniform(*p.glance_duration)
        if self.glance_at is not None:
            look = self._bearing(self.glance_at)
        else:
            look = bearing
        self.heading = self._turn_toward(look + noise, dt)
        return UserState(Pose(self.position, self.heading), True, t)


def default_personas() -> list[WalkerParams]:
    """Six walker profiles standing in for a small participant panel."""
    return [
        WalkerParams(walk_speed=1.0, decision_delay=(1.0, 3.0), gaze_noise=0.10, glance_rate=0.30),
        WalkerParams(walk_speed=0.8, decision_delay=(1.5, 3.5), gaze_noise=0.08, glance_rate=0.20),
        WalkerParams(walk_speed=0.9, decision_delay=(1.0, 2.5), gaze_noise=0.12, glance_rate=0.40),
        WalkerParams(walk_speed=0.7, decision_delay=(2.0, 4.0), gaze_noise=0.06, glance_rate=0.15),
        WalkerParams(walk_speed=1.0, decision_delay=(1.0, 2.0), gaze_noise=0.15, glance_rate=0.50),
        WalkerParams(walk_speed=0.85, decision_delay=(1.5, 3.0), gaze_noise=0.10, glance_rate=0.25),
    ]
