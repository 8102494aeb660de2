"""Planar geometry primitives and the shared simulation configuration.

Everything downstream uses one coordinate frame: origin at an arena corner,
+x along the width, +y along the length, headings in radians measured
counter-clockwise from +x. Lengths are meters, times are seconds, angles
are radians — in every file format and wire message as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

# Physics and trace frame rate share one fixed step.
FRAME_RATE = 75.0
FRAME_DT = 1.0 / FRAME_RATE


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a!r}")
    r = math.remainder(a, TWO_PI)  # lands in [-pi, pi]
    return math.pi if r <= -math.pi else r


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> "Vec2":
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def distance_to(self, other: "Vec2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


ZERO = Vec2(0.0, 0.0)


@dataclass(frozen=True)
class Pose:
    """Position plus heading; heading is normalized on construction."""

    position: Vec2
    heading: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", normalize_angle(self.heading))


@dataclass(frozen=True)
class Arena:
    """Planar footprint of the play area with the soft-stop margin at the rails."""

    width: float = 4.0
    length: float = 4.0
    safety_margin: float = 0.02

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.length > 0):
            raise ValueError("arena extents must be positive")
        if not (0 <= self.safety_margin < min(self.width, self.length) / 2):
            raise ValueError("safety_margin must be in [0, min(extent)/2)")

    def contains(self, p: Vec2, margin: float = 0.0) -> bool:
        return (margin <= p.x <= self.width - margin) and (
            margin <= p.y <= self.length - margin
        )


def clamp_to_arena(p: Vec2, arena: Arena) -> Vec2:
    """Clamp a point into the arena minus the safety margin on every side."""
    m = arena.safety_margin
    return Vec2(
        min(max(p.x, m), arena.width - m),
        min(max(p.y, m), arena.length - m),
    )


@dataclass(frozen=True)
class VOI:
    """A virtual object of interest the user may choose to touch.

    `prior` is the scenario-supplied probability of this object being the
    next interaction target; `physical_offset` maps the virtual position to
    the physical panel spot the robot should cover (None = no offset).
    """

    id: str
    position: Vec2
    radius: float = 0.05
    prior: float = 1.0
    physical_offset: Vec2 | None = None

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError(f"voi {self.id!r}: radius must be positive")
        if not 0.0 <= self.prior <= 1.0:
            raise ValueError(f"voi {self.id!r}: prior must be within [0, 1]")

    def physical_position(self) -> Vec2:
        if self.physical_offset is None:
            return self.position
        return self.position + self.physical_offset

    def surface_distance(self, p: Vec2) -> float:
        """Distance from a point to the object surface, floored at 0 inside."""
        return max(0.0, self.position.distance_to(p) - self.radius)


@dataclass(frozen=True)
class UserState:
    """Tracked user pose at one frame; `tracked` is the tracker validity flag."""

    pose: Pose
    tracked: bool = True
    time: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    """All tunable constants of the planner, dynamics and safety rules."""

    omega: float = 0.175
    dt: float = FRAME_DT
    stickiness_threshold: float = 0.8
    obstacle_radius_far: float = 0.45
    obstacle_radius_near: float = 0.20
    near_voi_distance: float = 0.20
    success_distance: float = 0.10
    spring_stiffness: float = 40.0
    spring_damping: float = 12.6
    proxy_mass: float = 1.0
    obstacle_stiffness: float = 120.0
    # Repulsion band of the disc that follows the user. Contact-only (0) by
    # default: any long-range push lets an approaching user shove the parked
    # proxy (and the robot behind it) out of the success envelope.
    user_obstacle_band: float = 0.0
    tracking_loss_timeout: float = 0.5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError("omega must be within [0, 1]")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.stickiness_threshold <= 1.0:
            raise ValueError("stickiness_threshold must be within [0, 1]")
        if self.obstacle_radius_near > self.obstacle_radius_far:
            raise ValueError("obstacle_radius_near must not exceed obstacle_radius_far")
        for name in (
            "obstacle_radius_far",
            "obstacle_radius_near",
            "near_voi_distance",
            "success_distance",
            "spring_stiffness",
            "spring_damping",
            "proxy_mass",
            "obstacle_stiffness",
            "tracking_loss_timeout",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.user_obstacle_band < 0:
            raise ValueError("user_obstacle_band must be >= 0")
