"""Per-object intention weights and the command position they induce.

Each object gets a weight blending closeness and how directly the user is
facing it; weights above the stickiness threshold are rounded up to 1 so
the robot stays parked while the user lingers, then scaled by the
scenario prior. The command position is the weight-averaged physical
position of all objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import VOI, Arena, Pose, UserState, SimConfig, Vec2, clamp_to_arena, normalize_angle

# Below this total weight the centroid is undefined and the previous
# command is held instead.
DEGENERATE_TOTAL_WEIGHT = 1e-6


@dataclass(frozen=True)
class WeightEntry:
    voi_id: str
    raw: float
    effective: float


@dataclass(frozen=True)
class WeightVector:
    entries: tuple[WeightEntry, ...]

    def effective(self, voi_id: str) -> float:
        for e in self.entries:
            if e.voi_id == voi_id:
                return e.effective
        raise KeyError(voi_id)

    def total(self) -> float:
        return sum(e.effective for e in self.entries)

    def argmax(self) -> str:
        return max(self.entries, key=lambda e: e.effective).voi_id


@dataclass(frozen=True)
class CommandPosition:
    """Where the spring pulls the proxy; degenerate = held from last frame."""

    target: Vec2
    degenerate: bool = False


def distance_score(d: float) -> float:
    """Closeness factor 1/(1+d); 1 at touch, decaying with distance."""
    if not (math.isfinite(d) and d >= 0):
        raise ValueError(f"distance must be finite and >= 0, got {d!r}")
    return 1.0 / (1.0 + d)


def orientation_score(theta: float) -> float:
    """Facing factor exp(cos(theta) - 1); 1 when the gaze ray hits the object."""
    if not (0.0 <= theta <= math.pi):
        raise ValueError(f"theta must be within [0, pi], got {theta!r}")
    return math.exp(math.cos(theta) - 1.0)


def angular_offset(user: Pose, voi: VOI) -> float:
    """Angle between the user's heading ray and the object's disc, in [0, pi].

    Zero whenever the ray intersects the disc (or the user stands inside it);
    otherwise the angle left over after subtracting the disc's angular
    half-width from the bearing error.
    """
    to_voi = voi.position - user.position
    d = to_voi.norm()
    if d <= voi.radius:
        return 0.0
    alpha = abs(normalize_angle(math.atan2(to_voi.y, to_voi.x) - user.heading))
    beta = math.asin(voi.radius / d)
    return max(0.0, alpha - beta)


def raw_weight(d: float, theta: float, omega: float) -> float:
    """Blend of the two evidence scores: omega*D(d) + (1-omega)*O(theta)."""
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must be within [0, 1], got {omega!r}")
    return omega * distance_score(d) + (1.0 - omega) * orientation_score(theta)


def apply_stickiness(w: float, threshold: float) -> float:
    """Round a weight strictly above the threshold up to 1."""
    return 1.0 if w > threshold else w


def apply_prior(w: float, prior: float) -> float:
    """Scale a weight by the scenario prior probability."""
    return w * prior


def compute_weights(user: UserState, vois: list[VOI], config: SimConfig) -> WeightVector:
    """Evaluate every object's weight for one tracked user frame.

    Distance is taken to the object surface so the closeness score is exactly
    1 at touch. Stickiness applies before the prior, so a prior below 1 caps
    the effective weight at that prior.
    """
    if not vois:
        raise ValueError("at least one VOI is required")
    if not user.tracked:
        raise ValueError("weights require a tracked user")
    entries = []
    for voi in vois:
        d = voi.surface_distance(user.pose.position)
        theta = angular_offset(user.pose, voi)
        raw = raw_weight(d, theta, config.omega)
        effective = apply_prior(
            apply_stickiness(raw, config.stickiness_threshold), voi.prior
        )
        entries.append(WeightEntry(voi.id, raw, effective))
    return WeightVector(tuple(entries))


def command_position(
    weights: WeightVector,
    vois: list[VOI],
    previous: CommandPosition,
    arena: Arena,
) -> CommandPosition:
    """Weight-averaged physical position of the objects, clamped to the arena.

    When the total weight is (near) zero there is no meaningful centroid and
    the previous command is held, flagged degenerate.
    """
    by_id = {e.voi_id: e for e in weights.entries}
    if len(by_id) != len(weights.entries) or set(by_id) != {v.id for v in vois}:
        raise ValueError("weight entries do not match the VOI set")
    total = weights.total()
    if total < DEGENERATE_TOTAL_WEIGHT:
        return CommandPosition(previous.target, degenerate=True)
    sx = sy = 0.0
    for voi in vois:
        w = by_id[voi.id].effective
        p = voi.physical_position()
        sx += w * p.x
        sy += w * p.y
    return CommandPosition(clamp_to_arena(Vec2(sx / total, sy / total), arena))
