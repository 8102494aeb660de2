"""Proxy ball dynamics: spring pull, obstacle repulsion, hard non-penetration.

The ball is pulled by a damped spring toward the command position and pushed
radially away from keep-out discs (the user, optionally furniture). A
quadratic force ramp inside each disc's influence band gives the smooth
deceleration of the original rolling-contact behavior; a hard projection
guarantees the ball never ends a step inside a disc or outside the arena
margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .geometry import VOI, Arena, SimConfig, UserState, Vec2, clamp_to_arena
from .intention import CommandPosition

# Width of the blend between the far and near obstacle radius, keyed on the
# user's surface distance to the closest object.
RADIUS_BLEND_BAND = 0.10

# Penetrations smaller than this are treated as resolved.
PENETRATION_EPS = 1e-12


@dataclass(frozen=True)
class ProxyState:
    position: Vec2
    velocity: Vec2 = Vec2(0.0, 0.0)


@dataclass(frozen=True)
class ObstacleState:
    """A keep-out disc with a surrounding repulsive influence band."""

    center: Vec2
    radius: float
    influence_band: float = 0.30


def obstacle_radius(user: UserState, vois: Sequence[VOI], config: SimConfig) -> float:
    """Current user keep-out radius, shrinking near objects of interest.

    Full radius away from every object, the near radius once the user is
    within `near_voi_distance` of a surface, linearly blended over a 10 cm
    band between the two so the radius never jumps.
    """
    if not vois:
        raise ValueError("at least one VOI is required")
    s = min(v.surface_distance(user.pose.position) for v in vois)
    near, far = config.obstacle_radius_near, config.obstacle_radius_far
    if s <= config.near_voi_distance:
        return near
    if s >= config.near_voi_distance + RADIUS_BLEND_BAND:
        return far
    t = (s - config.near_voi_distance) / RADIUS_BLEND_BAND
    return near + t * (far - near)


def spring_force(proxy: ProxyState, command: CommandPosition, config: SimConfig) -> Vec2:
    """Damped spring force pulling the proxy toward the command position."""
    k, c = config.spring_stiffness, config.spring_damping
    delta = command.target - proxy.position
    return Vec2(
        k * delta.x - c * proxy.velocity.x,
        k * delta.y - c * proxy.velocity.y,
    )


def obstacle_force(proxy: ProxyState, obstacle: ObstacleState, k_obs: float) -> Vec2:
    """Radially outward push with a quadratic ramp inside the influence band."""
    if obstacle.influence_band <= 0.0:
        return Vec2(0.0, 0.0)  # contact-only disc: the hard projection handles it
    delta = proxy.position - obstacle.center
    dist = delta.norm()
    reach = obstacle.radius + obstacle.influence_band
    if dist >= reach:
        return Vec2(0.0, 0.0)
    s = min(1.0, (reach - dist) / obstacle.influence_band)
    if dist < 1e-6:
        direction = Vec2(1.0, 0.0)  # degenerate overlap: push along +x
    else:
        direction = Vec2(delta.x / dist, delta.y / dist)
    return direction * (k_obs * s * s)


def _project_out_of_disc(p: Vec2, obstacle: ObstacleState, arena: Arena) -> Vec2:
    """Nearest point to p that is outside the disc and inside the arena margins."""
    c, r = obstacle.center, obstacle.radius
    delta = p - c
    dist = delta.norm()
    if dist < 1e-6:
        delta, dist = Vec2(1.0, 0.0), 1.0
    candidate = c + delta * (r / dist)
    if arena.contains(candidate, arena.safety_margin):
        return candidate
    # The radial projection leaves the arena: walk the circle/wall
    # intersections and the clamped walls for the nearest feasible point.
    m = arena.safety_margin
    lo_x, hi_x = m, arena.width - m
    lo_y, hi_y = m, arena.length - m
    candidates: list[Vec2] = []
    for x in (lo_x, hi_x):
        h2 = r * r - (x - c.x) ** 2
        if h2 >= 0.0:
            h = math.sqrt(h2)
            for y in (c.y - h, c.y + h):
                if lo_y <= y <= hi_y:
                    candidates.append(Vec2(x, y))
    for y in (lo_y, hi_y):
        h2 = r * r - (y - c.y) ** 2
        if h2 >= 0.0:
            h = math.sqrt(h2)
            for x in (c.x - h, c.x + h):
                if lo_x <= x <= hi_x:
                    candidates.append(Vec2(x, y))
    for corner in (Vec2(lo_x, lo_y), Vec2(lo_x, hi_y), Vec2(hi_x, lo_y), Vec2(hi_x, hi_y)):
        if corner.distance_to(c) >= r:
            candidates.append(corner)
    if not candidates:
        # Disc swallows the whole arena; impossible with validated configs.
        return clamp_to_arena(candidate, arena)
    return min(candidates, key=lambda q: q.distance_to(p))


def _strip_inward_velocity(v: Vec2, p: Vec2, obstacle: ObstacleState) -> Vec2:
    delta = p - obstacle.center
    dist = delta.norm()
    if dist < 1e-6:
        return v
    n = Vec2(delta.x / dist, delta.y / dist)
    vn = v.dot(n)
    if vn < 0.0:
        return v - n * vn
    return v


def step_proxy(
    proxy: ProxyState,
    command: CommandPosition,
    obstacle: ObstacleState,
    arena: Arena,
    config: SimConfig,
    extra_obstacles: Iterable[ObstacleState] = (),
) -> ProxyState:
    """Advance the proxy one fixed step (semi-implicit integration).

    Velocity first, then position, then the hard constraints: project out of
    every keep-out disc (removing the inward velocity component) and clamp to
    the arena margins (zeroing the clamped velocity component).
    """
    obstacles = [obstacle, *extra_obstacles]
    force = spring_force(proxy, command, config)
    for obs in obstacles:
        force = force + obstacle_force(proxy, obs, config.obstacle_stiffness)
    dt, m = config.dt, config.proxy_mass
    v = Vec2(
        proxy.velocity.x + force.x / m * dt,
        proxy.velocity.y + force.y / m * dt,
    )
    p = Vec2(proxy.position.x + v.x * dt, proxy.position.y + v.y * dt)

    for _ in range(8):
        worst = None
        worst_depth = PENETRATION_EPS
        for obs in obstacles:
            depth = obs.radius - p.distance_to(obs.center)
            if depth > worst_depth:
                worst, worst_depth = obs, depth
        if worst is None:
            break
        p = _project_out_of_disc(p, worst, arena)
        v = _strip_inward_velocity(v, p, worst)

    clamped = clamp_to_arena(p, arena)
    if clamped.x != p.x:
        v = Vec2(0.0, v.y)
    if clamped.y != p.y:
        v = Vec2(v.x, 0.0)
    return ProxyState(clamped, v)
