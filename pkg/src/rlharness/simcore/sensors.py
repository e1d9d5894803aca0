"""Range sensors: rays cast from the robot body edge against walls and obstacles."""

from __future__ import annotations

import math

from .world import Pose2D, Rect, RobotSpec, WorldSpec


def _ray_rect_entry(ox: float, oy: float, dx: float, dy: float, rect: Rect) -> float:
    """Smallest t >= 0 where the ray enters ``rect`` (slab method), inf if never."""
    t_lo, t_hi = 0.0, math.inf
    for o, d, lo, hi in ((ox, dx, rect.min_x, rect.max_x), (oy, dy, rect.min_y, rect.max_y)):
        if abs(d) < 1e-15:
            if o < lo or o > hi:
                return math.inf
            continue
        t1, t2 = (lo - o) / d, (hi - o) / d
        if t1 > t2:
            t1, t2 = t2, t1
        t_lo, t_hi = max(t_lo, t1), min(t_hi, t2)
        if t_lo > t_hi:
            return math.inf
    return t_lo


def _ray_arena_exit(ox: float, oy: float, dx: float, dy: float, arena: Rect) -> float:
    t = math.inf
    if dx > 0:
        t = min(t, (arena.max_x - ox) / dx)
    elif dx < 0:
        t = min(t, (arena.min_x - ox) / dx)
    if dy > 0:
        t = min(t, (arena.max_y - oy) / dy)
    elif dy < 0:
        t = min(t, (arena.min_y - oy) / dy)
    return max(t, 0.0)


def ray_distance(
    origin: Pose2D,
    heading: float,
    max_range: float,
    world: WorldSpec,
    body_radius: float = 0.0,
) -> float:
    """Distance from the body edge to the first wall or obstacle along a ray.

    The ray starts at the body centre and points at ``origin.theta + heading``
    in the world frame; the reading is measured from ``body_radius`` out and
    clamped to ``[0, max_range]``.
    """
    phi = origin.theta + heading
    dx, dy = math.cos(phi), math.sin(phi)
    ox, oy = origin.x, origin.y
    hit = _ray_arena_exit(ox, oy, dx, dy, world.arena)
    for obs in world.obstacles:
        hit = min(hit, _ray_rect_entry(ox, oy, dx, dy, obs))
    return min(max(hit - body_radius, 0.0), max_range)


def ir_readings(pose: Pose2D, spec: RobotSpec, world: WorldSpec) -> list[float]:
    return [ray_distance(pose, h, spec.ir_max_range, world, spec.body_radius) for h in spec.ir_headings]


def depth_readings(pose: Pose2D, spec: RobotSpec, world: WorldSpec) -> list[float]:
    return [ray_distance(pose, h, spec.depth_max_range, world, spec.body_radius) for h in spec.depth_headings]
