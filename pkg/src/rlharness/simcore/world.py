"""Declarative world description and its JSON loader."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..busline.frames import valid_name
from ..errors import WorldError

DEFAULT_WHEEL_ANGLES_DEG = (60.0, 180.0, 300.0)
DEFAULT_IR_HEADINGS_DEG = tuple(40.0 * i for i in range(9))
IR_COUNT = 9


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float = 0.0

    def as_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "theta": self.theta}


@dataclass(frozen=True)
class Rect:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def contains(self, x: float, y: float) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y

    def as_dict(self) -> dict:
        return {"min_x": self.min_x, "min_y": self.min_y, "max_x": self.max_x, "max_y": self.max_y}


@dataclass(frozen=True)
class Target:
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class RobotSpec:
    name: str
    spawn: Pose2D
    body_radius: float = 0.225
    wheel_radius: float = 0.04
    wheel_offset: float = 0.135
    wheel_angles: tuple[float, float, float] = tuple(math.radians(a) for a in DEFAULT_WHEEL_ANGLES_DEG)
    ir_count: int = IR_COUNT
    ir_max_range: float = 0.30
    ir_headings: tuple[float, ...] = tuple(math.radians(a) for a in DEFAULT_IR_HEADINGS_DEG)
    max_wheel_speed: float = 31.4
    depth_rays: int = 16
    depth_fov: float = math.radians(90.0)
    depth_max_range: float = 3.0

    @property
    def depth_headings(self) -> tuple[float, ...]:
        n = self.depth_rays
        if n == 1:
            return (0.0,)
        half = self.depth_fov / 2.0
        return tuple(-half + self.depth_fov * i / (n - 1) for i in range(n))


@dataclass(frozen=True)
class WorldSpec:
    basic_timestep_ms: int
    supervisor_name: str
    arena: Rect
    target: Target
    robots: tuple[RobotSpec, ...]
    obstacles: tuple[Rect, ...] = ()
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def dt(self) -> float:
        return self.basic_timestep_ms / 1000.0

    def robot(self, name: str) -> RobotSpec:
        for spec in self.robots:
            if spec.name == name:
                return spec
        raise KeyError(name)

    @property
    def node_names(self) -> list[str]:
        return [self.supervisor_name, *(r.name for r in self.robots)]


# -- clearance geometry used for validation and collision ------------------


def rect_distance(rect: Rect, x: float, y: float) -> float:
    """Signed distance from a point to a rectangle (negative inside)."""
    dx = max(rect.min_x - x, 0.0, x - rect.max_x)
    dy = max(rect.min_y - y, 0.0, y - rect.max_y)
    if dx > 0.0 or dy > 0.0:
        return math.hypot(dx, dy)
    return -min(x - rect.min_x, rect.max_x - x, y - rect.min_y, rect.max_y - y)


def clearance(world: WorldSpec, x: float, y: float, radius: float) -> float:
    """Gap between a disc and the nearest wall or obstacle; negative means overlap."""
    a = world.arena
    gap = min(x - a.min_x, a.max_x - x, y - a.min_y, a.max_y - y) - radius
    for obs in world.obstacles:
        gap = min(gap, rect_distance(obs, x, y) - radius)
    return gap


# -- loading ---------------------------------------------------------------

_ROBOT_KEYS = {
    "name",
    "spawn",
    "body_radius",
    "wheel_radius",
    "wheel_offset",
    "wheel_angles_deg",
    "ir_count",
    "ir_max_range",
    "ir_headings_deg",
    "max_wheel_speed",
    "depth_rays",
    "depth_fov_deg",
    "depth_max_range",
}
_WORLD_KEYS = {"basic_timestep_ms", "supervisor_name", "arena", "obstacles", "target", "robots"}


def _require(obj: dict, key: str, where: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise WorldError(message=f"{where}: missing field {key!r}")
    return obj[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise WorldError(message=f"{where}: expected a finite number, got {value!r}")
    return float(value)


def _rect(obj: Any, where: str) -> Rect:
    rect = Rect(*(_number(_require(obj, k, where), f"{where}.{k}") for k in ("min_x", "min_y", "max_x", "max_y")))
    if rect.min_x >= rect.max_x or rect.min_y >= rect.max_y:
        raise WorldError(message=f"{where}: empty rectangle {rect.as_dict()}")
    return rect


def _robot(obj: Any, where: str) -> RobotSpec:
    if not isinstance(obj, dict):
        raise WorldError(message=f"{where}: expected an object")
    unknown = set(obj) - _ROBOT_KEYS
    if unknown:
        raise WorldError(message=f"{where}: unknown fields {sorted(unknown)}")
    name = _require(obj, "name", where)
    spawn_obj = _require(obj, "spawn", where)
    spawn = Pose2D(
        _number(_require(spawn_obj, "x", f"{where}.spawn"), f"{where}.spawn.x"),
        _number(_require(spawn_obj, "y", f"{where}.spawn"), f"{where}.spawn.y"),
        wrap_angle(_number(spawn_obj.get("theta", 0.0), f"{where}.spawn.theta")),
    )
    kwargs: dict[str, Any] = {}
    for key in ("body_radius", "wheel_radius", "wheel_offset", "ir_max_range", "max_wheel_speed", "depth_max_range"):
        if key in obj:
            kwargs[key] = _number(obj[key], f"{where}.{key}")
    for key in ("ir_count", "depth_rays"):
        if key in obj:
            if not isinstance(obj[key], int) or isinstance(obj[key], bool):
                raise WorldError(message=f"{where}.{key}: expected an integer")
            kwargs[key] = obj[key]
    if "depth_fov_deg" in obj:
        kwargs["depth_fov"] = math.radians(_number(obj["depth_fov_deg"], f"{where}.depth_fov_deg"))
    if "wheel_angles_deg" in obj:
        angles = obj["wheel_angles_deg"]
        if not isinstance(angles, list) or len(angles) != 3:
            raise WorldError(message=f"{where}.wheel_angles_deg: expected 3 angles")
        kwargs["wheel_angles"] = tuple(math.radians(_number(a, f"{where}.wheel_angles_deg")) for a in angles)
    if "ir_headings_deg" in obj:
        headings = obj["ir_headings_deg"]
        if not isinstance(headings, list):
            raise WorldError(message=f"{where}.ir_headings_deg: expected a list")
        kwargs["ir_headings"] = tuple(math.radians(_number(a, f"{where}.ir_headings_deg")) for a in headings)
    spec = RobotSpec(name=name, spawn=spawn, **kwargs)
    _validate_robot(spec, where)
    return spec


def _validate_robot(spec: RobotSpec, where: str) -> None:
    if not valid_name(spec.name):
        raise WorldError(message=f"{where}: invalid node name {spec.name!r}")
    for key in ("body_radius", "wheel_radius", "wheel_offset", "ir_max_range", "max_wheel_speed", "depth_max_range", "depth_fov"):
        if getattr(spec, key) <= 0:
            raise WorldError(message=f"{where}.{key}: must be > 0")
    if spec.ir_count != IR_COUNT or len(spec.ir_headings) != IR_COUNT:
        raise WorldError(message=f"{where}: exactly {IR_COUNT} IR sensors are supported")
    if spec.depth_rays < 1:
        raise WorldError(message=f"{where}.depth_rays: must be >= 1")
    # the closed-form kinematics assume three wheels spaced 120 degrees apart
    a = sorted(math.remainder(x, 2 * math.pi) % (2 * math.pi) for x in spec.wheel_angles)
    gaps = [a[1] - a[0], a[2] - a[1], 2 * math.pi - (a[2] - a[0])]
    if any(abs(g - 2 * math.pi / 3) > 1e-9 for g in gaps):
        raise WorldError(message=f"{where}.wheel_angles_deg: wheels must be spaced 120 degrees apart")


def world_from_dict(doc: Any, source: str = "<world>") -> WorldSpec:
    if not isinstance(doc, dict):
        raise WorldError(message=f"{source}: world must be a JSON object")
    unknown = set(doc) - _WORLD_KEYS
    if unknown:
        raise WorldError(message=f"{source}: unknown fields {sorted(unknown)}")
    step = _require(doc, "basic_timestep_ms", source)
    if not isinstance(step, int) or isinstance(step, bool) or step < 1:
        raise WorldError(message=f"{source}: basic_timestep_ms must be an integer >= 1, got {step!r}")
    supervisor = _require(doc, "supervisor_name", source)
    if not valid_name(supervisor):
        raise WorldError(message=f"{source}: invalid supervisor_name {supervisor!r}")
    arena = _rect(_require(doc, "arena", source), f"{source}.arena")
    obstacles_doc = doc.get("obstacles", [])
    if not isinstance(obstacles_doc, list):
        raise WorldError(message=f"{source}.obstacles: expected a list")
    obstacles = tuple(_rect(o, f"{source}.obstacles[{i}]") for i, o in enumerate(obstacles_doc))
    t = _require(doc, "target", source)
    target = Target(
        _number(_require(t, "x", f"{source}.target"), f"{source}.target.x"),
        _number(_require(t, "y", f"{source}.target"), f"{source}.target.y"),
        _number(t.get("radius", 0.1), f"{source}.target.radius"),
    )
    if target.radius <= 0:
        raise WorldError(message=f"{source}.target.radius: must be > 0")
    robots_doc = _require(doc, "robots", source)
    if not isinstance(robots_doc, list) or not robots_doc:
        raise WorldError(message=f"{source}.robots: expected a non-empty list")
    robots = tuple(_robot(r, f"{source}.robots[{i}]") for i, r in enumerate(robots_doc))

    world = WorldSpec(step, supervisor, arena, target, robots, obstacles, raw=doc)

    names = world.node_names
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise WorldError(message=f"{source}: duplicate node names {dupes}")
    if not arena.contains(target.x, target.y) or any(o.contains(target.x, target.y) for o in obstacles):
        raise WorldError(message=f"{source}: target ({target.x}, {target.y}) is outside the arena or inside an obstacle")
    for r in robots:
        if clearance(world, r.spawn.x, r.spawn.y, r.body_radius) < 0:
            raise WorldError(
                message=f"{source}: robot {r.name} spawn ({r.spawn.x}, {r.spawn.y}) overlaps a wall or obstacle"
            )
    return world


def load_world(path: str | Path) -> WorldSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise WorldError(message=f"cannot read world file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise WorldError(message=f"{path}: not valid JSON: {exc}") from exc
    return world_from_dict(doc, str(path))
