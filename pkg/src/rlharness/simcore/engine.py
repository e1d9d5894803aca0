"""Deterministic world stepping: kinematics, stop-at-contact collisions, sensors.

:class:`Simulation` owns all world state. It has no I/O; each :meth:`step`
returns the sensor publications that fell due, as ``(topic, payload)``
pairs, and the caller decides where they go.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from ..errors import HarnessError, SensorError
from .kinematics import Twist, clamp_wheel_speeds, forward_kinematics, integrate_pose
from .sensors import depth_readings, ir_readings
from .world import Pose2D, RobotSpec, WorldSpec, clearance, wrap_angle

SENSORS = ("ir", "touch", "depth", "color")
SUPPORTED_SENSORS = ("ir", "touch", "depth")
# longest straight sub-segment checked for collisions inside one step
COLLISION_SAMPLE = 0.01
BISECT_ITERS = 50


class SimulationMode(str, enum.Enum):
    PAUSE = "PAUSE"
    FAST = "FAST"

    @classmethod
    def parse(cls, value: str) -> "SimulationMode":
        try:
            return cls(str(value).upper())
        except ValueError:
            raise HarnessError("BAD_MODE", f"unknown simulation mode {value!r}") from None


@dataclass
class RobotState:
    pose: Pose2D
    wheel_speeds: tuple[float, float, float] = (0.0, 0.0, 0.0)
    touch: bool = False
    ir: list[float] = field(default_factory=list)
    depth: list[float] = field(default_factory=list)
    # sensor name -> sim time of its last publication
    sensor_stamps: dict[str, float] = field(default_factory=dict)


def advance_robot(
    pose: Pose2D, wheel_speeds, spec: RobotSpec, world: WorldSpec, dt: float
) -> tuple[Pose2D, bool]:
    """Move one robot for ``dt``; stop at the first contact along the path.

    Returns the new pose and whether the motion was blocked. The accepted
    pose always has non-negative clearance.
    """
    twist: Twist = forward_kinematics(wheel_speeds, spec)

    def at(s: float) -> tuple[float, float, float]:
        return integrate_pose(pose.x, pose.y, pose.theta, twist, s * dt)

    def free(s: float) -> bool:
        x, y, _ = at(s)
        return clearance(world, x, y, spec.body_radius) >= 0.0

    speed = math.hypot(twist.vx, twist.vy)
    samples = max(1, math.ceil(speed * dt / COLLISION_SAMPLE))
    lo = 0.0
    blocked = False
    for k in range(1, samples + 1):
        s = k / samples
        if free(s):
            lo = s
            continue
        hi = s
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if free(mid):
                lo = mid
            else:
                hi = mid
        blocked = True
        break
    x, y, th = at(lo)
    return Pose2D(x, y, wrap_angle(th)), blocked


class Simulation:
    def __init__(self, world: WorldSpec, mode: SimulationMode = SimulationMode.PAUSE):
        self.world = world
        self.mode = mode
        self.step_count = 0
        self.reset_count = 0
        self.robots: dict[str, RobotState] = {}
        # robot -> sensor -> period in steps
        self.enabled: dict[str, dict[str, int]] = {r.name: {} for r in world.robots}
        self._restore()

    @property
    def sim_time(self) -> float:
        return self.step_count * self.world.basic_timestep_ms / 1000.0

    def _restore(self) -> None:
        self.step_count = 0
        self.robots = {}
        for spec in self.world.robots:
            state = RobotState(pose=spec.spawn)
            state.touch = clearance(self.world, spec.spawn.x, spec.spawn.y, spec.body_radius) <= 1e-9
            state.ir = ir_readings(spec.spawn, spec, self.world)
            self.robots[spec.name] = state

    def reset(self) -> None:
        """Restore spawn poses, zero wheels and time, clear sensor stamps.

        Sensor enablement survives a reset.
        """
        self.reset_count += 1
        self._restore()

    # -- devices -----------------------------------------------------------

    def _spec(self, robot: str) -> RobotSpec:
        try:
            return self.world.robot(robot)
        except KeyError:
            raise SensorError("NO_SUCH_ROBOT", f"no robot named {robot!r}") from None

    def enable_sensor(self, robot: str, sensor: str, period_ms: int) -> int:
        self._spec(robot)
        if sensor == "color":
            raise SensorError("UNSUPPORTED", "color camera is not simulated")
        if sensor not in SUPPORTED_SENSORS:
            raise SensorError("NO_SUCH_SENSOR", f"unknown sensor {sensor!r}")
        step = self.world.basic_timestep_ms
        if (
            isinstance(period_ms, bool)
            or not isinstance(period_ms, (int, float))
            or period_ms <= 0
            or period_ms != int(period_ms)
            or int(period_ms) % step
        ):
            raise SensorError(
                "BAD_PERIOD", f"period {period_ms} ms is not a positive multiple of the {step} ms timestep"
            )
        period_steps = int(period_ms) // step
        self.enabled[robot][sensor] = period_steps
        return period_steps

    def disable_sensor(self, robot: str, sensor: str) -> None:
        self._spec(robot)
        self.enabled[robot].pop(sensor, None)

    def set_wheel_velocity(self, robot: str, index: int, value: float) -> None:
        spec = self._spec(robot)
        if not isinstance(index, int) or not 0 <= index < 3:
            raise SensorError("BAD_INDEX", f"wheel index {index!r} out of range")
        speeds = list(self.robots[robot].wheel_speeds)
        speeds[index] = value
        self.robots[robot].wheel_speeds = clamp_wheel_speeds(speeds, spec.max_wheel_speed)

    def set_wheel_velocities(self, robot: str, values) -> None:
        spec = self._spec(robot)
        if len(values) != 3 or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in values):
            raise SensorError("BAD_VALUES", "expected three finite wheel velocities")
        self.robots[robot].wheel_speeds = clamp_wheel_speeds(values, spec.max_wheel_speed)

    # -- stepping ----------------------------------------------------------

    def step(self) -> list[tuple[str, dict]]:
        dt = self.world.dt
        for spec in self.world.robots:
            state = self.robots[spec.name]
            state.pose, blocked = advance_robot(state.pose, state.wheel_speeds, spec, self.world, dt)
            state.touch = blocked or clearance(self.world, state.pose.x, state.pose.y, spec.body_radius) <= 1e-9
        self.step_count += 1
        return self._due_publications()

    def _due_publications(self) -> list[tuple[str, dict]]:
        out = []
        stamp = self.sim_time
        for spec in self.world.robots:
            state = self.robots[spec.name]
            for sensor, period in self.enabled[spec.name].items():
                if self.step_count % period:
                    continue
                if sensor == "ir":
                    state.ir = ir_readings(state.pose, spec, self.world)
                    payload = {"stamp": stamp, "values": list(state.ir)}
                elif sensor == "touch":
                    payload = {"stamp": stamp, "value": state.touch}
                else:
                    state.depth = depth_readings(state.pose, spec, self.world)
                    payload = {"stamp": stamp, "values": list(state.depth)}
                state.sensor_stamps[sensor] = stamp
                out.append((f"{spec.name}/{sensor}", payload))
        return out

    def dump(self) -> dict:
        """Full state snapshot (white-box test hook)."""
        return {
            "sim_time": self.sim_time,
            "step_count": self.step_count,
            "reset_count": self.reset_count,
            "mode": self.mode.value,
            "robots": {
                name: {
                    "pose": s.pose.as_dict(),
                    "wheel_speeds": list(s.wheel_speeds),
                    "touch": s.touch,
                    "sensor_stamps": dict(s.sensor_stamps),
                    "enabled": dict(self.enabled[name]),
                }
                for name, s in self.robots.items()
            },
        }
