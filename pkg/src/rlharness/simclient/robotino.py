"""Robotino interface, its bus-backed facade, and the discrete movement actions."""

from __future__ import annotations

import enum
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from ..busline import BusClient
from ..errors import SensorError
from ..simcore.kinematics import Twist, clamp_wheel_speeds, inverse_kinematics
from ..simcore.world import RobotSpec
from .devices import Camera, DistanceSensor, Motor, TouchSensor, _device_call

LINEAR_SPEED = 0.2
ANGULAR_SPEED = 1.0


class MovementAction(enum.IntEnum):
    STOP = 0
    FORWARD = 1
    BACKWARD = 2
    LEFT = 3
    RIGHT = 4
    FORWARD_LEFT = 5
    FORWARD_RIGHT = 6
    BACKWARD_LEFT = 7
    BACKWARD_RIGHT = 8
    TURN_LEFT = 9
    TURN_RIGHT = 10


_D = LINEAR_SPEED / math.sqrt(2.0)

# body frame: +x forward, +y left, +omega counter-clockwise
ACTION_TWISTS: dict[MovementAction, Twist] = {
    MovementAction.STOP: Twist(0.0, 0.0, 0.0),
    MovementAction.FORWARD: Twist(LINEAR_SPEED, 0.0, 0.0),
    MovementAction.BACKWARD: Twist(-LINEAR_SPEED, 0.0, 0.0),
    MovementAction.LEFT: Twist(0.0, LINEAR_SPEED, 0.0),
    MovementAction.RIGHT: Twist(0.0, -LINEAR_SPEED, 0.0),
    MovementAction.FORWARD_LEFT: Twist(_D, _D, 0.0),
    MovementAction.FORWARD_RIGHT: Twist(_D, -_D, 0.0),
    MovementAction.BACKWARD_LEFT: Twist(-_D, _D, 0.0),
    MovementAction.BACKWARD_RIGHT: Twist(-_D, -_D, 0.0),
    MovementAction.TURN_LEFT: Twist(0.0, 0.0, ANGULAR_SPEED),
    MovementAction.TURN_RIGHT: Twist(0.0, 0.0, -ANGULAR_SPEED),
}


def parse_action(value) -> MovementAction:
    if isinstance(value, MovementAction):
        return value
    if isinstance(value, str):
        try:
            return MovementAction[value.upper()]
        except KeyError:
            raise ValueError(f"unknown movement action {value!r}") from None
    return MovementAction(int(value))


@dataclass(frozen=True)
class RobotinoReading:
    ir: tuple[float, ...]
    touch: bool
    stamps: dict = field(default_factory=dict)


class RobotinoAbc(ABC):
    """What an environment needs from a Robotino, simulated or real."""

    spec: RobotSpec

    @property
    def name(self) -> str:
        return self.spec.name

    def wheel_speeds(self, action: MovementAction) -> tuple[float, float, float]:
        twist = ACTION_TWISTS[parse_action(action)]
        return clamp_wheel_speeds(inverse_kinematics(twist, self.spec), self.spec.max_wheel_speed)

    @abstractmethod
    def enable_sensors(self, period_ms: int) -> None: ...

    @abstractmethod
    def apply_action(self, action: MovementAction) -> None: ...

    @abstractmethod
    def observe(self) -> RobotinoReading:
        """Latest readings; raises ``SensorError(STALE_SENSORS)`` if any is missing."""

    @abstractmethod
    def discard_readings(self) -> None:
        """Invalidate held readings so only post-reset values count."""

    def close(self) -> None:
        pass


class Robotino(RobotinoAbc):
    def __init__(self, bus: BusClient, spec: RobotSpec, basic_timestep_ms: int):
        self.bus = bus
        self.spec = spec
        self.basic_timestep_ms = basic_timestep_ms
        self.ir = DistanceSensor(bus, spec.name, basic_timestep_ms)
        self.touch = TouchSensor(bus, spec.name, basic_timestep_ms)
        self.depth_camera = Camera(bus, spec.name, basic_timestep_ms, "depth")
        self.color_camera = Camera(bus, spec.name, basic_timestep_ms, "color")
        self.motors = [Motor(bus, spec.name, i, spec.max_wheel_speed) for i in range(3)]

    @property
    def sensors(self):
        return (self.ir, self.touch)

    def enable_sensors(self, period_ms: int) -> None:
        for sensor in self.sensors:
            sensor.enable(period_ms)

    def apply_action(self, action: MovementAction) -> None:
        _device_call(self.bus, self.spec.name, "set_wheel_velocities", {"values": list(self.wheel_speeds(action))})

    def observe(self) -> RobotinoReading:
        ir, touch = self.ir.message(), self.touch.message()
        missing = [s.sensor for s, m in ((self.ir, ir), (self.touch, touch)) if m is None]
        if missing:
            raise SensorError("STALE_SENSORS", f"no valid reading yet from {', '.join(missing)}")
        return RobotinoReading(
            ir=tuple(ir["values"]),
            touch=bool(touch["value"]),
            stamps={"ir": ir["stamp"], "touch": touch["stamp"]},
        )

    def discard_readings(self) -> None:
        for sensor in (self.ir, self.touch, self.depth_camera):
            sensor.discard()

    def close(self) -> None:
        for sensor in (self.ir, self.touch, self.depth_camera, self.color_camera):
            sensor.close()
