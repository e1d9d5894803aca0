"""Client facades: simulator lifecycle handle, supervisor clients, devices, Robotino."""

from .devices import Camera, DistanceSensor, Motor, Sensor, TouchSensor
from .handle import DEFAULT_SIMULATOR_CMD, SimulatorHandle, build_command
from .local import LocalSimulator
from .robotino import (
    ACTION_TWISTS,
    ANGULAR_SPEED,
    LINEAR_SPEED,
    MovementAction,
    Robotino,
    RobotinoAbc,
    RobotinoReading,
    parse_action,
)
from .supervisor import Observer, Supervisor

__all__ = [
    "ACTION_TWISTS",
    "ANGULAR_SPEED",
    "Camera",
    "DEFAULT_SIMULATOR_CMD",
    "DistanceSensor",
    "LINEAR_SPEED",
    "LocalSimulator",
    "Motor",
    "MovementAction",
    "Observer",
    "Robotino",
    "RobotinoAbc",
    "RobotinoReading",
    "Sensor",
    "SimulatorHandle",
    "Supervisor",
    "TouchSensor",
    "build_command",
    "parse_action",
]
