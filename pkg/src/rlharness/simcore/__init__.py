"""Headless 2D omnidrive simulator: world model, kinematics, sensors, stepping, bus node."""

from .engine import RobotState, Simulation, SimulationMode, advance_robot
from .kinematics import Twist, clamp_wheel_speeds, forward_kinematics, integrate_pose, inverse_kinematics
from .node import FaultPlan, SimulatorNode
from .sensors import depth_readings, ir_readings, ray_distance
from .world import (
    Pose2D,
    Rect,
    RobotSpec,
    Target,
    WorldSpec,
    clearance,
    load_world,
    world_from_dict,
    wrap_angle,
)


__all__ = [
    "FaultPlan",
    "Pose2D",
    "Rect",
    "RobotSpec",
    "RobotState",
    "Simulation",
    "SimulationMode",
    "SimulatorNode",
    "Target",
    "Twist",
    "WorldSpec",
    "advance_robot",
    "clamp_wheel_speeds",
    "clearance",
    "depth_readings",
    "forward_kinematics",
    "integrate_pose",
    "inverse_kinematics",
    "ir_readings",
    "load_world",
    "ray_distance",
    "world_from_dict",
    "wrap_angle",
]
