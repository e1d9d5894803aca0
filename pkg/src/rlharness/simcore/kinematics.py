"""Three-omniwheel rolling-constraint kinematics.

Wheel ``i`` sits at angle ``alpha_i`` around the body centre at distance
``L`` and rolls tangentially, so its rim speed is

    u_i = -sin(alpha_i) * vx + cos(alpha_i) * vy + L * omega,   u_i = w_i * r

For wheels spaced 120 degrees apart the constraint matrix has the
closed-form inverse used in :func:`forward_kinematics`.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

from .world import RobotSpec


class Twist(NamedTuple):
    vx: float
    vy: float
    omega: float


def forward_kinematics(wheel_speeds: Sequence[float], spec: RobotSpec) -> Twist:
    r, L = spec.wheel_radius, spec.wheel_offset
    vx = vy = om = 0.0
    for w, a in zip(wheel_speeds, spec.wheel_angles):
        u = w * r
        vx -= math.sin(a) * u
        vy += math.cos(a) * u
        om += u
    return Twist(2.0 / 3.0 * vx, 2.0 / 3.0 * vy, om / (3.0 * L))


def inverse_kinematics(twist: Sequence[float], spec: RobotSpec) -> tuple[float, float, float]:
    vx, vy, om = twist
    r, L = spec.wheel_radius, spec.wheel_offset
    return tuple((-math.sin(a) * vx + math.cos(a) * vy + L * om) / r for a in spec.wheel_angles)


def clamp_wheel_speeds(wheel_speeds: Sequence[float], max_speed: float) -> tuple[float, float, float]:
    return tuple(min(max(float(w), -max_speed), max_speed) for w in wheel_speeds)


def integrate_pose(x: float, y: float, theta: float, twist: Twist, dt: float) -> tuple[float, float, float]:
    """Exact integration of a constant body-frame twist over ``dt``.

    The body translates along a circular arc while rotating at ``omega``.
    """
    vx, vy, om = twist
    phi = om * dt
    if abs(phi) < 1e-12:
        bx, by = vx * dt, vy * dt
    else:
        s, c = math.sin(phi), 1.0 - math.cos(phi)
        bx = (vx * s - vy * c) / om
        by = (vx * c + vy * s) / om
    ct, st = math.cos(theta), math.sin(theta)
    return x + ct * bx - st * by, y + st * bx + ct * by, theta + phi
