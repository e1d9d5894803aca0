"""Robot building blocks: robot-agnostic client facades for single devices.

A sensor uses one service (to enable it with a sampling period) and one
topic subscription (to receive its stamped readings).
"""

from __future__ import annotations

from typing import Any

from ..busline import BusClient, Subscription
from ..errors import BusError, SensorError

_DEVICE_CODES = {"BAD_PERIOD", "UNSUPPORTED", "NO_SUCH_SENSOR", "NO_SUCH_ROBOT", "BAD_INDEX", "BAD_VALUES"}


def _device_call(bus: BusClient, robot: str, service: str, payload: dict) -> Any:
    try:
        return bus.call(robot, service, payload)
    except BusError as exc:
        if exc.code in _DEVICE_CODES:
            raise SensorError(exc.code, exc.message) from None
        raise


def check_period(period_ms: int, basic_timestep_ms: int) -> None:
    if (
        not isinstance(period_ms, int)
        or isinstance(period_ms, bool)
        or period_ms <= 0
        or period_ms % basic_timestep_ms
    ):
        raise SensorError(
            "BAD_PERIOD", f"period {period_ms!r} ms is not a positive multiple of {basic_timestep_ms} ms"
        )


class Sensor:
    sensor = ""

    def __init__(self, bus: BusClient, robot: str, basic_timestep_ms: int):
        self.bus = bus
        self.robot = robot
        self.basic_timestep_ms = basic_timestep_ms
        self.period_ms: int | None = None
        self._sub: Subscription | None = None

    @property
    def topic(self) -> str:
        return f"{self.robot}/{self.sensor}"

    def enable(self, period_ms: int) -> None:
        check_period(period_ms, self.basic_timestep_ms)
        # subscribe first so the first publication after enabling is not missed
        if self._sub is None or self._sub.closed:
            self._sub = self.bus.subscribe(self.topic)
        _device_call(self.bus, self.robot, "enable_sensor", {"sensor": self.sensor, "period_ms": period_ms})
        self.period_ms = period_ms

    def disable(self) -> None:
        _device_call(self.bus, self.robot, "disable_sensor", {"sensor": self.sensor})
        self.period_ms = None

    @property
    def enabled(self) -> bool:
        return self.period_ms is not None

    def message(self) -> dict | None:
        return None if self._sub is None else self._sub.latest()

    def stamp(self) -> float | None:
        msg = self.message()
        return None if msg is None else msg["stamp"]

    def discard(self) -> None:
        """Forget the current reading, e.g. after a simulation reset."""
        if self._sub is not None:
            self._sub.clear()

    def read(self) -> Any:
        msg = self.message()
        return None if msg is None else self._value(msg)

    def _value(self, msg: dict) -> Any:
        return msg["values"]

    def close(self) -> None:
        if self._sub is not None:
            self._sub.close()
            self._sub = None


class TouchSensor(Sensor):
    sensor = "touch"

    def _value(self, msg: dict) -> bool:
        return bool(msg["value"])


class DistanceSensor(Sensor):
    """The IR ranging array; one reading is the list of all ranges in metres."""

    sensor = "ir"


class Camera(Sensor):
    def __init__(self, bus: BusClient, robot: str, basic_timestep_ms: int, kind: str = "depth"):
        super().__init__(bus, robot, basic_timestep_ms)
        self.sensor = kind


class Motor:
    def __init__(self, bus: BusClient, robot: str, index: int, max_speed: float):
        self.bus = bus
        self.robot = robot
        self.index = index
        self.max_speed = max_speed

    def set_velocity(self, value: float) -> float:
        value = min(max(float(value), -self.max_speed), self.max_speed)
        _device_call(self.bus, self.robot, "set_wheel_velocity", {"index": self.index, "value": value})
        return value
