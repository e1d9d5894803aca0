"""Clients for the supervisor node, split into read-only and altering halves."""

from __future__ import annotations

from typing import Callable

from ..busline import BusClient
from ..simcore.world import Pose2D


class Observer:
    """Probes that never change the simulation."""

    def __init__(self, bus: BusClient, supervisor_name: str):
        self.bus = bus
        self.node = supervisor_name

    def get_position(self, robot: str) -> Pose2D:
        p = self.bus.call(self.node, "get_position", {"robot": robot})
        return Pose2D(p["x"], p["y"], p["theta"])

    def get_sim_time(self) -> float:
        return self.bus.call(self.node, "get_sim_time")["sim_time"]

    def get_mode(self) -> str:
        return self.bus.call(self.node, "get_mode")["mode"]

    def dump_state(self) -> dict:
        return self.bus.call(self.node, "dump_state")


class Supervisor:
    """Operations that alter the simulation."""

    def __init__(self, bus: BusClient, supervisor_name: str, on_reset: Callable[[], None] | None = None):
        self.bus = bus
        self.node = supervisor_name
        self._on_reset = on_reset

    def reset(self) -> None:
        self.bus.call(self.node, "reset")
        if self._on_reset is not None:
            self._on_reset()

    def set_mode(self, mode: str) -> str:
        return self.bus.call(self.node, "set_mode", {"mode": str(mode).upper()})["mode"]

    def step(self, steps: int = 1) -> float:
        return self.bus.call(self.node, "step", {"steps": steps})["sim_time"]

    def shutdown(self, timeout: float | None = None) -> None:
        self.bus.call(self.node, "shutdown", timeout=timeout)
