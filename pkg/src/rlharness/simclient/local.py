"""In-process simulator backend with the same client surface as the bus stack.

Runs :class:`~rlharness.simcore.engine.Simulation` directly, with no broker
and no child process. Environments and the training loop cannot tell the
difference, which makes this the fast path for tests and desk-scale
learning runs.
"""

from __future__ import annotations

import contextlib
from typing import Any, Callable

from ..errors import HarnessError, SensorError
from ..simcore.engine import Simulation, SimulationMode
from ..simcore.world import Pose2D, WorldSpec
from .devices import check_period
from .robotino import MovementAction, RobotinoAbc, RobotinoReading


class LocalSimulator:
    def __init__(self, world: WorldSpec):
        self.world = world
        self.supervisor_name = world.supervisor_name
        self.sim: Simulation | None = None
        self.latest: dict[str, dict] = {}
        self.resets_since_start = 0
        self.starts = 0
        self.exits: list[dict] = []
        self._depth = 0
        self.observer = LocalObserver(self)
        self.supervisor = LocalSupervisor(self)

    def available(self) -> bool:
        return self.sim is not None

    def start(self) -> None:
        if self.sim is not None:
            raise HarnessError("ALREADY_RUNNING", "local simulator already started")
        self.sim = Simulation(self.world)
        self.latest.clear()
        self.resets_since_start = 0
        self.starts += 1
        if self._depth > 0:
            self.sim.mode = SimulationMode.FAST

    def stop(self) -> None:
        if self.sim is not None:
            self.exits.append({"pid": None, "returncode": 0, "cause": "stopped"})
        self.sim = None

    def restart(self) -> None:
        self.stop()
        self.start()

    __call__ = restart

    def running(self) -> Simulation:
        if self.sim is None:
            raise HarnessError("PEER_GONE", "local simulator is not running")
        return self.sim

    @contextlib.contextmanager
    def scoped_fast(self):
        if self._depth == 0:
            if self.sim is None:
                self.start()
            self.running().mode = SimulationMode.FAST
        self._depth += 1
        try:
            yield self
        finally:
            self._depth -= 1
            if self._depth == 0 and self.sim is not None:
                self.sim.mode = SimulationMode.PAUSE

    def run(self, callback: Callable[[], Any], restart: bool = False) -> Any:
        if restart:
            self.restart()
        with self.scoped_fast():
            return callback()

    def robot(self, name: str | None = None) -> "LocalRobotino":
        return LocalRobotino(self, self.world.robot(name or self.world.robots[0].name))

    def _deliver(self, publications) -> None:
        for topic, payload in publications:
            self.latest[topic] = payload


class LocalObserver:
    def __init__(self, owner: LocalSimulator):
        self._owner = owner

    def get_position(self, robot: str) -> Pose2D:
        return self._owner.running().robots[robot].pose

    def get_sim_time(self) -> float:
        return self._owner.running().sim_time

    def get_mode(self) -> str:
        return self._owner.running().mode.value

    def dump_state(self) -> dict:
        return self._owner.running().dump()


class LocalSupervisor:
    def __init__(self, owner: LocalSimulator):
        self._owner = owner

    def reset(self) -> None:
        self._owner.running().reset()
        self._owner.resets_since_start += 1

    def set_mode(self, mode: str) -> str:
        sim = self._owner.running()
        sim.mode = SimulationMode.parse(mode)
        return sim.mode.value

    def step(self, steps: int = 1) -> float:
        sim = self._owner.running()
        if sim.mode is SimulationMode.PAUSE:
            raise HarnessError("PAUSED", "simulation is paused")
        for _ in range(steps):
            self._owner._deliver(sim.step())
        return sim.sim_time

    def shutdown(self) -> None:
        self._owner.stop()


class LocalRobotino(RobotinoAbc):
    def __init__(self, owner: LocalSimulator, spec):
        self._owner = owner
        self.spec = spec

    def _topic(self, sensor: str) -> str:
        return f"{self.spec.name}/{sensor}"

    def enable_sensors(self, period_ms: int) -> None:
        check_period(period_ms, self._owner.world.basic_timestep_ms)
        sim = self._owner.running()
        for sensor in ("ir", "touch"):
            sim.enable_sensor(self.spec.name, sensor, period_ms)

    def apply_action(self, action: MovementAction) -> None:
        self._owner.running().set_wheel_velocities(self.spec.name, list(self.wheel_speeds(action)))

    def observe(self) -> RobotinoReading:
        ir = self._owner.latest.get(self._topic("ir"))
        touch = self._owner.latest.get(self._topic("touch"))
        if ir is None or touch is None:
            raise SensorError("STALE_SENSORS", "sensors have no valid reading since the last reset")
        return RobotinoReading(tuple(ir["values"]), bool(touch["value"]), {"ir": ir["stamp"], "touch": touch["stamp"]})

    def discard_readings(self) -> None:
        for sensor in ("ir", "touch", "depth"):
            self._owner.latest.pop(self._topic(sensor), None)
