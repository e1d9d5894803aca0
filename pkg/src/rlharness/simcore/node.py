"""Simulator process: serves the supervisor and robot nodes over the bus.

Bus handlers never touch world state. They enqueue a command and block on
its future; the stepping loop applies commands between steps.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import signal
import sys
import time
from concurrent.futures import Future
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from ..busline import BusClient
from ..errors import BusError, HarnessError
from .engine import Simulation, SimulationMode
from .world import WorldSpec, load_world

log = logging.getLogger(__name__)

MAX_STEPS_PER_REQUEST = 10_000
# 128 + SIGBUS, what a shell reports for a bus error
DEFAULT_CRASH_EXIT_CODE = 135


@dataclass(frozen=True)
class FaultPlan:
    """Abort the process on the N-th reset request since start, before replying."""

    crash_on_reset_number: int | None = None
    crash_exit_code: int = DEFAULT_CRASH_EXIT_CODE

    def __post_init__(self) -> None:
        if self.crash_on_reset_number is not None and self.crash_on_reset_number < 1:
            raise ValueError("crash_on_reset_number must be a positive integer")
        if self.crash_exit_code == 0:
            raise ValueError("crash_exit_code must be nonzero")


class _Stop(Exception):
    pass


class SimulatorNode:
    def __init__(
        self,
        bus: BusClient,
        world: WorldSpec,
        fault: FaultPlan = FaultPlan(),
        mode: SimulationMode = SimulationMode.PAUSE,
        free_run: bool = False,
        exit_log: str | Path | None = None,
    ):
        self.bus = bus
        self.world = world
        self.fault = fault
        self.free_run = free_run
        self.exit_log = Path(exit_log) if exit_log else None
        self.sim = Simulation(world, mode)
        self.reset_requests = 0
        self._commands: "queue.Queue[tuple[Callable[[], Any], Future]]" = queue.Queue()
        self._running = True

    # -- bus surface ------------------------------------------------------

    def attach(self) -> None:
        sup = self.world.supervisor_name
        services: dict[str, Callable[[dict], Any]] = {
            "ping": lambda p: {"ok": True},
            "get_mode": lambda p: {"mode": self.sim.mode.value},
            "set_mode": self._set_mode,
            "reset": lambda p: self._reset(),
            "shutdown": lambda p: self._shutdown(),
            "get_position": self._get_position,
            "get_sim_time": lambda p: {"sim_time": self.sim.sim_time},
            "step": self._step,
            "dump_state": lambda p: self.sim.dump(),
        }
        for name, fn in services.items():
            self.bus.serve(sup, name, self._queued(fn))
        for spec in self.world.robots:
            robot = spec.name
            self.bus.serve(robot, "enable_sensor", self._queued(
                lambda p, r=robot: {"period_steps": self.sim.enable_sensor(r, p.get("sensor"), p.get("period_ms"))}
            ))
            self.bus.serve(robot, "disable_sensor", self._queued(
                lambda p, r=robot: self.sim.disable_sensor(r, p.get("sensor")) or {"ok": True}
            ))
            self.bus.serve(robot, "set_wheel_velocity", self._queued(
                lambda p, r=robot: self.sim.set_wheel_velocity(r, p.get("index"), p.get("value")) or {"ok": True}
            ))
            self.bus.serve(robot, "set_wheel_velocities", self._queued(
                lambda p, r=robot: self.sim.set_wheel_velocities(r, p.get("values") or []) or {"ok": True}
            ))
        # robots first: once the supervisor is visible, the whole world is
        for spec in self.world.robots:
            self.bus.register(spec.name)
        self.bus.register(sup)

    def _queued(self, fn: Callable[[dict], Any]) -> Callable[[Any], Any]:
        def handler(payload: Any) -> Any:
            if not isinstance(payload, dict):
                payload = {}
            fut: Future = Future()
            self._commands.put((lambda: fn(payload), fut))
            return fut.result()

        return handler

    # -- commands (run on the loop thread) ---------------------------------

    def _set_mode(self, payload: dict) -> dict:
        self.sim.mode = SimulationMode.parse(payload.get("mode"))
        return {"mode": self.sim.mode.value}

    def _get_position(self, payload: dict) -> dict:
        robot = payload.get("robot") or self.world.robots[0].name
        state = self.sim.robots.get(robot)
        if state is None:
            raise HarnessError("NO_SUCH_ROBOT", f"no robot named {robot!r}")
        return state.pose.as_dict()

    def _step(self, payload: dict) -> dict:
        steps = payload.get("steps", 1)
        if not isinstance(steps, int) or isinstance(steps, bool) or not 1 <= steps <= MAX_STEPS_PER_REQUEST:
            raise HarnessError("BAD_REQUEST", f"steps must be an integer in 1..{MAX_STEPS_PER_REQUEST}")
        if self.sim.mode is SimulationMode.PAUSE:
            raise HarnessError("PAUSED", "simulation is paused")
        for _ in range(steps):
            self._publish(self.sim.step())
        return {"sim_time": self.sim.sim_time, "step_count": self.sim.step_count}

    def _reset(self) -> dict:
        self.reset_requests += 1
        if self.fault.crash_on_reset_number is not None and self.reset_requests >= self.fault.crash_on_reset_number:
            self._log_exit("crash", self.fault.crash_exit_code)
            logging.shutdown()
            os._exit(self.fault.crash_exit_code)
        self.sim.reset()
        return {"ok": True, "resets": self.reset_requests}

    def _shutdown(self) -> dict:
        self._running = False
        return {"ok": True}

    def _publish(self, publications: list[tuple[str, dict]]) -> None:
        for topic, payload in publications:
            self.bus.publish(topic, payload)

    # -- loop -------------------------------------------------------------

    def _execute(self, item: tuple[Callable[[], Any], Future]) -> None:
        fn, fut = item
        try:
            fut.set_result(fn())
        except BaseException as exc:  # noqa: BLE001 - handed back to the bus handler
            fut.set_exception(exc)

    def _drain_nowait(self) -> None:
        while self._running:
            try:
                item = self._commands.get_nowait()
            except queue.Empty:
                return
            self._execute(item)

    def run(self) -> int:
        """Step until shutdown. Returns the process exit code."""
        self._log_exit("start", 0)
        code = 0
        try:
            while self._running:
                if self.bus.closed:
                    log.error("lost connection to broker")
                    code = 3
                    break
                if self.free_run and self.sim.mode is SimulationMode.FAST:
                    self._publish(self.sim.step())
                    self._drain_nowait()
                    continue
                try:
                    item = self._commands.get(timeout=0.05)
                except queue.Empty:
                    continue
                self._execute(item)
                self._drain_nowait()
        except BusError as exc:
            log.error("bus failure in stepping loop: %s", exc)
            code = 3
        self._running = False
        while True:
            try:
                _, fut = self._commands.get_nowait()
            except queue.Empty:
                break
            fut.set_exception(HarnessError("SHUTTING_DOWN", "simulator is shutting down"))
        self.bus.drain(timeout=2.0)
        self.bus.close()
        self._log_exit("shutdown" if code == 0 else "abort", code)
        return code

    def stop(self) -> None:
        self._running = False

    def _log_exit(self, event: str, code: int) -> None:
        if self.exit_log is None:
            return
        record = {
            "event": event,
            "pid": os.getpid(),
            "exit_code": code,
            "resets": self.reset_requests,
            "time": time.time(),
        }
        with open(self.exit_log, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")
            fh.flush()
            os.fsync(fh.fileno())


def main(args) -> int:
    """Entry point for ``rlh sim``."""
    try:
        world = load_world(args.world)
    except HarnessError as exc:
        print(f"sim: {exc}", file=sys.stderr)
        return 1
    try:
        fault = FaultPlan(args.fault_resets, args.crash_exit_code)
    except ValueError as exc:
        print(f"sim: {exc}", file=sys.stderr)
        return 1
    try:
        bus = BusClient(args.broker)
    except BusError as exc:
        print(f"sim: {exc}", file=sys.stderr)
        return 1
    node = SimulatorNode(
        bus,
        world,
        fault=fault,
        mode=SimulationMode.parse(args.start_mode),
        free_run=args.free_run,
        exit_log=args.exit_log,
    )
    try:
        node.attach()
    except BusError as exc:
        print(f"sim: cannot register nodes: {exc}", file=sys.stderr)
        bus.close()
        return 1

    def _terminate(signum, frame):
        node.stop()

    signal.signal(signal.SIGTERM, _terminate)
    signal.signal(signal.SIGINT, _terminate)
    print(f"sim: world {args.world} online as {world.supervisor_name}", flush=True)
    return node.run()


def add_arguments(parser) -> None:
    parser.add_argument("--broker", default=os.environ.get("RLH_BROKER"), required="RLH_BROKER" not in os.environ,
                        help="broker address HOST:PORT (env RLH_BROKER)")
    parser.add_argument("--world", required=True, help="world file (JSON)")
    parser.add_argument("--fault-resets", type=int, default=None, metavar="N",
                        help="abort on the N-th reset request (reproduces the crash-after-resets defect)")
    parser.add_argument("--crash-exit-code", type=int, default=DEFAULT_CRASH_EXIT_CODE)
    parser.add_argument("--start-mode", choices=["pause", "fast"], default="pause")
    parser.add_argument("--free-run", action="store_true",
                        help="step continuously while in FAST mode instead of on step requests")
    parser.add_argument("--exit-log", default=None, help="append start/exit records to this JSONL file")
