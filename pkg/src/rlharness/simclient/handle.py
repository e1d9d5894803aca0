"""Lifecycle facade for one simulator process.

Availability is decided only by whether the supervisor node is present on
the bus, never by local process bookkeeping. Stepping is scoped: the
simulator runs in FAST mode while at least one :meth:`scoped_fast` scope
(or :meth:`run` callback) is active, and in PAUSE otherwise.
"""

from __future__ import annotations

import contextlib
import logging
import os
import shlex
import subprocess
import sys
import tempfile
import time
from pathlib import Path
from typing import Any, Callable, Sequence

from ..busline import BusClient
from ..errors import BusError, SimulatorError
from .supervisor import Observer, Supervisor

log = logging.getLogger(__name__)

DEFAULT_SIMULATOR_CMD = "{python} -m rlharness sim --broker {broker} --world {world}"
STOP_GRACE_SECS = 5.0


def build_command(template: str | Sequence[str], **values: Any) -> list[str]:
    """Expand ``{world}``, ``{broker}`` (and ``{python}``) in a launcher template."""
    values.setdefault("python", sys.executable)
    tokens = shlex.split(template) if isinstance(template, str) else list(template)
    try:
        return [tok.format(**values) for tok in tokens]
    except (KeyError, IndexError) as exc:
        raise SimulatorError("SPAWN_ERROR", f"unknown placeholder {exc} in simulator command {template!r}") from None


class SimulatorHandle:
    def __init__(
        self,
        bus: BusClient,
        supervisor_name: str,
        world_path: str | Path,
        broker: str,
        simulator_cmd: str | Sequence[str] = DEFAULT_SIMULATOR_CMD,
        extra_args: Sequence[str] = (),
        availability_timeout: float = 20.0,
        stop_grace: float = STOP_GRACE_SECS,
        log_path: str | Path | None = None,
        poll_interval: float = 0.05,
    ):
        self.bus = bus
        self.supervisor_name = supervisor_name
        self.world_path = str(world_path)
        self.broker = broker
        self.simulator_cmd = simulator_cmd
        self.extra_args = list(extra_args)
        self.availability_timeout = availability_timeout
        self.stop_grace = stop_grace
        self.poll_interval = poll_interval
        if log_path is None:
            fd, log_path = tempfile.mkstemp(prefix="rlh-sim-", suffix=".log")
            os.close(fd)
        self.log_path = Path(log_path)
        self.resets_since_start = 0
        self.process: subprocess.Popen | None = None
        # one record per reaped simulator process
        self.exits: list[dict] = []
        self._depth = 0
        self.observer = Observer(bus, supervisor_name)
        self.supervisor = Supervisor(bus, supervisor_name, on_reset=self._note_reset)

    def _note_reset(self) -> None:
        self.resets_since_start += 1

    def command(self) -> list[str]:
        return build_command(self.simulator_cmd, world=self.world_path, broker=self.broker) + self.extra_args

    # -- availability -----------------------------------------------------

    def available(self) -> bool:
        """True iff the supervisor node is registered. Raises BUS_DOWN if the broker is unreachable."""
        try:
            return self.bus.lookup(self.supervisor_name)
        except BusError as exc:
            if exc.code == "TIMEOUT":
                raise BusError("BUS_DOWN", f"broker did not answer lookup: {exc.message}") from None
            raise

    def _wait_available(self, want: bool, timeout: float) -> bool:
        deadline = time.monotonic() + timeout
        while True:
            if self.available() == want:
                return True
            if time.monotonic() >= deadline:
                return False
            if want and self.process is not None and self.process.poll() is not None:
                return False
            time.sleep(self.poll_interval)

    def _log_tail(self, lines: int = 20) -> str:
        try:
            return "\n".join(self.log_path.read_text(errors="replace").splitlines()[-lines:])
        except OSError:
            return ""

    # -- lifecycle --------------------------------------------------------

    def start(self) -> None:
        if self.process is not None and self.process.poll() is None:
            raise SimulatorError("ALREADY_RUNNING", f"simulator pid {self.process.pid} is still running; stop it first")
        self._reap()
        argv = self.command()
        try:
            with open(self.log_path, "ab") as logf:
                self.process = subprocess.Popen(argv, stdout=logf, stderr=subprocess.STDOUT, stdin=subprocess.DEVNULL)
        except OSError as exc:
            raise SimulatorError("SPAWN_ERROR", f"cannot spawn {argv[0]!r}: {exc}") from exc
        log.info("spawned simulator pid %d: %s", self.process.pid, " ".join(argv))
        if not self._wait_available(True, self.availability_timeout):
            proc = self.process
            if proc.poll() is not None:
                self._reap(cause="spawn-failed")
                raise SimulatorError(
                    "SPAWN_ERROR",
                    f"simulator exited with code {proc.returncode} before {self.supervisor_name} "
                    f"became available:\n{self._log_tail()}",
                )
            proc.kill()
            proc.wait()
            self._reap(cause="start-timeout")
            raise SimulatorError(
                "START_TIMEOUT",
                f"{self.supervisor_name} not available within {self.availability_timeout}s:\n{self._log_tail()}",
            )
        self.resets_since_start = 0
        if self._depth > 0:
            self._set_mode("FAST")

    def stop(self) -> None:
        proc = self.process
        try:
            up = self.available()
        except BusError:
            up = False
        if up:
            try:
                self.supervisor.shutdown(timeout=self.stop_grace)
            except BusError as exc:
                log.warning("controlled shutdown of %s failed: %s", self.supervisor_name, exc)
        if proc is not None:
            try:
                proc.wait(timeout=self.stop_grace if up else 0.5)
            except subprocess.TimeoutExpired:
                log.warning("simulator pid %d unresponsive after %.1fs, killing", proc.pid, self.stop_grace)
                proc.kill()
                proc.wait()
                self._reap(cause="killed")
            else:
                self._reap()
        if up:
            try:
                self._wait_available(False, self.stop_grace)
            except BusError:
                pass

    def _reap(self, cause: str | None = None) -> None:
        proc = self.process
        if proc is None or proc.poll() is None:
            return
        if cause is None:
            cause = "stopped" if proc.returncode == 0 else "crashed"
        self.exits.append({"pid": proc.pid, "returncode": proc.returncode, "cause": cause})
        self.process = None

    def restart(self) -> None:
        self.stop()
        self.start()
        self.resets_since_start = 0

    __call__ = restart

    # -- mode scoping -----------------------------------------------------

    def _set_mode(self, mode: str) -> None:
        try:
            self.supervisor.set_mode(mode)
        except BusError as exc:
            raise SimulatorError("MODE_ERROR", f"cannot switch {self.supervisor_name} to {mode}: {exc}") from exc

    def _enter(self) -> None:
        if self._depth == 0:
            if not self.available():
                self.start()
            self._set_mode("FAST")
        self._depth += 1

    def _leave(self, failed: bool) -> None:
        self._depth -= 1
        if self._depth > 0:
            return
        try:
            self._set_mode("PAUSE")
        except SimulatorError as exc:
            if not failed:
                raise
            log.warning("could not restore PAUSE after failure: %s", exc)

    @contextlib.contextmanager
    def scoped_fast(self):
        self._enter()
        try:
            yield self
        except BaseException:
            self._leave(failed=True)
            raise
        self._leave(failed=False)

    def __enter__(self) -> "SimulatorHandle":
        self._enter()
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        self._leave(failed=exc_type is not None)
        return False

    @property
    def scope_depth(self) -> int:
        return self._depth

    def run(self, callback: Callable[[], Any], restart: bool = False) -> Any:
        if restart:
            self.restart()
        with self.scoped_fast():
            return callback()
