"""Exception types shared across the harness.

Every error carries a short machine-readable ``code`` (e.g. ``PEER_GONE``)
so callers can branch on the failure class without string matching.
"""

from __future__ import annotations


class HarnessError(Exception):
    code = "ERROR"

    def __init__(self, code: str | None = None, message: str = ""):
        if code is not None:
            self.code = code
        self.message = message
        super().__init__(f"{self.code}: {message}" if message else self.code)


class BusError(HarnessError):
    """Failure reported by, or while talking to, the broker."""


class SimulatorError(HarnessError):
    """Simulator lifecycle failures (START_TIMEOUT, SPAWN_ERROR, MODE_ERROR...)."""


class SensorError(HarnessError):
    """Device-level failures (BAD_PERIOD, UNSUPPORTED, STALE_SENSORS)."""


class WorldError(HarnessError):
    code = "WORLD_ERROR"


class EnvError(HarnessError):
    pass


class AgentError(HarnessError):
    pass


class CheckpointError(AgentError):
    code = "CHECKPOINT_ERROR"


class ConfigError(HarnessError):
    code = "CONFIG_ERROR"


class GenerationError(HarnessError):
    code = "GENERATION_ERROR"


# bus failures that mean "the simulator process is gone"
SIMULATOR_LOST_CODES = frozenset({"PEER_GONE", "TIMEOUT", "NO_SUCH_SERVICE"})


def is_simulator_loss(exc: BaseException) -> bool:
    return isinstance(exc, BusError) and exc.code in SIMULATOR_LOST_CODES
