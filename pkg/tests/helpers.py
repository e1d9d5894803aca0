"""Shared test utilities."""

from __future__ import annotations

import subprocess
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
WORLDS = ROOT / "worlds"
CONFIGS = ROOT / "configs"
EASY_WORLD = WORLDS / "easy.json"
REF_WORLD = WORLDS / "move_to_target.json"


def wait_for(predicate, timeout: float = 5.0, interval: float = 0.02) -> bool:
    deadline = time.monotonic() + timeout
    while True:
        if predicate():
            return True
        if time.monotonic() >= deadline:
            return False
        time.sleep(interval)


def rlh(*args: str, timeout: float = 600, env=None) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "rlharness", *args],
        capture_output=True,
        text=True,
        timeout=timeout,
        env=env,
    )


def sim_command(broker: str, world: Path | str, *extra: str) -> list[str]:
    return [sys.executable, "-m", "rlharness", "sim", "--broker", broker, "--world", str(world), *extra]


# criterion number -> (passed, one-line detail), filled by the acceptance suite
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


class Criterion:
    """Context manager that records one acceptance verdict, including crashes."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title

    def __enter__(self) -> "Criterion":
        ACCEPTANCE_RESULTS[self.number] = (False, f"{self.title}: did not finish")
        return self

    def record(self, passed: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[self.number] = (bool(passed), f"{self.title}: {detail}")
        print(format_verdict(self.number))

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is not None and not issubclass(exc_type, AssertionError):
            ACCEPTANCE_RESULTS[self.number] = (False, f"{self.title}: {exc_type.__name__}: {exc}")
        return False


def format_verdict(number: int) -> str:
    passed, detail = ACCEPTANCE_RESULTS[number]
    return f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {detail}"
