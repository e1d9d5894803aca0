from __future__ import annotations

import enum


class Outcome(str, enum.Enum):
    RUNNING = "RUNNING"
    SOLVED = "SOLVED"
    COLLISION = "COLLISION"
    TIMEOUT = "TIMEOUT"


TERMINAL_REWARDS = {
    Outcome.SOLVED: 1.0,
    Outcome.COLLISION: -1.0,
    Outcome.TIMEOUT: 0.0,
    Outcome.RUNNING: 0.0,
}

PROGRESS_SCALE = 10.0
STEP_PENALTY = 0.01
DENSE_BONUS = {
    Outcome.SOLVED: 10.0,
    Outcome.COLLISION: -10.0,
    Outcome.TIMEOUT: 0.0,
    Outcome.RUNNING: 0.0,
}


def reward_terminal(outcome: Outcome | str) -> float:
    """Non-zero only when the episode ends in success or collision."""
    return TERMINAL_REWARDS[Outcome(outcome)]


def reward_dense(prev_dist: float, new_dist: float, outcome: Outcome | str) -> float:
    """Progress towards the target, a per-step cost, and a terminal bonus."""
    return (prev_dist - new_dist) * PROGRESS_SCALE - STEP_PENALTY + DENSE_BONUS[Outcome(outcome)]
