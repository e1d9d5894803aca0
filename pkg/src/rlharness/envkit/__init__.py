"""Gym-style environment contract and the move-to-target task."""

from .core import Box, Discrete, Env, StepResult, make, register, registered
from .move_to_target import BASE_LAYOUT, TARGET_LAYOUT, EnvConfig, MoveToTargetEnv, Snapshot
from .rewards import Outcome, reward_dense, reward_terminal

__all__ = [
    "BASE_LAYOUT",
    "Box",
    "Discrete",
    "Env",
    "EnvConfig",
    "MoveToTargetEnv",
    "Outcome",
    "Snapshot",
    "StepResult",
    "TARGET_LAYOUT",
    "make",
    "register",
    "registered",
    "reward_dense",
    "reward_terminal",
]
