"""Minimal gym-style environment contract, spaces and an id registry."""

from __future__ import annotations

from typing import Any, Callable, NamedTuple

import numpy as np


class Discrete:
    def __init__(self, n: int):
        if n < 1:
            raise ValueError("Discrete space needs n >= 1")
        self.n = n

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.n))

    def contains(self, x: Any) -> bool:
        return isinstance(x, (int, np.integer)) and not isinstance(x, bool) and 0 <= x < self.n

    def __repr__(self) -> str:
        return f"Discrete({self.n})"


class Box:
    def __init__(self, low, high):
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        self.shape = self.low.shape

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return x.shape == self.shape and bool(np.all(np.isfinite(x)) and np.all(x >= self.low) and np.all(x <= self.high))

    def __repr__(self) -> str:
        return f"Box(shape={self.shape})"


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict

    @property
    def outcome(self) -> str:
        return self.info["outcome"]


class Env:
    """Agent-environment loop contract: ``reset``, ``step``, ``render``, ``close``."""

    action_space: Discrete
    observation_space: Box

    def reset(self, seed: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def step(self, action: int) -> StepResult:
        raise NotImplementedError

    def render(self):
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc) -> None:
        self.close()


_REGISTRY: dict[str, Callable[..., Env]] = {}


def register(env_id: str, entry_point: Callable[..., Env]) -> None:
    _REGISTRY[env_id] = entry_point


def make(env_id: str, **kwargs) -> Env:
    try:
        factory = _REGISTRY[env_id]
    except KeyError:
        raise KeyError(f"no environment registered as {env_id!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**kwargs)


def registered() -> list[str]:
    return sorted(_REGISTRY)
