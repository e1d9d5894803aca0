"""Session configuration: one JSON document describes a whole training run."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..agents import DqnHyperparams, ReinforceHyperparams
from ..envkit import EnvConfig
from ..errors import ConfigError, HarnessError
from ..simclient.handle import DEFAULT_SIMULATOR_CMD

ALGORITHMS = ("dqn", "reinforce")
BACKENDS = ("bus", "inmemory")
BROKER_ENV = "RLH_BROKER"


@dataclass
class SessionConfig:
    algorithm: str
    world_path: Path
    budget: int
    env: dict = field(default_factory=dict)
    hyperparams: dict = field(default_factory=dict)
    broker: str = "autostart"
    simulator_cmd: str = DEFAULT_SIMULATOR_CMD
    restart_after_resets: int = 24
    eval_every: int = 50
    eval_episodes: int = 10
    final_eval_episodes: int | None = None
    seed: int = 0
    out_dir: Path = Path("runs/session")
    # chaos switch: simulator aborts on its N-th reset request
    fault_resets: int | None = None
    backend: str = "bus"
    availability_timeout: float = 20.0
    liveness_secs: float = 6.0
    max_failed_restarts: int = 3

    def __post_init__(self) -> None:
        self.algorithm = str(self.algorithm).lower()
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(message=f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(message=f"backend must be one of {BACKENDS}, got {self.backend!r}")
        for name in ("budget", "restart_after_resets", "eval_every", "eval_episodes", "max_failed_restarts"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(message=f"{name} must be a positive integer, got {value!r}")
        if self.final_eval_episodes is None:
            self.final_eval_episodes = self.eval_episodes
        if self.fault_resets is not None:
            if self.backend != "bus":
                raise ConfigError(message="fault_resets needs the bus backend (the fault lives in the simulator process)")
            if self.fault_resets < 1:
                raise ConfigError(message="fault_resets must be a positive integer")
        self.world_path = Path(self.world_path)
        self.out_dir = Path(self.out_dir)
        # fail early on bad nested sections rather than mid-session
        self.env_config()
        self.agent_hyperparams()

    def env_config(self) -> EnvConfig:
        try:
            return EnvConfig.from_options(self.env)
        except (HarnessError, TypeError) as exc:
            raise ConfigError(message=f"env: {exc}") from None

    def agent_hyperparams(self) -> DqnHyperparams | ReinforceHyperparams:
        cls = DqnHyperparams if self.algorithm == "dqn" else ReinforceHyperparams
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(self.hyperparams) - known
        if unknown:
            raise ConfigError(message=f"hyperparams: unknown keys {sorted(unknown)} for {self.algorithm}")
        try:
            return cls(**self.hyperparams)
        except (HarnessError, TypeError, ValueError) as exc:
            raise ConfigError(message=f"hyperparams: {exc}") from None

    def as_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["world_path"] = str(self.world_path)
        doc["out_dir"] = str(self.out_dir)
        return doc


def config_from_dict(doc: Any, base_dir: str | Path = ".", env: dict | None = None) -> SessionConfig:
    """Build a config; relative paths resolve against ``base_dir``."""
    if not isinstance(doc, dict):
        raise ConfigError(message="config must be a JSON object")
    known = {f.name for f in dataclasses.fields(SessionConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(message=f"unknown config keys {sorted(unknown)}")
    missing = [k for k in ("algorithm", "world_path", "budget") if k not in doc]
    if missing:
        raise ConfigError(message=f"missing config keys {missing}")
    doc = dict(doc)
    base = Path(base_dir)
    for key in ("world_path", "out_dir"):
        if key in doc:
            p = Path(doc[key])
            doc[key] = p if p.is_absolute() else base / p
    override = (env if env is not None else os.environ).get(BROKER_ENV)
    if override:
        doc["broker"] = override
    try:
        return SessionConfig(**doc)
    except TypeError as exc:
        raise ConfigError(message=str(exc)) from None


def load_config(path: str | Path, env: dict | None = None) -> SessionConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(message=f"cannot read config {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(message=f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(doc, path.parent, env)
