"""Move-to-target-and-stop task for one Robotino.

Observation layout (flat float vector)::

    [ir0 .. ir8, touch, x, y, theta, tx, ty]

The trailing target coordinates are present only with ``include_target``.
"""

from __future__ import annotations

import contextlib
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import EnvError, SensorError
from ..simclient.robotino import MovementAction, RobotinoAbc, parse_action
from ..simcore.world import IR_COUNT, Pose2D, WorldSpec, clearance
from .core import Box, Discrete, Env, StepResult, register
from .rewards import Outcome, reward_dense, reward_terminal

BASE_LAYOUT = [f"ir{i}" for i in range(IR_COUNT)] + ["touch", "x", "y", "theta"]
TARGET_LAYOUT = ["tx", "ty"]


@dataclass
class EnvConfig:
    max_steps: int = 200
    reward_mode: str = "dense"
    include_target: bool = True
    action_set: list[str] = field(default_factory=lambda: [a.name for a in MovementAction])
    solve_radius: float = 0.10
    solve_requires_stop: bool = True
    steps_per_action: int = 8
    # None: one reading per decision (basic timestep * steps_per_action)
    sensor_period_ms: int | None = None
    randomize_target: bool = False
    validity_steps: int = 100
    robot: str | None = None
    render_size: int = 40

    def __post_init__(self) -> None:
        self.reward_mode = str(self.reward_mode).lower()
        if self.reward_mode not in ("dense", "terminal"):
            raise EnvError("BAD_CONFIG", f"reward_mode must be 'dense' or 'terminal', got {self.reward_mode!r}")
        if self.max_steps < 1 or self.steps_per_action < 1 or self.validity_steps < 1:
            raise EnvError("BAD_CONFIG", "max_steps, steps_per_action and validity_steps must be positive")
        if self.solve_radius <= 0:
            raise EnvError("BAD_CONFIG", "solve_radius must be positive")
        try:
            actions = [parse_action(a) for a in self.action_set]
        except ValueError as exc:
            raise EnvError("BAD_CONFIG", str(exc)) from None
        if not actions:
            raise EnvError("BAD_CONFIG", "action_set must not be empty")
        if len(set(actions)) != len(actions):
            raise EnvError("BAD_CONFIG", "action_set contains duplicates")
        if self.solve_requires_stop and MovementAction.STOP not in actions:
            raise EnvError("BAD_CONFIG", "action_set must include STOP when solve_requires_stop is set")
        self.action_set = [a.name for a in actions]

    @classmethod
    def from_options(cls, options: dict[str, Any] | None) -> "EnvConfig":
        options = dict(options or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(options) - known
        if unknown:
            raise EnvError("BAD_CONFIG", f"unknown environment options {sorted(unknown)}")
        return cls(**options)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def obs_layout(self) -> list[str]:
        return BASE_LAYOUT + (TARGET_LAYOUT if self.include_target else [])


@dataclass
class Snapshot:
    rows: list[str]
    robot_cell: tuple[int, int] | None
    target_cell: tuple[int, int] | None

    def __str__(self) -> str:
        return "\n".join(self.rows)


class MoveToTargetEnv(Env):
    """``simulator`` is anything with ``observer``, ``supervisor`` and ``scoped_fast()``."""

    def __init__(
        self,
        simulator,
        robot: RobotinoAbc,
        world: WorldSpec,
        config: EnvConfig | dict | None = None,
        seed: int | None = None,
        **options,
    ):
        if isinstance(config, EnvConfig):
            if options:
                config = dataclasses.replace(config, **options)
        else:
            config = EnvConfig.from_options({**(config or {}), **options})
        self.config = config
        self.simulator = simulator
        self.robot = robot
        self.world = world
        self.spec = world.robot(config.robot) if config.robot else robot.spec
        self.actions = [MovementAction[a] for a in config.action_set]
        self.action_space = Discrete(len(self.actions))
        r = self.spec.ir_max_range
        a = world.arena
        low = [0.0] * IR_COUNT + [0.0, a.min_x, a.min_y, -math.pi]
        high = [r] * IR_COUNT + [1.0, a.max_x, a.max_y, math.pi]
        if config.include_target:
            low += [a.min_x, a.min_y]
            high += [a.max_x, a.max_y]
        self.observation_space = Box(low, high)
        self.sensor_period_ms = config.sensor_period_ms or world.basic_timestep_ms * config.steps_per_action
        self.np_random = np.random.default_rng(seed)
        self.target = (world.target.x, world.target.y)
        self.steps = 0
        self.closed = False
        self._needs_reset = True
        self._dist = math.inf
        self._last_obs: np.ndarray | None = None
        self._last_pose: Pose2D | None = None

    # -- helpers ----------------------------------------------------------

    def _scope(self):
        scoped = getattr(self.simulator, "scoped_fast", None)
        return scoped() if scoped is not None else contextlib.nullcontext()

    def _observation(self, reading, pose: Pose2D) -> np.ndarray:
        values = list(reading.ir) + [1.0 if reading.touch else 0.0, pose.x, pose.y, pose.theta]
        if self.config.include_target:
            values += list(self.target)
        return np.asarray(values, dtype=np.float64)

    def _distance(self, pose: Pose2D) -> float:
        return math.hypot(pose.x - self.target[0], pose.y - self.target[1])

    def _sample_target(self) -> tuple[float, float]:
        a = self.world.arena
        margin = self.config.solve_radius
        for _ in range(1000):
            x = self.np_random.uniform(a.min_x + margin, a.max_x - margin)
            y = self.np_random.uniform(a.min_y + margin, a.max_y - margin)
            if clearance(self.world, x, y, self.spec.body_radius) >= 0:
                return float(x), float(y)
        raise EnvError("BAD_CONFIG", "could not place a random target in free space")

    def _check_open(self) -> None:
        if self.closed:
            raise EnvError("CLOSED", "environment is closed")

    # -- Env contract -----------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        self._check_open()
        if seed is not None:
            self.np_random = np.random.default_rng(seed)
        if self.config.randomize_target:
            self.target = self._sample_target()
        sup, obs = self.simulator.supervisor, self.simulator.observer
        with self._scope():
            self.robot.enable_sensors(self.sensor_period_ms)
            sup.reset()
            self.robot.discard_readings()
            for _ in range(self.config.validity_steps):
                sup.step(1)
                try:
                    reading = self.robot.observe()
                except SensorError as exc:
                    if exc.code != "STALE_SENSORS":
                        raise
                    continue
                break
            else:
                raise EnvError(
                    "VALIDITY_TIMEOUT", f"sensors not valid within {self.config.validity_steps} simulation steps"
                )
            pose = obs.get_position(self.spec.name)
        self.steps = 0
        self._needs_reset = False
        self._dist = self._distance(pose)
        self._last_pose = pose
        self._last_obs = self._observation(reading, pose)
        return self._last_obs.copy()

    def step(self, action: int) -> StepResult:
        self._check_open()
        if self._needs_reset:
            raise EnvError("NEEDS_RESET", "call reset() before step()")
        if not self.action_space.contains(action):
            raise EnvError("OUT_OF_RANGE", f"action {action!r} not in 0..{self.action_space.n - 1}")
        act = self.actions[int(action)]
        with self._scope():
            self.robot.apply_action(act)
            self.simulator.supervisor.step(self.config.steps_per_action)
            reading = self.robot.observe()
            pose = self.simulator.observer.get_position(self.spec.name)
        self.steps += 1
        prev, dist = self._dist, self._distance(pose)
        if reading.touch:
            outcome = Outcome.COLLISION
        elif dist <= self.config.solve_radius and (act is MovementAction.STOP or not self.config.solve_requires_stop):
            outcome = Outcome.SOLVED
        elif self.steps >= self.config.max_steps:
            outcome = Outcome.TIMEOUT
        else:
            outcome = Outcome.RUNNING
        if self.config.reward_mode == "dense":
            reward = reward_dense(prev, dist, outcome)
        else:
            reward = reward_terminal(outcome)
        terminated = outcome in (Outcome.SOLVED, Outcome.COLLISION)
        truncated = outcome is Outcome.TIMEOUT
        self._needs_reset = terminated or truncated
        self._dist = dist
        self._last_pose = pose
        self._last_obs = self._observation(reading, pose)
        info = {"outcome": outcome.value, "distance": dist, "action": act.name, "steps": self.steps}
        return StepResult(self._last_obs.copy(), float(reward), terminated, truncated, info)

    def render(self, size: int | None = None) -> Snapshot:
        """Top-down character grid; a pure function of the last observation and the world."""
        n = size or self.config.render_size
        a = self.world.arena
        grid = [[" "] * n for _ in range(n)]

        def cell(x: float, y: float) -> tuple[int, int]:
            col = int((x - a.min_x) / (a.max_x - a.min_x) * n)
            row = int((a.max_y - y) / (a.max_y - a.min_y) * n)
            return min(max(row, 0), n - 1), min(max(col, 0), n - 1)

        for i in range(n):
            grid[0][i] = grid[n - 1][i] = grid[i][0] = grid[i][n - 1] = "#"
        for o in self.world.obstacles:
            r0, c0 = cell(o.min_x, o.max_y)
            r1, c1 = cell(o.max_x, o.min_y)
            for r in range(r0, r1 + 1):
                for c in range(c0, c1 + 1):
                    grid[r][c] = "#"
        robot_cell = target_cell = None
        if self._last_pose is not None:
            target_cell = cell(*self.target)
            robot_cell = cell(self._last_pose.x, self._last_pose.y)
            grid[target_cell[0]][target_cell[1]] = "T"
            grid[robot_cell[0]][robot_cell[1]] = "X" if robot_cell == target_cell else "R"
        return Snapshot(["".join(row) for row in grid], robot_cell, target_cell)

    def close(self) -> None:
        if not self.closed:
            self.robot.close()
            self.closed = True


register("MoveToTargetEnv-v0", MoveToTargetEnv)
