"""Unattended training session: provision, train to budget, evaluate, report.

The loop is collect / train / evaluate, each phase inside a FAST scope of
the simulator. Before every environment reset the reset-bound policy is
consulted, so a simulator is restarted before it reaches the reset count at
which it is known to crash. If the simulator dies anyway, the episode in
flight is dropped, the simulator is restarted and training resumes.
"""

from __future__ import annotations

import enum
import logging
import signal
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ..agents import DqnAgent, Episode, Mlp, ReinforceAgent, mlp_forward, save_policy
from ..busline import Broker, BusClient
from ..envkit import MoveToTargetEnv
from ..errors import BusError, ConfigError, HarnessError, SimulatorError, is_simulator_loss
from ..simclient import LocalSimulator, Robotino, SimulatorHandle
from ..simcore.world import load_world
from .config import SessionConfig
from .records import (
    CHECKPOINT_FILE,
    METRICS_FILE,
    SIM_EXIT_LOG,
    MetricsRecord,
    SessionReport,
    write_metrics,
    write_report,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2


class Decision(str, enum.Enum):
    PROCEED = "proceed"
    RESTART_FIRST = "restart_first"


def restart_policy(resets_since_start: int, limit: int) -> Decision:
    return Decision.RESTART_FIRST if resets_since_start >= limit else Decision.PROCEED


# -- evaluation -------------------------------------------------------------


@dataclass
class EvalResult:
    success_rate: float
    mean_return: float
    outcomes: list[str] = field(default_factory=list)
    returns: list[float] = field(default_factory=list)


def greedy_action(policy: Mlp | Callable[[np.ndarray], int], obs: np.ndarray) -> int:
    """Argmax of the network output: max Q for DQN, most probable action for REINFORCE."""
    if isinstance(policy, Mlp):
        return int(np.argmax(mlp_forward(policy, obs)))
    return int(policy(obs))


def evaluate_policy(
    policy: Mlp | Callable[[np.ndarray], int],
    env: MoveToTargetEnv,
    episodes: int,
    seed: int | None = None,
    before_reset: Callable[[], None] | None = None,
) -> EvalResult:
    """Greedy rollouts inside one FAST scope. Never touches the parameters."""
    outcomes, returns = [], []
    with env._scope():
        for i in range(episodes):
            if before_reset is not None:
                before_reset()
            obs = env.reset(seed=seed if i == 0 else None)
            total = 0.0
            while True:
                result = env.step(greedy_action(policy, obs))
                total += result.reward
                obs = result.observation
                if result.terminated or result.truncated:
                    break
            outcomes.append(result.outcome)
            returns.append(total)
    successes = sum(o == "SOLVED" for o in outcomes)
    return EvalResult(successes / episodes, float(np.mean(returns)), outcomes, returns)


# -- session ------------------------------------------------------------------


class SessionAborted(HarnessError):
    code = "ABORTED"


class Terminated(BaseException):
    """Raised in the main thread by the termination signal handler."""


def _lost(exc: BaseException | None) -> bool:
    while exc is not None:
        if is_simulator_loss(exc):
            return True
        exc = exc.__cause__
    return False


class Session:
    def __init__(self, config: SessionConfig):
        self.config = config
        try:
            self.world = load_world(config.world_path)
        except HarnessError as exc:
            raise ConfigError(message=f"world_path: {exc}") from None
        self.env_config = config.env_config()
        self.hyperparams = config.agent_hyperparams()
        self.out_dir = Path(config.out_dir)
        self.report = SessionReport(algorithm=config.algorithm, seed=config.seed)
        self.broker: Broker | None = None
        self.bus: BusClient | None = None
        self.sim: Any = None
        self.env: MoveToTargetEnv | None = None
        self.agent: DqnAgent | ReinforceAgent | None = None
        self._failed_restarts = 0
        # resets acknowledged by simulators that have since been replaced
        self._retired_resets = 0

    # -- provisioning -----------------------------------------------------

    def provision(self, fresh: bool = True) -> None:
        """Build simulator, robot, env and agent. ``fresh`` clears records of an earlier run."""
        cfg = self.config
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if fresh:
            for name in (METRICS_FILE, SIM_EXIT_LOG):
                (self.out_dir / name).unlink(missing_ok=True)
        spec = self.world.robot(self.env_config.robot) if self.env_config.robot else self.world.robots[0]
        if cfg.backend == "inmemory":
            self.sim = LocalSimulator(self.world)
            robot = self.sim.robot(spec.name)
        else:
            address = cfg.broker
            if address == "autostart":
                self.broker = Broker("127.0.0.1", 0, liveness_secs=cfg.liveness_secs)
                self.broker.start()
                address = self.broker.address_text
            self.bus = BusClient(address)
            extra = ["--exit-log", str(self.out_dir / SIM_EXIT_LOG)]
            if cfg.fault_resets is not None:
                extra += ["--fault-resets", str(cfg.fault_resets)]
            self.sim = SimulatorHandle(
                self.bus,
                self.world.supervisor_name,
                cfg.world_path,
                address,
                simulator_cmd=cfg.simulator_cmd,
                extra_args=extra,
                availability_timeout=cfg.availability_timeout,
                log_path=self.out_dir / "simulator.log",
            )
            robot = Robotino(self.bus, spec, self.world.basic_timestep_ms)
        self.env = MoveToTargetEnv(self.sim, robot, self.world, self.env_config, seed=cfg.seed)
        obs_dim = self.env.observation_space.shape[0]
        n_actions = self.env.action_space.n
        if cfg.algorithm == "dqn":
            self.agent = DqnAgent(obs_dim, n_actions, self.hyperparams, seed=cfg.seed)
        else:
            self.agent = ReinforceAgent(obs_dim, n_actions, self.hyperparams, seed=cfg.seed)

    def teardown(self) -> None:
        if self.env is not None:
            self.env.close()
        if self.sim is not None:
            try:
                self.sim.stop()
            except HarnessError as exc:
                log.warning("stopping simulator: %s", exc)
        if self.bus is not None:
            self.bus.close()
        if self.broker is not None:
            self.broker.close()

    # -- simulator recovery -------------------------------------------------

    def _bring_up(self, action: Callable[[], None], what: str) -> None:
        """Run start/restart until it succeeds or the failure budget is spent."""
        while True:
            try:
                action()
            except (SimulatorError, BusError) as exc:
                self._failed_restarts += 1
                log.warning("simulator %s failed (%d/%d): %s", what, self._failed_restarts,
                            self.config.max_failed_restarts, exc)
                if self._failed_restarts >= self.config.max_failed_restarts:
                    raise SessionAborted(
                        message=f"{self._failed_restarts} consecutive failed simulator {what}s, last: {exc}"
                    ) from exc
                continue
            self._failed_restarts = 0
            return

    def restart(self, cause: str) -> None:
        log.info("restarting simulator (%s) after %d resets", cause, self.sim.resets_since_start)
        self._retired_resets += self.sim.resets_since_start
        self._bring_up(self.sim.restart, "restart")
        self.report.note_restart(cause)

    def before_reset(self) -> None:
        if restart_policy(self.sim.resets_since_start, self.config.restart_after_resets) is Decision.RESTART_FIRST:
            self.restart("scheduled")

    def _reset_env(self, seed: int | None = None) -> np.ndarray:
        self.before_reset()
        return self.env.reset(seed=seed)

    def guarded(self, phase: Callable[[], Any]) -> Any:
        """Run ``phase`` until it completes without losing the simulator."""
        while True:
            try:
                return phase()
            except (BusError, SimulatorError) as exc:
                if not _lost(exc):
                    raise
                log.warning("simulator lost (%s); discarding the phase in flight", exc)
                self.restart("crash")

    # -- phases -------------------------------------------------------------

    def _dqn_episode(self) -> tuple[int, float, str]:
        agent: DqnAgent = self.agent  # type: ignore[assignment]
        with self.sim.scoped_fast():
            obs = self._reset_env()
            total = 0.0
            while True:
                action = agent.act(obs)
                result = self.env.step(action)
                agent.remember(obs, action, result.reward, result.observation, result.terminated)
                if agent.ready():
                    for _ in range(agent.hp.updates_per_step):
                        agent.update()
                total += result.reward
                obs = result.observation
                if result.terminated or result.truncated:
                    return result.info["steps"], total, result.outcome

    def _reinforce_episode(self) -> tuple[Episode, float, str]:
        agent: ReinforceAgent = self.agent  # type: ignore[assignment]
        episode = Episode()
        with self.sim.scoped_fast():
            obs = self._reset_env()
            while True:
                action = agent.act(obs)
                result = self.env.step(action)
                episode.add(obs, action, result.reward)
                obs = result.observation
                if result.terminated or result.truncated:
                    return episode, float(sum(episode.rewards)), result.outcome

    def evaluate(self, episodes: int) -> EvalResult:
        return self.guarded(lambda: evaluate_policy(
            self.agent.params, self.env, episodes, seed=self.config.seed, before_reset=self.before_reset
        ))

    def _record(self, steps: int, ret: float, outcome: str, started: float) -> None:
        rec = MetricsRecord(
            index=self.report.episodes,
            steps=steps,
            return_=ret,
            outcome=outcome,
            wall_ms=(time.monotonic() - started) * 1000.0,
            resets_since_start=self.sim.resets_since_start,
        )
        write_metrics(rec, self.out_dir)
        self.report.episodes += 1
        self.report.env_steps += steps

    def _budget_left(self) -> bool:
        done = self.report.env_steps if self.config.algorithm == "dqn" else self.report.episodes
        return done < self.config.budget

    def train(self) -> None:
        cfg = self.config
        batch: list[Episode] = []
        while self._budget_left():
            started = time.monotonic()
            if cfg.algorithm == "dqn":
                steps, ret, outcome = self.guarded(self._dqn_episode)
            else:
                episode, ret, outcome = self.guarded(self._reinforce_episode)
                steps = len(episode)
                batch.append(episode)
                if len(batch) >= self.agent.hp.batch_episodes:
                    with self.sim.scoped_fast():
                        self.agent.update(batch)
                    batch = []
            self._record(steps, ret, outcome, started)
            if self.report.episodes % cfg.eval_every == 0 and self._budget_left():
                self._log_eval(self.evaluate(cfg.eval_episodes))
        if batch:
            self.agent.update(batch)

    def _log_eval(self, result: EvalResult) -> None:
        entry = {
            "episode": self.report.episodes,
            "env_steps": self.report.env_steps,
            "success_rate": result.success_rate,
            "mean_return": result.mean_return,
        }
        self.report.evals.append(entry)
        log.info("eval after %d episodes: success %.2f, mean return %.3f",
                 self.report.episodes, result.success_rate, result.mean_return)

    def save_checkpoint(self) -> Path:
        path = save_policy(
            self.agent.params,
            self.out_dir / CHECKPOINT_FILE,
            action_set=self.env_config.action_set,
            obs_layout=self.env_config.obs_layout,
            algorithm=self.config.algorithm,
        )
        self.report.checkpoint = str(path)
        return path

    # -- entry point --------------------------------------------------------

    def run(self) -> SessionReport:
        started = time.monotonic()
        try:
            self.provision()
            self._bring_up(self.sim.start, "start")
            self.train()
            final = self.evaluate(self.config.final_eval_episodes)
            self._log_eval(final)
            self.report.final_eval_success_rate = final.success_rate
            self.report.final_eval_mean_return = final.mean_return
            self.save_checkpoint()
        except Terminated:
            self._abort("terminated by signal")
        except HarnessError as exc:
            self._abort(str(exc))
        except OSError as exc:
            self._abort(f"I/O error: {exc}")
        finally:
            try:
                self.teardown()
            except Terminated:
                pass
            self.report.total_duration = time.monotonic() - started
            if self.sim is not None:
                self.report.total_resets = self._retired_resets + self.sim.resets_since_start
            try:
                write_report(self.report, self.out_dir)
            except OSError as exc:
                log.error("cannot write report: %s", exc)
                self.report.exit_code = EXIT_ABORT
        return self.report

    def _abort(self, reason: str) -> None:
        log.error("session aborted: %s", reason)
        self.report.aborted = True
        self.report.abort_reason = reason
        self.report.exit_code = EXIT_ABORT
        if self.agent is not None:
            try:
                self.save_checkpoint()
            except OSError:
                pass


def run_session(config: SessionConfig) -> SessionReport:
    """Run a whole session. Installs a SIGTERM handler when called from the main thread."""
    session = Session(config)
    previous = None
    main_thread = threading.current_thread() is threading.main_thread()
    if main_thread:
        def _on_term(signum, frame):
            raise Terminated()

        previous = signal.signal(signal.SIGTERM, _on_term)
    try:
        return session.run()
    finally:
        if main_thread:
            signal.signal(signal.SIGTERM, previous)
