"""Step-centric deep Q-learning with a replay buffer and a target network."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import AgentError
from .mlp import Mlp, make_optimizer, mlp_forward, mlp_gradient


@dataclass
class DqnHyperparams:
    gamma: float = 0.99
    learning_rate: float = 1e-3
    batch_size: int = 64
    target_update_every: int = 200
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 5000
    warmup: int = 500
    buffer_capacity: int = 10_000
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    grad_clip: float = 10.0
    optimizer: str = "sgd"
    updates_per_step: int = 1

    def __post_init__(self) -> None:
        for name in ("gamma", "learning_rate", "batch_size", "target_update_every", "epsilon_decay_steps",
                     "buffer_capacity", "grad_clip", "updates_per_step"):
            if getattr(self, name) <= 0:
                raise AgentError("BAD_HYPERPARAMS", f"{name} must be positive")
        if self.warmup < 1:
            raise AgentError("BAD_HYPERPARAMS", "warmup must be >= 1")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise AgentError("BAD_HYPERPARAMS", f"{name} must lie in [0, 1]")

    def epsilon(self, step: int) -> float:
        frac = min(1.0, step / self.epsilon_decay_steps)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)

    def as_dict(self) -> dict:
        return asdict(self)


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action: int, reward: float, next_obs, terminal: bool) -> None:
        i = self._next
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.terminals[i] = terminal
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.size, size=min(batch_size, self.size), replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = self.sample_indices(batch_size, rng)
        return self.obs[idx], self.actions[idx], self.rewards[idx], self.next_obs[idx], self.terminals[idx]


def epsilon_greedy(q_values, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform random action with probability ``epsilon``, else argmax (lowest index on ties)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    q = np.asarray(q_values)
    if rng.random() < epsilon:
        return int(rng.integers(q.shape[-1]))
    return int(np.argmax(q))


def td_loss(params: Mlp, obs, actions, targets) -> tuple[float, np.ndarray]:
    """Mean squared TD error and its gradient w.r.t. the network output."""
    q = mlp_forward(params, obs)
    rows = np.arange(len(actions))
    diff = q[rows, actions] - targets
    grad_out = np.zeros_like(q)
    grad_out[rows, actions] = 2.0 * diff / len(actions)
    return float(np.mean(diff * diff)), grad_out


def td_targets(target_params: Mlp, rewards, next_obs, terminals, gamma: float) -> np.ndarray:
    next_q = mlp_forward(target_params, next_obs).max(axis=1)
    return rewards + gamma * np.where(terminals, 0.0, next_q)


def dqn_update(buffer: ReplayBuffer, params: Mlp, target_params: Mlp, hp: DqnHyperparams,
               rng: np.random.Generator, optimizer=None) -> tuple[Mlp, float]:
    """One gradient step on the mean squared TD error of a replay batch."""
    if len(buffer) < max(hp.warmup, 1):
        raise AgentError("UNDERFULL_BUFFER", f"buffer holds {len(buffer)} transitions, warmup is {hp.warmup}")
    obs, actions, rewards, next_obs, terminals = buffer.sample(hp.batch_size, rng)
    targets = td_targets(target_params, rewards, next_obs, terminals, hp.gamma)
    loss, grad_out = td_loss(params, obs, actions, targets)
    if optimizer is None:
        optimizer = make_optimizer(hp.optimizer, hp.learning_rate, hp.grad_clip)
    return optimizer.step(params, mlp_gradient(params, obs, grad_out)), loss


class DqnAgent:
    def __init__(self, obs_dim: int, n_actions: int, hp: DqnHyperparams | None = None, seed: int | None = None):
        self.hp = hp or DqnHyperparams()
        self.rng = np.random.default_rng(seed)
        self.params = Mlp.init([obs_dim, *self.hp.hidden, n_actions], self.rng)
        self.target_params = self.params.copy()
        self.buffer = ReplayBuffer(self.hp.buffer_capacity, obs_dim)
        self.optimizer = make_optimizer(self.hp.optimizer, self.hp.learning_rate, self.hp.grad_clip)
        self.env_steps = 0
        self.updates = 0

    @property
    def epsilon(self) -> float:
        return self.hp.epsilon(self.env_steps)

    def act(self, obs, greedy: bool = False) -> int:
        q = mlp_forward(self.params, obs)
        return epsilon_greedy(q, 0.0 if greedy else self.epsilon, self.rng)

    def remember(self, obs, action: int, reward: float, next_obs, terminal: bool) -> None:
        self.buffer.add(obs, action, reward, next_obs, terminal)
        self.env_steps += 1

    def ready(self) -> bool:
        return len(self.buffer) >= self.hp.warmup

    def update(self) -> float:
        self.params, loss = dqn_update(self.buffer, self.params, self.target_params, self.hp, self.rng, self.optimizer)
        self.updates += 1
        if self.updates % self.hp.target_update_every == 0:
            self.target_params = self.params.copy()
        return loss
