"""Episode-centric REINFORCE with a softmax policy head and a mean-return baseline."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import AgentError
from .mlp import Mlp, make_optimizer, mlp_forward, mlp_gradient


@dataclass
class ReinforceHyperparams:
    gamma: float = 0.99
    learning_rate: float = 1e-3
    batch_episodes: int = 4
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    grad_clip: float = 10.0
    optimizer: str = "sgd"

    def __post_init__(self) -> None:
        for name in ("gamma", "learning_rate", "batch_episodes", "grad_clip"):
            if getattr(self, name) <= 0:
                raise AgentError("BAD_HYPERPARAMS", f"{name} must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Episode:
    observations: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)

    def add(self, obs, action: int, reward: float) -> None:
        self.observations.append(np.asarray(obs, dtype=np.float64))
        self.actions.append(int(action))
        self.rewards.append(float(reward))

    def __len__(self) -> int:
        return len(self.rewards)


def compute_returns(rewards, gamma: float) -> np.ndarray:
    """Discounted return from every step to the end, accumulated right to left."""
    rewards = list(rewards)
    if not rewards:
        raise ValueError("compute_returns needs at least one reward")
    out = np.empty(len(rewards))
    g = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g
        out[t] = g
    return out


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def policy_loss(params: Mlp, obs, actions, weights, n_episodes: int) -> tuple[float, np.ndarray]:
    """Negative weighted log-likelihood and its gradient w.r.t. the logits.

    ``weights`` are the centred returns ``G_t - b``.
    """
    logits = mlp_forward(params, obs)
    logp = log_softmax(logits)
    rows = np.arange(len(actions))
    loss = -float(np.sum(weights * logp[rows, actions])) / n_episodes
    onehot = np.zeros_like(logits)
    onehot[rows, actions] = 1.0
    grad_out = -(weights[:, None] * (onehot - np.exp(logp))) / n_episodes
    return loss, grad_out


def centred_returns(episodes, gamma: float) -> np.ndarray:
    returns = np.concatenate([compute_returns(ep.rewards, gamma) for ep in episodes])
    return returns - returns.mean()


def reinforce_update(episodes, params: Mlp, hp: ReinforceHyperparams, optimizer=None) -> tuple[Mlp, float]:
    """One ascent step on sum_t (G_t - b) log pi(a_t | s_t), averaged over episodes."""
    episodes = list(episodes)
    if not episodes or any(len(ep) == 0 for ep in episodes):
        raise AgentError("EMPTY_BATCH", "reinforce_update needs at least one non-empty episode")
    obs = np.stack([o for ep in episodes for o in ep.observations])
    actions = np.array([a for ep in episodes for a in ep.actions], dtype=np.int64)
    weights = centred_returns(episodes, hp.gamma)
    loss, grad_out = policy_loss(params, obs, actions, weights, len(episodes))
    if optimizer is None:
        optimizer = make_optimizer(hp.optimizer, hp.learning_rate, hp.grad_clip)
    return optimizer.step(params, mlp_gradient(params, obs, grad_out)), loss


class ReinforceAgent:
    def __init__(self, obs_dim: int, n_actions: int, hp: ReinforceHyperparams | None = None, seed: int | None = None):
        self.hp = hp or ReinforceHyperparams()
        self.rng = np.random.default_rng(seed)
        self.params = Mlp.init([obs_dim, *self.hp.hidden, n_actions], self.rng)
        self.optimizer = make_optimizer(self.hp.optimizer, self.hp.learning_rate, self.hp.grad_clip)
        self.updates = 0

    def probabilities(self, obs) -> np.ndarray:
        return softmax(mlp_forward(self.params, obs))

    def act(self, obs, greedy: bool = False) -> int:
        p = self.probabilities(obs)
        if greedy:
            return int(np.argmax(p))
        return int(self.rng.choice(len(p), p=p))

    def update(self, episodes) -> float:
        self.params, loss = reinforce_update(episodes, self.params, self.hp, self.optimizer)
        self.updates += 1
        return loss
