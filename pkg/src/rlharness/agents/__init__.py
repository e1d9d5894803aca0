"""DQN and REINFORCE agents over a small hand-differentiated network."""

from .checkpoint import CHECKPOINT_VERSION, Policy, load_policy, save_policy
from .dqn import DqnAgent, DqnHyperparams, ReplayBuffer, dqn_update, epsilon_greedy, td_loss, td_targets
from .mlp import Adam, Grads, Mlp, Sgd, clip_by_norm, make_optimizer, mlp_forward, mlp_gradient, preactivations
from .reinforce import (
    Episode,
    ReinforceAgent,
    ReinforceHyperparams,
    centred_returns,
    compute_returns,
    log_softmax,
    policy_loss,
    reinforce_update,
    softmax,
)

__all__ = [
    "Adam",
    "CHECKPOINT_VERSION",
    "DqnAgent",
    "DqnHyperparams",
    "Episode",
    "Grads",
    "Mlp",
    "Policy",
    "ReinforceAgent",
    "ReinforceHyperparams",
    "ReplayBuffer",
    "Sgd",
    "centred_returns",
    "clip_by_norm",
    "compute_returns",
    "dqn_update",
    "epsilon_greedy",
    "load_policy",
    "log_softmax",
    "make_optimizer",
    "mlp_forward",
    "mlp_gradient",
    "policy_loss",
    "preactivations",
    "reinforce_update",
    "save_policy",
    "softmax",
    "td_loss",
    "td_targets",
]
