"""Small fully connected network with hand-written backpropagation.

Weights are stored ``(out, in)`` so a layer computes ``x @ W.T + b``.
Hidden layers use a rectifier, the output layer is linear.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class Mlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, layer_sizes: Sequence[int], rng: np.random.Generator) -> "Mlp":
        weights, biases = [], []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        # small output layer keeps initial values near zero
        weights[-1] *= 0.1
        return cls(weights, biases)

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int]) -> "Mlp":
        return cls(
            [np.zeros((o, i)) for i, o in zip(layer_sizes[:-1], layer_sizes[1:])],
            [np.zeros(o) for o in layer_sizes[1:]],
        )

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def __call__(self, obs) -> np.ndarray:
        return mlp_forward(self, obs)


@dataclass
class Grads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.arrays())))


def _forward(params: Mlp, obs) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    x = np.asarray(obs, dtype=np.float64)
    if x.shape[-1] != params.layer_sizes[0]:
        raise ValueError(f"observation has {x.shape[-1]} features, network expects {params.layer_sizes[0]}")
    inputs, pre = [], []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(x)
        z = x @ w.T + b
        pre.append(z)
        x = np.maximum(z, 0.0) if i < last else z
    return x, inputs, pre


def mlp_forward(params: Mlp, obs) -> np.ndarray:
    """Per-action outputs for one observation ``(in,)`` or a batch ``(B, in)``."""
    return _forward(params, obs)[0]


def preactivations(params: Mlp, obs) -> list[np.ndarray]:
    return _forward(params, obs)[2]


def mlp_gradient(params: Mlp, obs, grad_out) -> Grads:
    """Backpropagate ``dLoss/dOutput`` (same shape as the output) to the parameters."""
    _, inputs, pre = _forward(params, obs)
    g = np.asarray(grad_out, dtype=np.float64)
    gw: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    for i in range(len(params.weights) - 1, -1, -1):
        x = inputs[i]
        if g.ndim == 1:
            gw[i] = np.outer(g, x)
            gb[i] = g.copy()
        else:
            gw[i] = g.T @ x
            gb[i] = g.sum(axis=0)
        if i > 0:
            g = (g @ params.weights[i]) * (pre[i - 1] > 0.0)
    return Grads(gw, gb)


# -- optimisers ------------------------------------------------------------


def clip_by_norm(grads: Grads, max_norm: float | None) -> Grads:
    if max_norm is None:
        return grads
    norm = grads.norm()
    if norm <= max_norm or norm == 0.0:
        return grads
    scale = max_norm / norm
    return Grads([g * scale for g in grads.weights], [g * scale for g in grads.biases])


class Sgd:
    def __init__(self, learning_rate: float, clip_norm: float | None = 10.0):
        self.learning_rate = learning_rate
        self.clip_norm = clip_norm

    def step(self, params: Mlp, grads: Grads) -> Mlp:
        grads = clip_by_norm(grads, self.clip_norm)
        lr = self.learning_rate
        return Mlp(
            [w - lr * g for w, g in zip(params.weights, grads.weights)],
            [b - lr * g for b, g in zip(params.biases, grads.biases)],
        )


class Adam:
    def __init__(self, learning_rate: float, clip_norm: float | None = 10.0, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.clip_norm = clip_norm
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: Mlp, grads: Grads) -> Mlp:
        grads = clip_by_norm(grads, self.clip_norm)
        flat = grads.arrays()
        if self._m is None:
            self._m = [np.zeros_like(g) for g in flat]
            self._v = [np.zeros_like(g) for g in flat]
        assert self._v is not None
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.learning_rate * np.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        out = []
        for i, (p, g) in enumerate(zip(params.arrays(), flat)):
            self._m[i] = b1 * self._m[i] + (1 - b1) * g
            self._v[i] = b2 * self._v[i] + (1 - b2) * g * g
            out.append(p - lr_t * self._m[i] / (np.sqrt(self._v[i]) + self.eps))
        n = len(params.weights)
        return Mlp(out[:n], out[n:])


def make_optimizer(name: str, learning_rate: float, clip_norm: float | None = 10.0):
    name = name.lower()
    if name == "sgd":
        return Sgd(learning_rate, clip_norm)
    if name == "adam":
        return Adam(learning_rate, clip_norm)
    raise ValueError(f"unknown optimizer {name!r}")
