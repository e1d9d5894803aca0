"""Policy checkpoints as JSON documents."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .mlp import Mlp

CHECKPOINT_VERSION = 1


@dataclass
class Policy:
    params: Mlp
    algorithm: str = ""
    action_set: list[str] = field(default_factory=list)
    obs_layout: list[str] = field(default_factory=list)


def save_policy(params: Mlp, path: str | Path, action_set=(), obs_layout=(), algorithm: str = "") -> Path:
    path = Path(path)
    doc = {
        "version": CHECKPOINT_VERSION,
        "algorithm": algorithm,
        "layer_sizes": params.layer_sizes,
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "action_set": list(action_set),
        "obs_layout": list(obs_layout),
    }
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc), encoding="utf-8")
    os.replace(tmp, path)
    return path


def _matrix(value, shape: tuple[int, ...], what: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise CheckpointError(message=f"{what}: not a numeric array ({exc})") from None
    if arr.shape != shape:
        raise CheckpointError(message=f"{what}: shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise CheckpointError(message=f"{what}: contains non-finite values")
    return arr


def load_policy(path: str | Path) -> Policy:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise CheckpointError(message=f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise CheckpointError(message=f"{path}: corrupt JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise CheckpointError(message=f"{path}: top level is not an object")
    for key in ("version", "layer_sizes", "weights", "biases"):
        if key not in doc:
            raise CheckpointError(message=f"{path}: missing field {key!r}")
    if doc["version"] != CHECKPOINT_VERSION:
        raise CheckpointError(
            message=f"{path}: field 'version' is {doc['version']!r}, this build reads version {CHECKPOINT_VERSION}"
        )
    sizes = doc["layer_sizes"]
    if (
        not isinstance(sizes, list)
        or len(sizes) < 2
        or not all(isinstance(s, int) and not isinstance(s, bool) and s > 0 for s in sizes)
    ):
        raise CheckpointError(message=f"{path}: field 'layer_sizes' is invalid: {sizes!r}")
    n_layers = len(sizes) - 1
    if not isinstance(doc["weights"], list) or len(doc["weights"]) != n_layers:
        raise CheckpointError(message=f"{path}: field 'weights' must hold {n_layers} matrices")
    if not isinstance(doc["biases"], list) or len(doc["biases"]) != n_layers:
        raise CheckpointError(message=f"{path}: field 'biases' must hold {n_layers} vectors")
    weights = [_matrix(w, (sizes[i + 1], sizes[i]), f"weights[{i}]") for i, w in enumerate(doc["weights"])]
    biases = [_matrix(b, (sizes[i + 1],), f"biases[{i}]") for i, b in enumerate(doc["biases"])]
    action_set = doc.get("action_set", [])
    if action_set and len(action_set) != sizes[-1]:
        raise CheckpointError(message=f"{path}: field 'action_set' has {len(action_set)} entries for {sizes[-1]} outputs")
    layout = doc.get("obs_layout", [])
    if layout and len(layout) != sizes[0]:
        raise CheckpointError(message=f"{path}: field 'obs_layout' has {len(layout)} entries for {sizes[0]} inputs")
    return Policy(Mlp(weights, biases), doc.get("algorithm", ""), list(action_set), list(layout))
