"""World-variant generation so several simulators can share one broker.

Node names come from the world file, so two simulators loading the same
world collide on registration. Each variant gets every node name suffixed
with ``_<i>``; everything else is copied unchanged.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from ..busline.frames import valid_name
from ..errors import GenerationError, HarnessError
from ..simcore.world import load_world, world_from_dict


def variant_document(raw: dict, index: int) -> dict:
    doc = copy.deepcopy(raw)
    doc["supervisor_name"] = f"{raw['supervisor_name']}_{index}"
    for robot in doc["robots"]:
        robot["name"] = f"{robot['name']}_{index}"
    return doc


def instantiate_world_variants(world_path: str | Path, n: int, out_dir: str | Path) -> list[Path]:
    if not isinstance(n, int) or n < 1:
        raise GenerationError(message=f"instance count must be a positive integer, got {n!r}")
    world_path = Path(world_path)
    try:
        world = load_world(world_path)
    except HarnessError as exc:
        raise GenerationError(message=f"source world does not load: {exc}") from None

    docs, seen = [], set()
    for i in range(n):
        doc = variant_document(world.raw, i)
        names = [doc["supervisor_name"], *(r["name"] for r in doc["robots"])]
        for name in names:
            if not valid_name(name):
                raise GenerationError(message=f"variant {i}: node name {name!r} is invalid after suffixing")
            if name in seen:
                raise GenerationError(message=f"variant {i}: node name {name!r} collides with another variant")
            seen.add(name)
        try:
            world_from_dict(doc)
        except HarnessError as exc:
            raise GenerationError(message=f"variant {i} does not validate: {exc}") from None
        docs.append(doc)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, doc in enumerate(docs):
        path = out_dir / f"{world_path.stem}_{i}.json"
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        paths.append(path)
    return paths
