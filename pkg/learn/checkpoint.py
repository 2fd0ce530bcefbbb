"""
JSON checkpoints of the learner.

Weights, optimiser moments and the learner's RNG state are written as
plain JSON so a resumed run continues bit-exactly. A checkpoint may also
carry the replay buffer (as a compressed numpy sidecar next to the JSON
file) and the state of the fine-tuning RNG that drives environment resets.
"""
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from .agent import ConservativeActorCritic
from .replay_buffer import ReplayBuffer

logger = logging.getLogger(__name__)

CHECKPOINT_SCHEMA = "wayshape-checkpoint/2"


@dataclass
class Checkpoint:
    agent: ConservativeActorCritic
    extra: Dict[str, Any] = field(default_factory=dict)
    buffer: Optional[ReplayBuffer] = None
    rng: Optional[np.random.Generator] = None


def buffer_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".buffer.npz")


def save_checkpoint(agent: ConservativeActorCritic, path: Union[str, Path],
                    extra: Optional[Dict[str, Any]] = None, buffer: Optional[ReplayBuffer] = None,
                    rng: Optional[np.random.Generator] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema": CHECKPOINT_SCHEMA,
        "agent": agent.state_dict(),
        "extra": extra or {},
        "buffer": None,
        "rng": rng.bit_generator.state if rng is not None else None,
    }
    if buffer is not None:
        sidecar = buffer_path(path)
        with open(sidecar, "wb") as f:
            np.savez_compressed(f, **buffer.state_dict())
        payload["buffer"] = sidecar.name

    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload), encoding="utf-8")
    os.replace(tmp, path)
    logger.info(f"Saved checkpoint to {path}")
    return path


def restore_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    payload = json.loads(path.read_text(encoding="utf-8"))
    schema = payload.get("schema")
    if schema != CHECKPOINT_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema {schema!r}, expected {CHECKPOINT_SCHEMA!r}")

    buffer = None
    if payload.get("buffer"):
        with np.load(path.parent / payload["buffer"]) as data:
            buffer = ReplayBuffer.from_state_dict({name: data[name] for name in data.files})
    rng = None
    if payload.get("rng") is not None:
        rng = np.random.default_rng()
        rng.bit_generator.state = payload["rng"]
    return Checkpoint(ConservativeActorCritic.from_state_dict(payload["agent"]), payload.get("extra", {}), buffer, rng)


def load_checkpoint(path: Union[str, Path]) -> Tuple[ConservativeActorCritic, Dict[str, Any]]:
    checkpoint = restore_checkpoint(path)
    return checkpoint.agent, checkpoint.extra
