"""Versioned checkpoint container.

Format "kgcm-checkpoint" v1: a Python pickle (protocol 4) of a dict with keys
``format``, ``format_version``, ``kind`` (model variant), ``config`` (echo of
the run configuration), ``seed``, and ``arrays`` (parameter name -> float
ndarray).  Pickling the same content yields the same bytes, so checkpoints
are bit-identical across reruns and round-trip bit-exactly.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

FORMAT_NAME = "kgcm-checkpoint"
FORMAT_VERSION = 1


def state_arrays(model) -> dict[str, np.ndarray]:
    """Copy a torch module's state_dict into plain float ndarrays."""
    return {k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()}


def load_state_arrays(model, arrays: dict[str, np.ndarray]) -> None:
    import torch

    model.load_state_dict({k: torch.as_tensor(v) for k, v in arrays.items()})


@dataclass(frozen=True)
class Checkpoint:
    kind: str
    config: dict
    seed: int
    arrays: dict[str, np.ndarray]


def save_checkpoint(path: str | Path, kind: str, config: dict, seed: int,
                    arrays: dict[str, np.ndarray]) -> None:
    payload = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "seed": seed,
        "arrays": {k: np.ascontiguousarray(v) for k, v in sorted(arrays.items())},
    }
    Path(path).write_bytes(pickle.dumps(payload, protocol=4))


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    payload = pickle.loads(path.read_bytes())
    if payload.get("format") != FORMAT_NAME:
        raise DataError(f"not a {FORMAT_NAME} file: {path}")
    if payload.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"unsupported checkpoint version {payload.get('format_version')} in {path}"
        )
    return Checkpoint(kind=payload["kind"], config=payload["config"],
                      seed=payload["seed"], arrays=payload["arrays"])
