"""Versioned checkpoint container for network parameters.

A checkpoint is a torch-serialized dict with a config header (architecture
hyperparameters + seed), the full state dict, and free-form metadata. Loading
refuses files whose config header does not match the expected one, and the
parameter tensors round-trip bit-exactly.
"""

import hashlib
from pathlib import Path

import torch

from .errors import ConfigurationError

FORMAT_VERSION = 1


def save_checkpoint(path, kind: str, config: dict, state_dict: dict, meta: dict | None = None) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "state_dict": {k: v.detach().cpu() for k, v in state_dict.items()},
        "meta": dict(meta or {}),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path, expected_kind: str | None = None, expected_config: dict | None = None) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint format in {path}")
    if expected_kind is not None and payload["kind"] != expected_kind:
        raise ConfigurationError(f"checkpoint {path} holds a {payload['kind']!r} model, expected {expected_kind!r}")
    if expected_config is not None and payload["config"] != expected_config:
        raise ConfigurationError(f"checkpoint {path} config header does not match the expected configuration")
    return payload


def state_hash(state_dict: dict) -> str:
    """Stable content hash of a state dict, for provenance records."""
    h = hashlib.sha256()
    for key in sorted(state_dict):
        h.update(key.encode())
        h.update(state_dict[key].detach().cpu().numpy().tobytes())
    return h.hexdigest()[:16]
