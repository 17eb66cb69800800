"""Weight checkpoints carrying a config digest.

A checkpoint refuses to load against a different configuration, so a
stale file can never silently drive a reshaped network.
"""

from __future__ import annotations

import torch


def save_checkpoint(path, *, models: dict, digest: str, optimizers: dict = None,
                    iteration: int = 0, vocab=None, meta: dict = None) -> None:
    payload = {
        "digest": digest,
        "iteration": int(iteration),
        "models": {k: m.state_dict() for k, m in models.items()},
        "optimizers": {k: o.state_dict() for k, o in (optimizers or {}).items()},
        "vocab": vocab.to_json() if vocab is not None else None,
        "meta": dict(meta or {}),
    }
    torch.save(payload, path)


def load_checkpoint(path, digest: str = None) -> dict:
    """Load a checkpoint; raises when the config digest disagrees."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if digest is not None and payload.get("digest") != digest:
        raise ValueError(
            f"checkpoint config digest {payload.get('digest')!r} does not "
            f"match the requested configuration {digest!r}"
        )
    return payload
