"""Network configuration and loss weights.

Paper-scale defaults; the toy runs shrink sizes and channel widths in
their TOML configs, never the structure.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field


@dataclass
class NetConfig:
    image_size: int = 192
    in_channels: int = 1
    out_channels: int = 3
    base_channels: int = 16
    max_channel_mult: int = 8
    encoder_blocks: int = 5
    decoder_blocks: int = 5
    downsample: int = 2
    disc_blocks: int = 4
    bg_disc_blocks: int = 5
    lstm_steps: int = 15
    mlstm_cell: int = 512
    noise_dim: int = 8
    vocab_size: int = 64
    embed_dim: int = 32
    text_hidden: int = 32
    backbone: str = "mru"  # mru | residual | conv
    encoder_units: tuple = (1, 3, 4, 6, 3)
    decoder_units: tuple = (3, 6, 4, 3, 1)
    num_classes: int = 20

    def __post_init__(self):
        self.encoder_units = tuple(self.encoder_units)
        self.decoder_units = tuple(self.decoder_units)
        if self.image_size % (self.downsample ** self.encoder_blocks) != 0:
            raise ValueError(
                f"image size {self.image_size} not divisible by "
                f"{self.downsample ** self.encoder_blocks}"
            )
        if self.backbone not in ("mru", "residual", "conv"):
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if len(self.encoder_units) != self.encoder_blocks:
            raise ValueError("encoder_units length must match encoder_blocks")
        if len(self.decoder_units) != self.decoder_blocks:
            raise ValueError("decoder_units length must match decoder_blocks")

    def stage_channels(self, i: int) -> int:
        """Channel width of encoder stage i (0-based), doubling capped."""
        return self.base_channels * min(2 ** i, self.max_channel_mult)

    @property
    def bottleneck_size(self) -> int:
        return self.image_size // self.downsample ** self.encoder_blocks

    @property
    def bottleneck_channels(self) -> int:
        return self.stage_channels(self.encoder_blocks - 1)


@dataclass
class LossWeights:
    gan: float = 1.0
    ac: float = 1.0
    l1: float = 100.0
    perc: float = 1.0
    div: float = 0.5
    div_clip: float = 1.0

    def __post_init__(self):
        for name in ("gan", "ac", "l1", "perc", "div"):
            v = getattr(self, name)
            if not (v >= 0):
                raise ValueError(f"loss weight {name} must be non-negative, got {v}")

    @classmethod
    def background(cls, gan: float = 1.0, l1: float = 100.0) -> "LossWeights":
        """The background objective: conditional GAN plus L1 only."""
        return cls(gan=gan, ac=0.0, l1=l1, perc=0.0, div=0.0)

    def enabled(self):
        return [n for n in ("gan", "ac", "l1", "perc", "div")
                if getattr(self, n) > 0]


def config_digest(*configs) -> str:
    """Stable digest of one or more config dataclasses."""
    blob = json.dumps([asdict(c) for c in configs], sort_keys=True,
                      separators=(",", ":"), default=list)
    return hashlib.sha256(blob.encode()).hexdigest()
