"""Encoder-decoder generators with bottleneck text fusion.

One Generator class serves both colorization stages: the object net
runs it with the MRU backbone, noise injection and a sketch input; the
background net runs it with the residual backbone on the composited
color canvas and no noise. Backbones swap by config without touching
shapes.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import make_stage, resize_to
from .config import NetConfig
from .fusion import RMIFuse, TextEncoder


class Generator(nn.Module):
    """Downsample-encode, fuse text at the bottleneck, upsample-decode.

    Every encoder stage sees the raw input resized to its resolution;
    stride-2 pooling sits between stages, so with five stages the
    bottleneck is 1/32 of the input side. Skip connections concatenate
    encoder features into the decoder at matching resolutions and the
    head is a tanh.
    """

    def __init__(self, cfg: NetConfig, use_noise: bool = True):
        super().__init__()
        self.cfg = cfg
        self.use_noise = use_noise
        img_ch = cfg.in_channels
        chans = [cfg.stage_channels(i) for i in range(cfg.encoder_blocks)]

        self.encoder = nn.ModuleList()
        prev = img_ch
        for i, ch in enumerate(chans):
            self.encoder.append(make_stage(
                cfg.backbone, prev, ch, img_ch, units=cfg.encoder_units[i]))
            prev = ch

        self.text = TextEncoder(cfg.vocab_size, cfg.embed_dim,
                                cfg.text_hidden, cfg.lstm_steps)
        bott = chans[-1]
        fuse_in = bott + (cfg.noise_dim if use_noise else 0)
        self.fuse = RMIFuse(fuse_in, cfg.text_hidden, cfg.mlstm_cell,
                            bott, cfg.lstm_steps)

        self.decoder = nn.ModuleList()
        prev = bott
        for i in range(cfg.decoder_blocks):
            skip = chans[cfg.encoder_blocks - 1 - i]
            out = chans[max(cfg.encoder_blocks - 2 - i, 0)]
            self.decoder.append(make_stage(
                cfg.backbone, prev + skip, out, img_ch,
                units=cfg.decoder_units[i]))
            prev = out
        self.head = nn.Conv2d(prev, cfg.out_channels, 3, padding=1)

    def forward(self, image, tokens, noise=None, return_internals: bool = False):
        cfg = self.cfg
        factor = cfg.downsample ** cfg.encoder_blocks
        if image.shape[-1] % factor or image.shape[-2] % factor:
            raise ValueError(
                f"input side must be divisible by {factor}, "
                f"got {tuple(image.shape[-2:])}"
            )
        if self.use_noise:
            if noise is None:
                raise ValueError("this generator expects a noise vector")
        elif noise is not None:
            raise ValueError("this generator takes no noise")

        words = self.text(tokens)
        skips = []
        x = image
        for stage in self.encoder:
            x = stage(x, resize_to(image, x.shape[-2:]))
            skips.append(x)
            x = F.avg_pool2d(x, cfg.downsample)

        if self.use_noise:
            b, _, h, w = x.shape
            tiled = noise[:, :, None, None].expand(-1, -1, h, w)
            x = torch.cat([x, tiled], dim=1)
        bottleneck = x
        x = self.fuse(x, words)

        for i, stage in enumerate(self.decoder):
            x = F.interpolate(x, scale_factor=cfg.downsample, mode="nearest")
            x = torch.cat([x, skips[cfg.encoder_blocks - 1 - i]], dim=1)
            x = stage(x, resize_to(image, x.shape[-2:]))
        out = torch.tanh(self.head(x))
        if return_internals:
            return out, {"bottleneck": bottleneck, "skips": skips}
        return out


def object_generator(cfg: NetConfig = None, **overrides) -> Generator:
    """The instance colorizer: MRU backbone, noise at the bottleneck."""
    if cfg is None:
        cfg = NetConfig(backbone="mru", in_channels=1, **overrides)
    return Generator(cfg, use_noise=True)


def background_generator(cfg: NetConfig = None, **overrides) -> Generator:
    """The scene completer: residual backbone over the color canvas."""
    if cfg is None:
        overrides.setdefault("image_size", 768)
        cfg = NetConfig(backbone="residual", in_channels=3, **overrides)
    return Generator(cfg, use_noise=False)
