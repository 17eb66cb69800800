"""Discriminators for the two colorization stages.

The object discriminator stacks four MRU stages, feeding each one the
conditioning pair (image, sketch) resized to that stage's resolution,
and ends in a realism logit plus per-class logits. The background
discriminator fuses text into stem features with the RMI model, then
applies five single-convolution stride-2 stages to a scalar logit.
Neither uses normalization.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import LEAK, make_stage, resize_to
from .config import NetConfig
from .fusion import RMIFuse, TextEncoder


class ObjectDiscriminator(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        cond_ch = cfg.out_channels + cfg.in_channels
        self.stages = nn.ModuleList()
        prev = cond_ch
        for k in range(cfg.disc_blocks):
            ch = cfg.stage_channels(k)
            self.stages.append(make_stage(
                cfg.backbone, prev, ch, cond_ch, units=1, norm=False))
            prev = ch
        self.real_head = nn.Linear(prev, 1)
        self.class_head = nn.Linear(prev, cfg.num_classes)

    def forward(self, image, sketch, return_features: bool = False):
        if image.shape[-2:] != sketch.shape[-2:]:
            raise ValueError("image and sketch sizes disagree")
        cond = torch.cat([image, sketch], dim=1)
        x = cond
        feats = []
        for stage in self.stages:
            x = stage(x, resize_to(cond, x.shape[-2:]))
            feats.append(x)
            x = F.avg_pool2d(x, self.cfg.downsample)
        pooled = x.mean(dim=(2, 3))
        logit = self.real_head(pooled).squeeze(1)
        classes = self.class_head(pooled)
        if return_features:
            return logit, classes, feats
        return logit, classes


class BackgroundDiscriminator(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        stem_ch = cfg.base_channels
        self.stem = nn.Conv2d(cfg.out_channels, stem_ch, 3, padding=1)
        self.text = TextEncoder(cfg.vocab_size, cfg.embed_dim,
                                cfg.text_hidden, cfg.lstm_steps)
        self.fuse = RMIFuse(stem_ch, cfg.text_hidden, cfg.mlstm_cell,
                            stem_ch, cfg.lstm_steps)
        self.stages = nn.ModuleList()
        prev = stem_ch
        for k in range(cfg.bg_disc_blocks):
            ch = cfg.stage_channels(k)
            self.stages.append(nn.Conv2d(prev, ch, 3, stride=cfg.downsample,
                                         padding=1))
            prev = ch
        self.head = nn.Linear(prev, 1)

    def forward(self, image, tokens):
        words = self.text(tokens)
        x = F.leaky_relu(self.stem(image), LEAK)
        x = self.fuse(x, words)
        for conv in self.stages:
            x = F.leaky_relu(conv(x), LEAK)
        return self.head(x.mean(dim=(2, 3))).squeeze(1)
