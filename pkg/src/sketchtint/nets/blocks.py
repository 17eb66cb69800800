"""Convolutional building blocks: the gated MRU, residual units, and
plain conv stages. All three expose the same (x, extra) -> y interface
so the backbone is swappable by config.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

LEAK = 0.2


def act(x):
    return F.leaky_relu(x, LEAK)


class MRUBlock(nn.Module):
    """Gated update re-injecting a resized copy of the network input.

    m = sigmoid(conv([x, img]))            mask on the incoming state
    z = act(norm(conv([m * x, img])))      candidate features
    n = sigmoid(conv([x, img]))            output mix gate
    y = (1 - n) * proj(x) + n * z

    Spatial size is preserved; resampling happens outside the block.
    """

    def __init__(self, in_ch: int, out_ch: int, img_ch: int, norm: bool = True):
        super().__init__()
        self.in_ch = in_ch
        self.img_ch = img_ch
        self.conv_m = nn.Conv2d(in_ch + img_ch, in_ch, 3, padding=1)
        self.conv_z = nn.Conv2d(in_ch + img_ch, out_ch, 3, padding=1)
        self.conv_n = nn.Conv2d(in_ch + img_ch, out_ch, 3, padding=1)
        self.proj = nn.Conv2d(in_ch, out_ch, 1)
        self.norm = nn.InstanceNorm2d(out_ch, affine=True) if norm else None

    def forward(self, x, img):
        if x.shape[-2:] != img.shape[-2:]:
            raise ValueError(
                f"feature map {tuple(x.shape[-2:])} and image "
                f"{tuple(img.shape[-2:])} are not aligned"
            )
        xi = torch.cat([x, img], dim=1)
        m = torch.sigmoid(self.conv_m(xi))
        z = self.conv_z(torch.cat([m * x, img], dim=1))
        if self.norm is not None:
            z = self.norm(z)
        z = act(z)
        n = torch.sigmoid(self.conv_n(xi))
        return (1.0 - n) * self.proj(x) + n * z


class ResidualUnit(nn.Module):
    """Pre-activation residual unit, channel-preserving.

    With the second convolution zeroed the unit is an exact identity,
    which the tests use as the algebraic anchor.
    """

    def __init__(self, ch: int, norm: bool = True):
        super().__init__()
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
        if norm:
            self.norm1 = nn.InstanceNorm2d(ch, affine=True)
            self.norm2 = nn.InstanceNorm2d(ch, affine=True)
        else:
            self.norm1 = self.norm2 = None

    def forward(self, x):
        h = x
        if self.norm1 is not None:
            h = self.norm1(h)
        h = self.conv1(act(h))
        if self.norm2 is not None:
            h = self.norm2(h)
        h = self.conv2(act(h))
        return x + h


class ResidualStage(nn.Module):
    """Channel transition followed by n residual units; (x, extra) API."""

    def __init__(self, in_ch: int, out_ch: int, img_ch: int, units: int,
                 norm: bool = True):
        super().__init__()
        self.entry = nn.Conv2d(in_ch + img_ch, out_ch, 3, padding=1)
        self.units = nn.ModuleList(ResidualUnit(out_ch, norm=norm)
                                   for _ in range(units))

    def forward(self, x, img):
        if x.shape[-2:] != img.shape[-2:]:
            raise ValueError("feature map and image are not aligned")
        h = act(self.entry(torch.cat([x, img], dim=1)))
        for unit in self.units:
            h = unit(h)
        return h


class ConvStage(nn.Module):
    """Single conv stage, the ablation backbone; (x, extra) API."""

    def __init__(self, in_ch: int, out_ch: int, img_ch: int, norm: bool = True):
        super().__init__()
        self.conv = nn.Conv2d(in_ch + img_ch, out_ch, 3, padding=1)
        self.norm = nn.InstanceNorm2d(out_ch, affine=True) if norm else None

    def forward(self, x, img):
        if x.shape[-2:] != img.shape[-2:]:
            raise ValueError("feature map and image are not aligned")
        h = self.conv(torch.cat([x, img], dim=1))
        if self.norm is not None:
            h = self.norm(h)
        return act(h)


def make_stage(backbone: str, in_ch: int, out_ch: int, img_ch: int,
               units: int = 1, norm: bool = True) -> nn.Module:
    if backbone == "mru":
        return MRUBlock(in_ch, out_ch, img_ch, norm=norm)
    if backbone == "residual":
        return ResidualStage(in_ch, out_ch, img_ch, units, norm=norm)
    if backbone == "conv":
        return ConvStage(in_ch, out_ch, img_ch, norm=norm)
    raise ValueError(f"unknown backbone {backbone!r}")


def resize_to(img, size_hw):
    """Deterministic area downsample / nearest upsample of the raw input."""
    if img.shape[-2:] == tuple(size_hw):
        return img
    if img.shape[-2] >= size_hw[0]:
        return F.interpolate(img, size=tuple(size_hw), mode="area")
    return F.interpolate(img, size=tuple(size_hw), mode="nearest")
