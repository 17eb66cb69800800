"""Loss terms for both colorization stages.

Generator: non-saturating GAN + auxiliary classification + L1 +
perceptual (L1 on discriminator stage-3 features) + diversity.
Discriminator: GAN + auxiliary classification on real images.
The background configuration keeps only GAN and L1.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .config import LossWeights

DIV_EPS = 1e-8


def _require(terms, **tensors):
    for name, value in tensors.items():
        if value is None:
            raise ValueError(f"loss term {terms!r} is enabled but {name} is missing")


def gan_loss_g(fake_logits):
    return F.binary_cross_entropy_with_logits(
        fake_logits, torch.ones_like(fake_logits))


def gan_loss_d(real_logits, fake_logits):
    return (
        F.binary_cross_entropy_with_logits(
            real_logits, torch.ones_like(real_logits))
        + F.binary_cross_entropy_with_logits(
            fake_logits, torch.zeros_like(fake_logits))
    )


def ac_loss(class_logits, labels):
    return F.cross_entropy(class_logits, labels)


def l1_loss(generated, target):
    return (generated - target).abs().mean()


def perceptual_loss(feat_fake, feat_real):
    return (feat_fake - feat_real).abs().mean()


def diversity_loss(pair, noise_pair, clip):
    """Negative output spread per unit of noise spread, clipped.

    Identical outputs give the maximal penalty (0 spread, loss 0 is the
    term's maximum since the term is negative elsewhere).
    """
    y1, y2 = pair
    z1, z2 = noise_pair
    ratio = (y1 - y2).abs().mean() / ((z1 - z2).abs().mean() + DIV_EPS)
    return -torch.clamp(ratio, max=clip)


def generator_loss(weights: LossWeights, *, fake_logits=None, class_logits=None,
                   labels=None, generated=None, target=None, perc_fake=None,
                   perc_real=None, pair=None, noise_pair=None):
    """Weighted sum of the enabled generator terms.

    Returns (total, {term name: float}); the map holds exactly the
    enabled terms.
    """
    terms = {}
    total = None
    if weights.gan > 0:
        _require("gan", fake_logits=fake_logits)
        terms["gan"] = gan_loss_g(fake_logits)
    if weights.ac > 0:
        _require("ac", class_logits=class_logits, labels=labels)
        terms["ac"] = ac_loss(class_logits, labels)
    if weights.l1 > 0:
        _require("l1", generated=generated, target=target)
        terms["l1"] = l1_loss(generated, target)
    if weights.perc > 0:
        _require("perc", perc_fake=perc_fake, perc_real=perc_real)
        terms["perc"] = perceptual_loss(perc_fake, perc_real)
    if weights.div > 0:
        _require("div", pair=pair, noise_pair=noise_pair)
        terms["div"] = diversity_loss(pair, noise_pair, weights.div_clip)
    if not terms:
        raise ValueError("no generator loss terms enabled")
    for name, value in terms.items():
        weighted = getattr(weights, name) * value
        total = weighted if total is None else total + weighted
    return total, {k: float(v.detach()) for k, v in terms.items()}


def discriminator_loss(weights: LossWeights, *, real_logits=None,
                       fake_logits=None, class_logits_real=None, labels=None):
    """Weighted sum of the discriminator terms (GAN, and AC on reals)."""
    terms = {}
    total = None
    if weights.gan > 0:
        _require("gan", real_logits=real_logits, fake_logits=fake_logits)
        terms["gan"] = gan_loss_d(real_logits, fake_logits)
    if weights.ac > 0:
        _require("ac", class_logits_real=class_logits_real, labels=labels)
        terms["ac"] = ac_loss(class_logits_real, labels)
    if not terms:
        raise ValueError("no discriminator loss terms enabled")
    for name, value in terms.items():
        weighted = getattr(weights, name) * value
        total = weighted if total is None else total + weighted
    return total, {k: float(v.detach()) for k, v in terms.items()}
