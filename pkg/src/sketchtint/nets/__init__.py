"""Neural building blocks of the colorization networks."""

from .blocks import ConvStage, MRUBlock, ResidualStage, ResidualUnit, make_stage, resize_to
from .checkpoint import load_checkpoint, save_checkpoint
from .config import LossWeights, NetConfig, config_digest
from .discriminators import BackgroundDiscriminator, ObjectDiscriminator
from .fusion import PAD_ID, UNK_ID, RMIFuse, TextEncoder, Vocabulary, coord_map
from .generators import Generator, background_generator, object_generator
from .losses import (
    diversity_loss,
    discriminator_loss,
    gan_loss_d,
    gan_loss_g,
    generator_loss,
    l1_loss,
    perceptual_loss,
)

__all__ = [
    "ConvStage", "MRUBlock", "ResidualStage", "ResidualUnit", "make_stage",
    "resize_to", "load_checkpoint", "save_checkpoint", "LossWeights",
    "NetConfig", "config_digest", "BackgroundDiscriminator",
    "ObjectDiscriminator", "PAD_ID", "UNK_ID", "RMIFuse", "TextEncoder",
    "Vocabulary", "coord_map", "Generator", "background_generator",
    "object_generator", "diversity_loss", "discriminator_loss", "gan_loss_d",
    "gan_loss_g", "generator_loss", "l1_loss", "perceptual_loss",
]
