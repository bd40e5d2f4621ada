"""Loss terms for the synthesis GAN: adversarial, pose, identity, and pixel."""

from posereid.losses.weights import (
    LossReport,
    LossWeights,
    supervised_weights,
    unsupervised_weights,
)
from posereid.losses.extractor import PerceptualExtractor
from posereid.losses.terms import (
    AdversarialTerms,
    adv_losses,
    content_loss,
    gram,
    perceptual_loss,
    pose_loss,
    reconstruction_loss,
    style_loss,
    total_loss,
)

__all__ = [
    "AdversarialTerms",
    "LossReport",
    "LossWeights",
    "PerceptualExtractor",
    "adv_losses",
    "content_loss",
    "gram",
    "perceptual_loss",
    "pose_loss",
    "reconstruction_loss",
    "style_loss",
    "supervised_weights",
    "total_loss",
    "unsupervised_weights",
]
