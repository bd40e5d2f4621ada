"""Pose-conditioned generator, patch discriminators, and the synthesis bundle."""

from posereid.gan.networks import (
    DiscriminatorOutput,
    Generator,
    GeneratorConfig,
    PatchDiscriminator,
    discriminate,
)
from posereid.gan.bundle import (
    SynthBundle,
    autoreconstruct,
    generate,
    to_signed,
    to_unit,
)

__all__ = [
    "DiscriminatorOutput",
    "Generator",
    "GeneratorConfig",
    "PatchDiscriminator",
    "SynthBundle",
    "autoreconstruct",
    "discriminate",
    "generate",
    "to_signed",
    "to_unit",
]
