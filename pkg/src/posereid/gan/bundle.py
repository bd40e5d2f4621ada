"""Synthesis forward pass: generate, then regenerate back to the source pose.

The reconstruction reuses the SAME generator for both hops, so one set of
weights learns transfer and inversion at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch

from posereid.gan.networks import Generator


def to_signed(images: torch.Tensor) -> torch.Tensor:
    """[0, 1] -> [-1, 1]."""
    return images * 2.0 - 1.0


def to_unit(images: torch.Tensor) -> torch.Tensor:
    """[-1, 1] -> [0, 1]."""
    return (images + 1.0) / 2.0


@dataclass
class SynthBundle:
    """Every tensor one training step's losses consume.

    Images are (B, 3, H, W) in [-1, 1]; pose maps are (B, 20, H, W) in [0, 1].
    ``target`` is the identity whose pose is transferred to. In paired mode it
    shares the original's identity; in unpaired mode it is a different vehicle
    of the same category and only the adversarial terms may read its pixels.
    """

    original: torch.Tensor        # I_o
    pose_t: torch.Tensor          # P_t
    pose_o: torch.Tensor          # P_o
    synthetic: torch.Tensor       # I_o^t = G(I_o, P_t)
    reconstructed: torch.Tensor   # I_o^o = G(I_o^t, P_o)
    target: Optional[torch.Tensor] = None  # I_t

    def require_target(self, why: str) -> torch.Tensor:
        if self.target is None:
            raise RuntimeError(f"bundle has no target image, but {why} needs one")
        return self.target


def generate(generator: Generator, image: torch.Tensor, pose: torch.Tensor) -> torch.Tensor:
    """One pose-transfer hop; output in [-1, 1], differentiable."""
    return generator(image, pose)


def autoreconstruct(
    generator: Generator,
    original: torch.Tensor,
    pose_t: torch.Tensor,
    pose_o: torch.Tensor,
    target: Optional[torch.Tensor] = None,
) -> SynthBundle:
    """Run both generator hops and collect the results.

    Gradients flow through both hops to the shared generator parameters.
    """
    synthetic = generate(generator, original, pose_t)
    reconstructed = generate(generator, synthetic, pose_o)
    return SynthBundle(
        original=original,
        pose_t=pose_t,
        pose_o=pose_o,
        synthetic=synthetic,
        reconstructed=reconstructed,
        target=target,
    )
