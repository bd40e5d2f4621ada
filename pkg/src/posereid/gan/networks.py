"""Generator and discriminator architectures.

The generator is a residual encoder-decoder: it takes the channel-wise
concatenation of a 3-channel image and a 20-channel pose map, downsamples with
strided convs, applies residual blocks, upsamples back, and ends in tanh so
outputs always live in [-1, 1]. Discriminators are patch classifiers emitting
a grid of real/fake logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from posereid.errors import ConfigError
from posereid.pose.keypoints import NUM_KEYPOINTS

IMAGE_CHANNELS = 3


@dataclass(frozen=True)
class GeneratorConfig:
    image_resolution: int = 64
    base_channels: int = 16
    num_downsamples: int = 2
    num_residual_blocks: int = 4

    def __post_init__(self):
        res = self.image_resolution
        if res < 32 or res & (res - 1) != 0:
            raise ConfigError(f"image_resolution must be a power of two >= 32, got {res}")
        if self.num_downsamples < 1:
            raise ConfigError("num_downsamples must be >= 1")
        if res >> self.num_downsamples < 4:
            raise ConfigError("too many downsamples for this resolution")
        if self.base_channels < 1 or self.num_residual_blocks < 0:
            raise ConfigError("base_channels must be >= 1 and num_residual_blocks >= 0")


def _norm(channels: int) -> nn.Module:
    return nn.InstanceNorm2d(channels)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, kernel_size=3),
            _norm(channels),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, kernel_size=3),
            _norm(channels),
        )

    def forward(self, x):
        return x + self.block(x)


class Generator(nn.Module):
    """Image + pose-map -> image, bounded to [-1, 1] by the final tanh."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        ch = config.base_channels
        layers: list[nn.Module] = [
            nn.ReflectionPad2d(3),
            nn.Conv2d(IMAGE_CHANNELS + NUM_KEYPOINTS, ch, kernel_size=7),
            _norm(ch),
            nn.ReLU(inplace=True),
        ]
        for _ in range(config.num_downsamples):
            layers += [
                nn.Conv2d(ch, ch * 2, kernel_size=3, stride=2, padding=1),
                _norm(ch * 2),
                nn.ReLU(inplace=True),
            ]
            ch *= 2
        layers += [ResidualBlock(ch) for _ in range(config.num_residual_blocks)]
        for _ in range(config.num_downsamples):
            layers += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(ch, ch // 2, kernel_size=3, padding=1),
                _norm(ch // 2),
                nn.ReLU(inplace=True),
            ]
            ch //= 2
        layers += [
            nn.ReflectionPad2d(3),
            nn.Conv2d(ch, IMAGE_CHANNELS, kernel_size=7),
            nn.Tanh(),
        ]
        self.net = nn.Sequential(*layers)

    def forward(self, image: torch.Tensor, pose: torch.Tensor) -> torch.Tensor:
        if image.dim() != 4 or pose.dim() != 4:
            raise ValueError("expected batched (B, C, H, W) inputs")
        if image.shape[-2:] != pose.shape[-2:]:
            raise ValueError(
                f"image {tuple(image.shape[-2:])} and pose {tuple(pose.shape[-2:])} "
                "spatial dims differ"
            )
        return self.net(torch.cat([image, pose], dim=1))


@dataclass
class DiscriminatorOutput:
    """Patch logits from one discriminator forward."""

    logits: torch.Tensor


class PatchDiscriminator(nn.Module):
    """PatchGAN-style classifier: image -> grid of real/fake logits."""

    def __init__(self, base_channels: int = 16, num_layers: int = 3):
        super().__init__()
        if num_layers < 1:
            raise ConfigError("num_layers must be >= 1")
        ch = base_channels
        layers: list[nn.Module] = [
            nn.Conv2d(IMAGE_CHANNELS, ch, kernel_size=4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        ]
        for i in range(1, num_layers):
            stride = 2 if i < num_layers - 1 else 1
            layers += [
                nn.Conv2d(ch, ch * 2, kernel_size=4, stride=stride, padding=1),
                _norm(ch * 2),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            ch *= 2
        layers.append(nn.Conv2d(ch, 1, kernel_size=4, stride=1, padding=1))
        self.net = nn.Sequential(*layers)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() != 4 or image.shape[1] != IMAGE_CHANNELS:
            raise ValueError(f"expected (B, 3, H, W) input, got {tuple(image.shape)}")
        return self.net(image)


def discriminate(d: PatchDiscriminator, image: torch.Tensor) -> DiscriminatorOutput:
    logits = d(image)
    if not torch.isfinite(logits).all():
        raise RuntimeError("discriminator produced non-finite logits")
    return DiscriminatorOutput(logits=logits)
