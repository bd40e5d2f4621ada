"""Fixed random-feature extractor with four tapped layers.

A small conv stack stands in for a pretrained backbone: four stages of
channels (16, 32, 64, 128) with a stride-2 transition between taps, so tap j
has resolution H / 2^(j-1). Weights are drawn once from a seeded generator
and frozen; random convolutional features preserve the geometry the style,
perceptual, and content losses depend on while staying deterministic and
cheap.

Inputs are expected in [0, 1]; callers holding [-1, 1] images denormalize
first.
"""

from __future__ import annotations

import torch
from torch import nn

_STAGE_CHANNELS = (16, 32, 64, 128)


class PerceptualExtractor(nn.Module):
    def __init__(self, seed: int = 0, channels: tuple[int, ...] = _STAGE_CHANNELS):
        super().__init__()
        if len(channels) < 1:
            raise ValueError("need at least one stage")
        self.channels = tuple(channels)
        gen = torch.Generator().manual_seed(seed)
        stages = []
        in_ch = 3
        for j, out_ch in enumerate(self.channels):
            stride = 1 if j == 0 else 2
            conv1 = nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=stride, padding=1)
            conv2 = nn.Conv2d(out_ch, out_ch, kernel_size=3, padding=1)
            for conv in (conv1, conv2):
                nn.init.kaiming_normal_(conv.weight, nonlinearity="relu", generator=gen)
                nn.init.zeros_(conv.bias)
            stages.append(nn.Sequential(conv1, nn.ReLU(), conv2, nn.ReLU()))
            in_ch = out_ch
        self.stages = nn.ModuleList(stages)
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)

    @property
    def num_taps(self) -> int:
        return len(self.stages)

    def train(self, mode: bool = True):
        # Permanently frozen; ignore train() so no caller can flip dropout/BN
        # semantics or gradients back on by accident.
        return super().train(False)

    def forward(self, images: torch.Tensor) -> list[torch.Tensor]:
        """Returns the tap activations, shallowest first."""
        if images.dim() != 4 or images.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) input, got {tuple(images.shape)}")
        taps = []
        x = images
        for stage in self.stages:
            x = stage(x)
            taps.append(x)
        return taps
