"""Re-ID backbones and feature extraction.

Two backbones of identical architecture but independent weights embed the
real image (M_R) and its pose-unified synthetic counterpart (M_S). The last
conv stage runs at stride 1 so the feature map keeps spatial detail before
global average pooling.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from posereid.gan.networks import Generator
from posereid.reid.unified import UnifiedPoseTable, unify_pose_batch
from posereid.synthdata.vehicles import RenderedSample


class ReidBackbone(nn.Module):
    """Conv embedder + identity classifier head.

    ``class_ids`` fixes the identity -> class-index mapping for the
    cross-entropy head, so checkpoints stay consistent across runs.
    """

    def __init__(
        self,
        class_ids: Sequence[int],
        feature_dim: int = 128,
        base_channels: int = 16,
    ):
        super().__init__()
        if len(class_ids) != len(set(class_ids)):
            raise ValueError("class_ids must be unique")
        self.class_ids = [int(c) for c in class_ids]
        self._class_index = {c: i for i, c in enumerate(self.class_ids)}
        self.feature_dim = feature_dim

        ch = base_channels
        stages = [
            nn.Sequential(
                nn.Conv2d(3, ch, 3, stride=1, padding=1),
                nn.BatchNorm2d(ch),
                nn.ReLU(inplace=True),
            )
        ]
        for stride in (2, 2, 2, 1):  # final stage keeps stride 1
            stages.append(
                nn.Sequential(
                    nn.Conv2d(ch, ch * 2, 3, stride=stride, padding=1),
                    nn.BatchNorm2d(ch * 2),
                    nn.ReLU(inplace=True),
                )
            )
            ch *= 2
        self.stages = nn.Sequential(*stages)
        self.project = nn.Conv2d(ch, feature_dim, kernel_size=1)
        self.classifier = nn.Linear(feature_dim, len(self.class_ids))

    def label_index(self, identity_ids: Sequence[int]) -> torch.Tensor:
        try:
            return torch.tensor([self._class_index[int(i)] for i in identity_ids])
        except KeyError as exc:
            raise KeyError(f"identity {exc.args[0]} not in this model's class table") from exc

    def embed(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) in [0, 1] -> (B, feature_dim)."""
        x = self.project(self.stages(images))
        return x.mean(dim=(2, 3))

    def forward(self, images: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        features = self.embed(images)
        return features, self.classifier(features)


class ReidFeatures:
    """Batched (f_r, f_s, f_c) with f_c = [f_r | f_s] by construction."""

    def __init__(self, f_r: torch.Tensor, f_s: torch.Tensor):
        if f_r.shape != f_s.shape:
            raise ValueError("f_r and f_s must share a shape")
        self.f_r = f_r
        self.f_s = f_s
        self.f_c = torch.cat([f_r, f_s], dim=1)


def batch_to_tensors(batch: Sequence[RenderedSample]) -> tuple[torch.Tensor, list[str], list[int]]:
    """Stack samples into a (B, 3, H, W) [0, 1] tensor plus categories and ids."""
    images = torch.stack([
        torch.from_numpy(np.ascontiguousarray(s.image.transpose(2, 0, 1))) for s in batch
    ])
    return images, [s.category for s in batch], [s.identity_id for s in batch]


def extract_features(
    batch: Sequence[RenderedSample],
    m_r: ReidBackbone,
    m_s: ReidBackbone,
    generator: Generator,
    table: UnifiedPoseTable,
    sigma: Optional[float] = None,
) -> ReidFeatures:
    """Embed real images with M_R and their pose-unified versions with M_S."""
    images, categories, _ = batch_to_tensors(batch)
    with torch.no_grad():
        unified = unify_pose_batch(images, categories, table, generator, sigma=sigma)
    return ReidFeatures(f_r=m_r.embed(images), f_s=m_s.embed(unified))
