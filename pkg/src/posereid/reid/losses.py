"""Batch-hard triplet loss and the four-term joint objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
import torch.nn.functional as F

from posereid.gan.networks import Generator
from posereid.reid.models import ReidBackbone, ReidFeatures, batch_to_tensors
from posereid.reid.unified import UnifiedPoseTable, unify_pose_batch
from posereid.synthdata.vehicles import RenderedSample

DEFAULT_MARGIN = 0.3


def triplet_loss(features: torch.Tensor, labels: torch.Tensor, margin: float = DEFAULT_MARGIN) -> torch.Tensor:
    """Batch-hard triplet loss with Euclidean distances.

    For each anchor, take its farthest positive and nearest negative and hinge
    their gap at ``margin``; mean over anchors. Anchors whose identity appears
    only once in the batch use distance 0 as the positive term.
    """
    if features.dim() != 2 or labels.dim() != 1 or len(features) != len(labels):
        raise ValueError("expected (B, d) features with (B,) labels")
    if labels.unique().numel() < 2:
        raise ValueError("triplet loss needs at least two identities in the batch")
    dist = torch.cdist(features, features)
    same = labels[:, None] == labels[None, :]
    eye = torch.eye(len(labels), dtype=torch.bool, device=features.device)
    pos = torch.where(same & ~eye, dist, dist.new_zeros(()))
    d_ap = pos.max(dim=1).values
    d_an = torch.where(~same, dist, dist.new_full((), torch.inf)).min(dim=1).values
    return F.relu(margin + d_ap - d_an).mean()


@dataclass
class JmlReport:
    """Components of one joint step: triplets and identity CEs on f_r and f_c."""

    l_tr: torch.Tensor
    l_idr: torch.Tensor
    l_tc: torch.Tensor
    l_idc: torch.Tensor
    total: torch.Tensor

    def scalars(self) -> dict[str, float]:
        return {
            k: float(getattr(self, k).detach())
            for k in ("l_tr", "l_idr", "l_tc", "l_idc", "total")
        }


def make_concat_head(m_r: ReidBackbone, m_s: ReidBackbone) -> torch.nn.Linear:
    """Classifier over the concatenated feature; its own parameters."""
    if m_r.feature_dim != m_s.feature_dim or m_r.class_ids != m_s.class_ids:
        raise ValueError("M_R and M_S must agree on feature_dim and class table")
    return torch.nn.Linear(2 * m_r.feature_dim, len(m_r.class_ids))


def jml_loss_from_tensors(
    images: torch.Tensor,
    real_inputs: torch.Tensor,
    categories: Sequence[str],
    labels: torch.Tensor,
    m_r: ReidBackbone,
    m_s: ReidBackbone,
    generator: Generator,
    table: UnifiedPoseTable,
    head_c: torch.nn.Linear,
    margin: float = DEFAULT_MARGIN,
    sigma: float | None = None,
) -> tuple[torch.Tensor, JmlReport]:
    """Tensor-level core of the joint objective.

    ``images`` feed pose unification (keep them un-augmented so the target
    pose survives); ``real_inputs`` feed M_R and may carry augmentation. Both
    are (B, 3, H, W) in [0, 1].
    """
    with torch.no_grad():
        unified = unify_pose_batch(images, categories, table, generator, sigma=sigma)

    f_r, logits_r = m_r(real_inputs)
    features = ReidFeatures(f_r=f_r, f_s=m_s.embed(unified))
    logits_c = head_c(features.f_c)

    l_tr = triplet_loss(features.f_r, labels, margin)
    l_idr = F.cross_entropy(logits_r, labels)
    l_tc = triplet_loss(features.f_c, labels, margin)
    l_idc = F.cross_entropy(logits_c, labels)
    total = l_tr + l_idr + l_tc + l_idc
    return total, JmlReport(l_tr=l_tr, l_idr=l_idr, l_tc=l_tc, l_idc=l_idc, total=total)


def jml_loss(
    batch: Sequence[RenderedSample],
    m_r: ReidBackbone,
    m_s: ReidBackbone,
    generator: Generator,
    table: UnifiedPoseTable,
    head_c: torch.nn.Linear,
    margin: float = DEFAULT_MARGIN,
    sigma: float | None = None,
) -> tuple[torch.Tensor, JmlReport]:
    """Unweighted sum: triplet(f_r) + CE(f_r) + triplet(f_c) + CE(f_c).

    The generator only synthesizes under ``no_grad``, so its parameters get no
    gradient from any of the four terms.
    """
    images, categories, identity_ids = batch_to_tensors(batch)
    labels = m_r.label_index(identity_ids)
    return jml_loss_from_tensors(
        images, images, categories, labels, m_r, m_s, generator, table, head_c,
        margin=margin, sigma=sigma,
    )
