"""Per-category unified target poses and pose-unification synthesis.

Every vehicle category gets one fixed target viewpoint; at re-id time each
image is translated to its category's target pose by the frozen generator, so
gallery and query views stop disagreeing about viewpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from posereid.gan.bundle import to_signed, to_unit
from posereid.gan.networks import Generator
from posereid.pose.keypoints import Keypoints, default_sigma, render_pose_map
from posereid.synthdata.vehicles import (
    CATEGORIES,
    RenderedSample,
    VehicleSpec,
    render_vehicle,
)

DEFAULT_TABLE_POSE_ID = 1  # three-quarter view; most landmarks visible


@dataclass(frozen=True)
class UnifiedPoseTable:
    """category -> (target keypoints, rendered reference image)."""

    resolution: int
    keypoints: dict[str, Keypoints]
    references: dict[str, np.ndarray]

    def __post_init__(self):
        if set(self.keypoints) != set(CATEGORIES):
            missing = set(CATEGORIES) ^ set(self.keypoints)
            raise ValueError(f"pose table must cover every category; mismatch: {sorted(missing)}")

    def target(self, category: str) -> Keypoints:
        try:
            return self.keypoints[category]
        except KeyError:
            raise KeyError(f"unknown category {category!r}") from None


def build_pose_table(
    resolution: int,
    pose_id: int = DEFAULT_TABLE_POSE_ID,
    num_poses: int = 8,
) -> UnifiedPoseTable:
    """One canonical target pose per category.

    Renders a neutral exemplar of each category (zero shape offsets, gray
    body) at the chosen viewpoint; its exact keypoints become the category's
    unified target. Deterministic, so every caller agrees on the table.
    """
    keypoints: dict[str, Keypoints] = {}
    references: dict[str, np.ndarray] = {}
    gray = np.array([0.55, 0.55, 0.57])
    for index, category in enumerate(CATEGORIES):
        spec = VehicleSpec(index, category, np.zeros(4), gray)
        sample = render_vehicle(spec, pose_id, resolution, num_poses)
        keypoints[category] = sample.keypoints
        references[category] = sample.image
    return UnifiedPoseTable(resolution=resolution, keypoints=keypoints, references=references)


def _target_maps(
    categories: Sequence[str],
    table: UnifiedPoseTable,
    sigma: float,
) -> torch.Tensor:
    res = table.resolution
    cache: dict[str, torch.Tensor] = {}
    maps = []
    for category in categories:
        if category not in cache:
            pm = render_pose_map(table.target(category), res, res, sigma)
            cache[category] = torch.from_numpy(pm.maps)
        maps.append(cache[category])
    return torch.stack(maps)


def unify_pose_batch(
    images: torch.Tensor,
    categories: Sequence[str],
    table: UnifiedPoseTable,
    generator: Generator,
    sigma: Optional[float] = None,
) -> torch.Tensor:
    """Translate a [0, 1] image batch to each sample's category target pose.

    Returns [0, 1] images of the same shape. Callers wanting a frozen
    generator wrap this in ``torch.no_grad()``.
    """
    if images.shape[-1] != table.resolution or images.shape[-2] != table.resolution:
        raise ValueError(
            f"images are {tuple(images.shape[-2:])} but the pose table was built "
            f"at {table.resolution}"
        )
    if len(categories) != images.shape[0]:
        raise ValueError("one category per image required")
    if sigma is None:
        sigma = default_sigma(table.resolution)
    pose = _target_maps(categories, table, sigma).to(images.dtype)
    return to_unit(generator(to_signed(images), pose))


def unify_pose(
    sample: RenderedSample,
    table: UnifiedPoseTable,
    generator: Generator,
    sigma: Optional[float] = None,
) -> np.ndarray:
    """Single-sample convenience wrapper; returns (H, W, 3) in [0, 1]."""
    image = torch.from_numpy(np.ascontiguousarray(sample.image.transpose(2, 0, 1)))[None]
    with torch.no_grad():
        out = unify_pose_batch(image, [sample.category], table, generator, sigma=sigma)
    return out[0].permute(1, 2, 0).numpy()
