"""Trainable image -> keypoint-response-map estimator and its training loop."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from posereid.pose.keypoints import (
    NUM_KEYPOINTS,
    PoseMap,
    default_sigma,
    render_pose_map,
)


def _gn(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(min(4, channels), channels)


class PoseEstimator(nn.Module):
    """Small conv encoder + transposed-conv head regressing 20 response channels.

    Input: (B, 3, H, W) images in [0, 1]. Output: (B, 20, H, W) in [0, 1]
    (sigmoid head). The estimator is treated as a frozen measurement device
    after pretraining; `estimate` refuses to run untrained.
    """

    def __init__(self, num_maps: int = NUM_KEYPOINTS, base: int = 32):
        super().__init__()
        self.num_maps = num_maps
        self.base = base
        b = base
        # The dilated refinement convs widen the receptive field to most of the
        # frame; telling apart mirror-symmetric keypoints (left vs right roof
        # corner) needs that much context, local texture alone cannot.
        self.encoder = nn.Sequential(
            nn.Conv2d(3, b, 3, stride=2, padding=1), _gn(b), nn.ReLU(inplace=True),
            nn.Conv2d(b, 2 * b, 3, stride=2, padding=1), _gn(2 * b), nn.ReLU(inplace=True),
            nn.Conv2d(2 * b, 2 * b, 3, stride=1, padding=2, dilation=2), _gn(2 * b), nn.ReLU(inplace=True),
            nn.Conv2d(2 * b, 2 * b, 3, stride=1, padding=4, dilation=4), _gn(2 * b), nn.ReLU(inplace=True),
        )
        self.head = nn.Sequential(
            nn.ConvTranspose2d(2 * b, b, 4, stride=2, padding=1), _gn(b), nn.ReLU(inplace=True),
            nn.ConvTranspose2d(b, b, 4, stride=2, padding=1), _gn(b), nn.ReLU(inplace=True),
            nn.Conv2d(b, num_maps, 3, padding=1),
            nn.Sigmoid(),
        )
        self.is_trained = False

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if images.dim() != 4 or images.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) input, got {tuple(images.shape)}")
        return self.head(self.encoder(images))

    def estimate(self, image: np.ndarray, sigma: float | None = None) -> PoseMap:
        """Estimate the pose map of one (H, W, 3) image in [0, 1]."""
        if not self.is_trained:
            raise RuntimeError("pose estimator has not been pretrained; train or load a checkpoint")
        x = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32))
        x = x.permute(2, 0, 1).unsqueeze(0)
        with torch.no_grad():
            maps = self.forward(x)[0].numpy()
        if sigma is None:
            sigma = default_sigma(image.shape[0])
        return PoseMap(maps=maps, sigma=float(sigma))

    def arch_hash(self) -> str:
        spec = repr(self) + str([tuple(p.shape) for p in self.parameters()])
        return hashlib.sha256(spec.encode()).hexdigest()[:16]


@dataclass
class PoseTrainConfig:
    steps: int = 3500
    batch_size: int = 8
    lr: float = 2e-3
    seed: int = 0
    sigma: float | None = None  # None -> default_sigma(resolution)
    base: int = 32
    # Response maps are almost entirely background, so plain MSE is happy to
    # predict zeros everywhere; weighting each pixel by 1 + peak_weight * y
    # makes the few peak pixels count enough that the head must commit.
    peak_weight: float = 100.0


def _load_training_arrays(manifest, sigma):
    """Images as (N, 3, H, W) float32 in [0, 1] plus rendered target maps."""
    from posereid.synthdata.dataset import load_image

    images, targets = [], []
    for entry in manifest.entries:
        img = load_image(manifest, entry)
        h, w = img.shape[:2]
        images.append(np.transpose(img, (2, 0, 1)))
        targets.append(render_pose_map(entry.keypoints, h, w, sigma).maps)
    return np.stack(images), np.stack(targets)


def train_pose_estimator(manifest, config: PoseTrainConfig | None = None):
    """Fit the estimator to ground-truth response maps with Adam on MSE.

    Returns (model, history) where history is a list of per-step loss floats.
    """
    if config is None:
        config = PoseTrainConfig()
    if len(manifest.entries) == 0:
        raise ValueError("manifest has no entries")
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    sigma = config.sigma
    # Peek at the first image to fix resolution/sigma.
    from posereid.synthdata.dataset import load_image

    first = load_image(manifest, manifest.entries[0])
    resolution = first.shape[0]
    if sigma is None:
        sigma = default_sigma(resolution)

    images, targets = _load_training_arrays(manifest, sigma)
    model = PoseEstimator(base=config.base)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    n = len(images)
    history = []
    for step in range(config.steps):
        idx = rng.integers(0, n, size=min(config.batch_size, n))
        x = torch.from_numpy(images[idx])
        y = torch.from_numpy(targets[idx])
        pred = model(x)
        loss = torch.mean((1.0 + config.peak_weight * y) * (pred - y) ** 2)
        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append(float(loss.detach()))
    model.is_trained = True
    model.eval()
    model.train_sigma = float(sigma)
    model.train_resolution = int(resolution)
    return model, history


def save_pose_estimator(model: PoseEstimator, path) -> None:
    payload = {
        "state_dict": model.state_dict(),
        "config": {
            "num_maps": model.num_maps,
            "base": model.base,
            "sigma": getattr(model, "train_sigma", None),
            "resolution": getattr(model, "train_resolution", None),
            "arch_hash": model.arch_hash(),
        },
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_pose_estimator(path) -> tuple[PoseEstimator, dict]:
    """Returns (model in eval mode, checkpoint metadata dict)."""
    payload = torch.load(path, map_location="cpu", weights_only=True)
    cfg = payload["config"]
    model = PoseEstimator(num_maps=cfg["num_maps"], base=cfg["base"])
    if cfg.get("arch_hash") and cfg["arch_hash"] != model.arch_hash():
        raise RuntimeError("checkpoint architecture does not match this build")
    model.load_state_dict(payload["state_dict"])
    model.is_trained = True
    if cfg.get("sigma") is not None:
        model.train_sigma = cfg["sigma"]
    if cfg.get("resolution") is not None:
        model.train_resolution = cfg["resolution"]
    model.eval()
    return model, cfg
