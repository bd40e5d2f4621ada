"""Distance computation and gallery ranking."""

from __future__ import annotations

import numpy as np
import torch

METRICS = ("euclidean", "cosine")


def _as_numpy(x) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        x = x.detach().cpu().numpy()
    return np.asarray(x, dtype=np.float64)


def rank_gallery(
    query_features,
    gallery_features,
    metric: str = "euclidean",
) -> tuple[np.ndarray, np.ndarray]:
    """Sort the gallery for every query by ascending distance.

    Returns (orderings, distances): orderings[q] holds gallery indices from
    best to worst; ties keep the lower gallery index first. Cosine distance is
    1 - cosine similarity.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    q = _as_numpy(query_features)
    g = _as_numpy(gallery_features)
    if q.ndim != 2 or g.ndim != 2 or q.shape[1] != g.shape[1]:
        raise ValueError(
            f"feature dims disagree: query {q.shape} vs gallery {g.shape}"
        )
    if metric == "euclidean":
        diff = q[:, None, :] - g[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
    else:
        qn = q / np.maximum(np.linalg.norm(q, axis=1, keepdims=True), 1e-12)
        gn = g / np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-12)
        dist = 1.0 - qn @ gn.T
    order = np.argsort(dist, axis=1, kind="stable")
    return order, dist
