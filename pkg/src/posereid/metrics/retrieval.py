"""mAP and CMC over a query/gallery distance matrix."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass
class RetrievalResult:
    map: float
    cmc: dict[int, float]
    num_queries: int
    num_gallery: int
    skipped_queries: int = 0
    per_query_ap: list[float] = field(default_factory=list)


def cmc_map(
    distance_matrix: np.ndarray,
    query_ids,
    gallery_ids,
    ranks: tuple[int, ...] = (1, 5),
) -> RetrievalResult:
    """Average precision and cumulative match rates.

    The gallery is sorted per query by ascending distance with ties broken by
    gallery index. AP is the mean of precision values at each true-positive
    rank. Queries with no same-id gallery entry are skipped with a warning and
    counted in the result. CMC@k with k larger than the gallery is evaluated
    at the gallery size.
    """
    dist = np.asarray(distance_matrix, dtype=np.float64)
    q_ids = np.asarray(query_ids)
    g_ids = np.asarray(gallery_ids)
    if dist.ndim != 2 or dist.shape != (q_ids.size, g_ids.size):
        raise ValueError(
            f"distance matrix {dist.shape} does not match {q_ids.size} queries "
            f"x {g_ids.size} gallery entries"
        )
    if q_ids.size < 1 or g_ids.size < 1:
        raise ValueError("need at least one query and one gallery entry")
    if any(r < 1 for r in ranks):
        raise ValueError("ranks must be positive")

    aps = []
    hits_at = {r: 0 for r in ranks}
    skipped = 0
    for qi in range(q_ids.size):
        matches = g_ids == q_ids[qi]
        if not matches.any():
            skipped += 1
            continue
        order = np.argsort(dist[qi], kind="stable")
        hit = matches[order]
        true_ranks = np.flatnonzero(hit)  # 0-based positions of true matches
        precisions = (np.arange(true_ranks.size) + 1) / (true_ranks + 1)
        aps.append(float(precisions.mean()))
        for r in ranks:
            if hit[: min(r, g_ids.size)].any():
                hits_at[r] += 1

    if skipped:
        warnings.warn(f"skipped {skipped} queries with no gallery match", stacklevel=2)
    if not aps:
        raise ValueError("every query lacked a gallery match")
    evaluated = q_ids.size - skipped
    return RetrievalResult(
        map=float(np.mean(aps)),
        cmc={r: hits_at[r] / evaluated for r in ranks},
        num_queries=evaluated,
        num_gallery=int(g_ids.size),
        skipped_queries=skipped,
        per_query_ap=aps,
    )
