"""Pair and batch samplers over dataset manifests.

All samplers take an explicit ``numpy.random.Generator`` so callers own the
randomness; there is no hidden global state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from posereid.errors import SamplingError
from posereid.synthdata.dataset import DatasetManifest, ManifestEntry, load_sample
from posereid.synthdata.vehicles import RenderedSample


@dataclass
class PairingStats:
    """Running tallies of what a pair sampler actually drew.

    Useful when checking that mining constraints (same identity / same
    category) hold in practice and that identities are hit roughly uniformly.
    """

    draws: int = 0
    identity_counts: dict[int, int] = field(default_factory=dict)
    same_identity: int = 0
    same_category: int = 0

    def record(self, original: ManifestEntry, target: ManifestEntry):
        self.draws += 1
        self.identity_counts[original.identity_id] = (
            self.identity_counts.get(original.identity_id, 0) + 1
        )
        if original.identity_id == target.identity_id:
            self.same_identity += 1
        if original.category == target.category:
            self.same_category += 1


def _pick(rng: np.random.Generator, items: list) -> object:
    return items[int(rng.integers(len(items)))]


def sample_pair_entries(
    manifest: DatasetManifest,
    mode: str,
    rng: np.random.Generator,
    stats: PairingStats | None = None,
) -> tuple[ManifestEntry, ManifestEntry]:
    """Draw (original, target) manifest entries without touching the disk.

    ``paired``: same identity, different pose. ``unpaired``: same category,
    different identity. Raises :class:`SamplingError` when the manifest admits
    no valid pair for the requested mode.
    """
    if mode not in ("paired", "unpaired"):
        raise ValueError(f"mode must be 'paired' or 'unpaired', got {mode!r}")
    if not manifest.entries:
        raise SamplingError(f"manifest {manifest.split!r} is empty")

    if mode == "paired":
        groups = [g for g in manifest.by_identity().values() if len(g) >= 2]
        if not groups:
            raise SamplingError("paired mode needs an identity with >= 2 samples")
        group = _pick(rng, groups)
        original = _pick(rng, group)
        others = [e for e in group if e.pose_id != original.pose_id]
        if not others:
            # Every sample of this identity shares one pose; look for any
            # identity offering at least two distinct poses.
            groups = [
                g for g in groups if len({e.pose_id for e in g}) >= 2
            ]
            if not groups:
                raise SamplingError("no identity has two distinct poses")
            group = _pick(rng, groups)
            original = _pick(rng, group)
            others = [e for e in group if e.pose_id != original.pose_id]
        target = _pick(rng, others)
    else:
        groups = [
            g
            for g in manifest.by_category().values()
            if len({e.identity_id for e in g}) >= 2
        ]
        if not groups:
            raise SamplingError("unpaired mode needs a category with >= 2 identities")
        group = _pick(rng, groups)
        original = _pick(rng, group)
        others = [e for e in group if e.identity_id != original.identity_id]
        target = _pick(rng, others)

    if stats is not None:
        stats.record(original, target)
    return original, target


def sample_pair(
    manifest: DatasetManifest,
    mode: str,
    rng: np.random.Generator,
    stats: PairingStats | None = None,
) -> tuple[RenderedSample, RenderedSample]:
    """Draw an (original, target) pair of loaded samples."""
    original, target = sample_pair_entries(manifest, mode, rng, stats)
    return load_sample(manifest, original), load_sample(manifest, target)


def sample_reid_batch_entries(
    manifest: DatasetManifest,
    num_ids: int,
    per_id: int,
    rng: np.random.Generator,
) -> list[ManifestEntry]:
    """PK sampling: ``num_ids`` distinct identities, ``per_id`` entries each.

    Identities with fewer than ``per_id`` samples are resampled with
    replacement so every batch has exactly ``num_ids * per_id`` entries.
    """
    if num_ids < 1 or per_id < 1:
        raise ValueError("num_ids and per_id must be positive")
    groups = manifest.by_identity()
    if len(groups) < num_ids:
        raise SamplingError(
            f"requested {num_ids} identities but manifest has {len(groups)}"
        )
    chosen = rng.choice(sorted(groups), size=num_ids, replace=False)
    batch = []
    for identity in chosen:
        group = groups[int(identity)]
        replace = len(group) < per_id
        idx = rng.choice(len(group), size=per_id, replace=replace)
        batch.extend(group[int(i)] for i in idx)
    return batch


def sample_reid_batch(
    manifest: DatasetManifest,
    num_ids: int,
    per_id: int,
    rng: np.random.Generator,
) -> list[RenderedSample]:
    entries = sample_reid_batch_entries(manifest, num_ids, per_id, rng)
    return [load_sample(manifest, e) for e in entries]
