"""Dataset generation, manifest serialization, and image loading.

Layout on disk::

    <root>/images/<identity>_<pose>.png
    <root>/manifest_train.json
    <root>/manifest_test_query.json
    <root>/manifest_test_gallery.json

Manifests are JSON documents ``{"entries": [...]}`` where each entry carries
the image file name (relative to the root), identity, pose, category, and the
20 keypoints as ``[x, y, visible]`` rows in pixel coordinates, origin at the
top-left.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from posereid.pose.keypoints import Keypoints
from posereid.synthdata.vehicles import (
    DEFAULT_NUM_POSES,
    CATEGORIES,
    RenderedSample,
    make_vehicle_specs,
    render_vehicle,
)

SPLITS = ("train", "test_query", "test_gallery")


@dataclass(frozen=True)
class ManifestEntry:
    file: str
    identity_id: int
    pose_id: int
    category: str
    keypoints: Keypoints

    def to_json(self) -> dict:
        return {
            "file": self.file,
            "identity_id": self.identity_id,
            "pose_id": self.pose_id,
            "category": self.category,
            "keypoints": self.keypoints.to_list(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ManifestEntry":
        return cls(
            file=str(obj["file"]),
            identity_id=int(obj["identity_id"]),
            pose_id=int(obj["pose_id"]),
            category=str(obj["category"]),
            keypoints=Keypoints.from_list(obj["keypoints"]),
        )


@dataclass
class DatasetManifest:
    """One split of the generated dataset."""

    root_path: str
    split: str
    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def identities(self) -> list[int]:
        return sorted({e.identity_id for e in self.entries})

    def by_identity(self) -> dict[int, list[ManifestEntry]]:
        groups: dict[int, list[ManifestEntry]] = {}
        for entry in self.entries:
            groups.setdefault(entry.identity_id, []).append(entry)
        return groups

    def by_category(self) -> dict[str, list[ManifestEntry]]:
        groups: dict[str, list[ManifestEntry]] = {}
        for entry in self.entries:
            groups.setdefault(entry.category, []).append(entry)
        return groups

    def image_path(self, entry: ManifestEntry) -> str:
        return os.path.join(self.root_path, entry.file)

    def save(self) -> str:
        path = os.path.join(self.root_path, f"manifest_{self.split}.json")
        doc = {"entries": [e.to_json() for e in self.entries]}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
        return path


def load_manifest(root_path: str, split: str) -> DatasetManifest:
    """Read ``<root>/manifest_<split>.json`` back into a manifest."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    path = os.path.join(root_path, f"manifest_{split}.json")
    with open(path) as fh:
        doc = json.load(fh)
    entries = [ManifestEntry.from_json(obj) for obj in doc["entries"]]
    return DatasetManifest(root_path=root_path, split=split, entries=entries)


def load_image(manifest: DatasetManifest, entry: ManifestEntry) -> np.ndarray:
    """Load an entry's PNG as (H, W, 3) float32 in [0, 1]."""
    with Image.open(manifest.image_path(entry)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0


def load_sample(manifest: DatasetManifest, entry: ManifestEntry) -> RenderedSample:
    return RenderedSample(
        image=load_image(manifest, entry),
        keypoints=entry.keypoints,
        identity_id=entry.identity_id,
        pose_id=entry.pose_id,
        category=entry.category,
    )


@dataclass(frozen=True)
class GenerationConfig:
    """Parameters for :func:`build_dataset`."""

    num_identities: int = 50
    num_poses: int = DEFAULT_NUM_POSES
    resolution: int = 64
    out_dir: str = "data"
    seed: int = 0
    train_fraction: float = 0.8  # of identities; the rest go to the test split

    def __post_init__(self):
        if self.num_identities < 1:
            raise ValueError("num_identities must be positive")
        if self.num_poses < 2:
            raise ValueError("num_poses must be >= 2")
        if not 0.0 <= self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in [0, 1]")


def _write_png(path: str, image: np.ndarray):
    data = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path)


def build_dataset(config: GenerationConfig) -> dict[str, DatasetManifest]:
    """Render the full identity x pose grid and write images plus manifests.

    Identities are split train/test disjointly (first ``train_fraction`` of
    them train, the rest test). Test images are further divided by viewpoint:
    the first half of the pose indices become the query split and the second
    half the gallery split, so query and gallery views of an identity never
    coincide.

    Returns the three manifests keyed by split name.
    """
    os.makedirs(os.path.join(config.out_dir, "images"), exist_ok=True)
    specs = make_vehicle_specs(config.num_identities, config.seed)

    num_train = round(config.train_fraction * config.num_identities)
    train_ids = {s.identity_id for s in specs[:num_train]}
    query_poses = set(range(config.num_poses // 2))

    manifests = {
        split: DatasetManifest(root_path=config.out_dir, split=split) for split in SPLITS
    }
    for spec in specs:
        for pose_id in range(config.num_poses):
            sample = render_vehicle(spec, pose_id, config.resolution, config.num_poses)
            rel = os.path.join("images", f"{spec.identity_id:04d}_{pose_id:02d}.png")
            _write_png(os.path.join(config.out_dir, rel), sample.image)
            entry = ManifestEntry(
                file=rel,
                identity_id=spec.identity_id,
                pose_id=pose_id,
                category=spec.category,
                keypoints=sample.keypoints,
            )
            if spec.identity_id in train_ids:
                manifests["train"].entries.append(entry)
            elif pose_id in query_poses:
                manifests["test_query"].entries.append(entry)
            else:
                manifests["test_gallery"].entries.append(entry)

    for manifest in manifests.values():
        manifest.save()
    return manifests


def category_histogram(manifest: DatasetManifest) -> dict[str, int]:
    counts = {c: 0 for c in CATEGORIES}
    for entry in manifest.entries:
        counts[entry.category] += 1
    return counts
