"""Procedural toy-vehicle dataset: rendering, manifests, and batch sampling."""

from posereid.synthdata.vehicles import (
    CATEGORIES,
    KEYPOINT_NAMES,
    RenderedSample,
    VehicleSpec,
    make_vehicle_specs,
    render_silhouette,
    render_vehicle,
)
from posereid.synthdata.dataset import (
    DatasetManifest,
    GenerationConfig,
    ManifestEntry,
    build_dataset,
    load_image,
    load_manifest,
    load_sample,
)
from posereid.synthdata.sampling import (
    PairingStats,
    sample_pair,
    sample_pair_entries,
    sample_reid_batch,
    sample_reid_batch_entries,
)

__all__ = [
    "CATEGORIES",
    "KEYPOINT_NAMES",
    "DatasetManifest",
    "GenerationConfig",
    "ManifestEntry",
    "PairingStats",
    "RenderedSample",
    "VehicleSpec",
    "build_dataset",
    "load_image",
    "load_manifest",
    "load_sample",
    "make_vehicle_specs",
    "render_silhouette",
    "render_vehicle",
    "sample_pair",
    "sample_pair_entries",
    "sample_reid_batch",
    "sample_reid_batch_entries",
]
