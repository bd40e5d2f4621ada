"""Shared fixtures: a tiny rendered dataset, a quickly trained pose net, and
the disk-cached full-size artifacts the slow end-to-end checks build on.

The tiny fixtures are session-scoped so the rendering cost is paid once per
run. The full-size artifacts (50-identity dataset, properly trained pose
estimator, trained generators) live under tests/_acceptance_cache and survive
across runs: every build step is deterministic given its config, so a cache
hit is equivalent to retraining. The cache keys cover configs but not code,
so after changing training or rendering code run `rm -rf
tests/_acceptance_cache` to force a rebuild.
"""

from pathlib import Path

import numpy as np
import pytest
import torch

torch.set_num_threads(1)

CACHE_DIR = Path(__file__).resolve().parent / "_acceptance_cache"


def cache_tag(obj) -> str:
    """Short stable digest of a config object, for cache file names."""
    import hashlib

    return hashlib.sha256(repr(obj).encode()).hexdigest()[:10]


@pytest.fixture(scope="session")
def full_root():
    """The 50-identity, 8-pose dataset the end-to-end checks run on."""
    from posereid.synthdata.dataset import GenerationConfig, build_dataset, load_manifest

    shape = (50, 8, 64, 0, 0.8)  # identities, poses, resolution, seed, train fraction
    root = CACHE_DIR / f"data50_{cache_tag(shape)}"
    if not (root / "manifest_train.json").exists():
        build_dataset(GenerationConfig(num_identities=50, num_poses=8, resolution=64,
                                       out_dir=str(root), seed=0, train_fraction=0.8))
    else:
        load_manifest(str(root), "train")  # validates the cached copy
    return str(root)


@pytest.fixture(scope="session")
def full_psi(full_root):
    """Pose estimator trained at default settings on the full-size train split."""
    from posereid.pose.estimator import (
        PoseTrainConfig,
        load_pose_estimator,
        save_pose_estimator,
        train_pose_estimator,
    )
    from posereid.synthdata.dataset import load_manifest

    config = PoseTrainConfig()
    path = CACHE_DIR / f"psi_{cache_tag(config)}.pt"
    if not path.exists():
        model, _ = train_pose_estimator(load_manifest(full_root, "train"), config)
        save_pose_estimator(model, path)
    model, _ = load_pose_estimator(path)
    return model


@pytest.fixture(scope="session")
def tiny_root(tmp_path_factory):
    from posereid.synthdata.dataset import GenerationConfig, build_dataset

    root = tmp_path_factory.mktemp("tiny_data")
    build_dataset(GenerationConfig(num_identities=12, num_poses=4, resolution=64,
                                   out_dir=str(root), seed=11, train_fraction=0.75))
    return str(root)


@pytest.fixture(scope="session")
def tiny_train(tiny_root):
    from posereid.synthdata.dataset import load_manifest

    return load_manifest(tiny_root, "train")


@pytest.fixture(scope="session")
def quick_psi(tiny_train):
    """A pose net trained just long enough to be meaningfully non-random."""
    from posereid.pose.estimator import PoseTrainConfig, train_pose_estimator

    model, _ = train_pose_estimator(tiny_train, PoseTrainConfig(steps=60, batch_size=8, seed=0))
    return model


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
