"""Training, accuracy, and serialization checks for the pose estimator."""

import dataclasses
import math

import numpy as np
import pytest
import torch

from posereid.pose.estimator import (
    PoseEstimator,
    PoseTrainConfig,
    load_pose_estimator,
    save_pose_estimator,
    train_pose_estimator,
)
from posereid.synthdata.dataset import load_image, load_manifest


@pytest.fixture(scope="module")
def fit_psi(tiny_train):
    """Briefly trained estimator; enough for the serialization checks."""
    model, history = train_pose_estimator(
        tiny_train, PoseTrainConfig(steps=200, batch_size=8, seed=0)
    )
    return model, history


def test_forward_contract():
    torch.manual_seed(0)
    model = PoseEstimator(base=8)
    with torch.no_grad():
        out = model(torch.rand((2, 3, 32, 32)))
    assert out.shape == (2, 20, 32, 32)
    assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0
    with pytest.raises(ValueError):
        model(torch.rand((3, 32, 32)))
    with pytest.raises(ValueError):
        model(torch.rand((1, 1, 32, 32)))


def test_estimate_refuses_untrained_model():
    model = PoseEstimator(base=8)
    with pytest.raises(RuntimeError):
        model.estimate(np.zeros((32, 32, 3), dtype=np.float32))


def test_training_reduces_the_loss(tiny_train):
    _, history = train_pose_estimator(
        tiny_train, PoseTrainConfig(steps=40, batch_size=8, seed=1)
    )
    assert len(history) == 40
    assert np.mean(history[-5:]) < np.mean(history[:5])


def test_training_is_seed_deterministic(tiny_train):
    cfg = PoseTrainConfig(steps=12, batch_size=4, seed=5)
    _, h1 = train_pose_estimator(tiny_train, cfg)
    _, h2 = train_pose_estimator(tiny_train, cfg)
    assert h1 == h2


def test_overfits_a_single_image(tiny_train):
    one = dataclasses.replace(tiny_train, entries=tiny_train.entries[:1])
    _, history = train_pose_estimator(
        one, PoseTrainConfig(steps=400, batch_size=1, seed=2)
    )
    assert history[-1] < 1e-3, f"single-sample fit stalled at {history[-1]:.2e}"


def test_empty_manifest_rejected(tiny_train):
    empty = dataclasses.replace(tiny_train, entries=[])
    with pytest.raises(ValueError):
        train_pose_estimator(empty)


def _peak(channel):
    idx = int(np.argmax(channel))
    y, x = divmod(idx, channel.shape[1])
    return x, y


def test_heldout_keypoint_localization(full_psi, full_root):
    """Response peaks land within 3 px of the true keypoint for at least 80%
    of the visible keypoints on images the estimator never saw."""
    held_out = load_manifest(full_root, "test_query")
    hits = total = 0
    for entry in held_out.entries:
        maps = full_psi.estimate(load_image(held_out, entry)).maps
        for k, (x, y, visible) in enumerate(entry.keypoints.to_list()):
            if visible < 0.5:
                continue
            px, py = _peak(maps[k])
            total += 1
            hits += int(math.hypot(px - x, py - y) <= 3.0)
    assert total > 0
    fraction = hits / total
    assert fraction >= 0.8, f"only {hits}/{total} peaks within 3 px"


def test_estimate_returns_calibrated_map(fit_psi, tiny_root):
    model, _ = fit_psi
    held_out = load_manifest(tiny_root, "test_query")
    pose = model.estimate(load_image(held_out, held_out.entries[0]))
    assert pose.maps.shape == (20, 64, 64)
    assert pose.sigma == pytest.approx(64.0 / 64.0 * 4.0 / 4.0, abs=2.0)  # default sigma regime
    assert pose.maps.min() >= 0.0 and pose.maps.max() <= 1.0


def test_save_load_round_trip(fit_psi, tmp_path):
    model, _ = fit_psi
    path = tmp_path / "psi.pt"
    save_pose_estimator(model, path)
    loaded, meta = load_pose_estimator(path)

    x = torch.rand((1, 3, 64, 64), generator=torch.Generator().manual_seed(3))
    with torch.no_grad():
        assert torch.equal(loaded(x), model(x))
    assert loaded.is_trained
    assert meta["base"] == model.base
    assert meta["sigma"] == pytest.approx(model.train_sigma)
    assert meta["resolution"] == model.train_resolution


def test_load_rejects_mismatched_architecture(fit_psi, tmp_path):
    model, _ = fit_psi
    path = tmp_path / "psi.pt"
    save_pose_estimator(model, path)
    payload = torch.load(path, map_location="cpu", weights_only=True)
    payload["config"]["arch_hash"] = "0" * 16
    torch.save(payload, path)
    with pytest.raises(RuntimeError):
        load_pose_estimator(path)


def test_input_gradient_matches_finite_differences():
    torch.manual_seed(4)
    model = PoseEstimator(base=4).double().eval()
    gen = torch.Generator().manual_seed(5)
    x = torch.rand((1, 3, 8, 8), generator=gen, dtype=torch.float64, requires_grad=True)
    out = model(x).sum()
    (grad,) = torch.autograd.grad(out, x)

    h = 1e-5
    worst = 0.0
    for _ in range(3):
        v = torch.randn(x.shape, generator=gen, dtype=torch.float64)
        v = v / v.norm()
        with torch.no_grad():
            f_plus = float(model(x + h * v).sum())
            f_minus = float(model(x - h * v).sum())
        fd = (f_plus - f_minus) / (2.0 * h)
        analytic = float((grad * v).sum())
        worst = max(worst, abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-12))
    assert worst <= 1e-3
