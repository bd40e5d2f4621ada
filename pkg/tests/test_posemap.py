"""Gaussian response-map rendering: analytic values and quadrature oracle."""

import numpy as np
import pytest
from scipy import integrate

from posereid.pose.keypoints import (
    HIDDEN_AMPLITUDE,
    NUM_KEYPOINTS,
    Keypoints,
    default_sigma,
    render_pose_map,
)


def _kps_at(x, y, visible=True):
    xy = np.tile([x, y], (NUM_KEYPOINTS, 1)).astype(float)
    vis = np.full(NUM_KEYPOINTS, visible, dtype=bool)
    return Keypoints(xy=xy, visible=vis)


def test_peak_at_keypoint_value_one():
    pm = render_pose_map(_kps_at(32, 32), 64, 64, sigma=2.0)
    assert pm.shape == (NUM_KEYPOINTS, 64, 64)
    ch = pm.maps[0]
    assert ch[32, 32] == pytest.approx(1.0)
    assert np.unravel_index(ch.argmax(), ch.shape) == (32, 32)


def test_value_at_one_sigma():
    pm = render_pose_map(_kps_at(32, 32), 64, 64, sigma=4.0)
    assert pm.maps[0][32, 36] == pytest.approx(np.exp(-0.5), rel=1e-6)


def test_hidden_amplitude():
    pm = render_pose_map(_kps_at(20, 20, visible=False), 64, 64, sigma=2.0)
    assert pm.maps[0].max() == pytest.approx(HIDDEN_AMPLITUDE)


def test_range_zero_one(rng):
    xy = rng.uniform(0, 63, size=(NUM_KEYPOINTS, 2))
    vis = rng.random(NUM_KEYPOINTS) > 0.5
    pm = render_pose_map(Keypoints(xy=xy, visible=vis), 64, 64, sigma=3.0)
    assert pm.maps.min() >= 0.0
    assert pm.maps.max() <= 1.0


def test_channel_sum_vs_quadrature():
    """Discrete channel sum approximates the 2D Gaussian integral within 1%."""
    sigma = 3.0
    pm = render_pose_map(_kps_at(32, 32), 64, 64, sigma=sigma)
    total = float(pm.maps[0].sum())

    integral, _ = integrate.dblquad(
        lambda y, x: np.exp(-((x - 32) ** 2 + (y - 32) ** 2) / (2 * sigma**2)),
        0, 64, 0, 64,
    )
    assert abs(total - integral) / integral < 0.01


def test_translation_equivariance():
    base = render_pose_map(_kps_at(20, 24), 64, 64, sigma=2.5)
    shifted = render_pose_map(_kps_at(20, 24).shifted(5, 7), 64, 64, sigma=2.5)
    # compare on the overlapping region
    assert np.allclose(shifted.maps[:, 7:, 5:], base.maps[:, :-7, :-5], atol=1e-7)


def test_direct_formula_oracle(rng):
    xy = rng.uniform(5, 58, size=(NUM_KEYPOINTS, 2))
    vis = rng.random(NUM_KEYPOINTS) > 0.3
    sigma = 2.2
    pm = render_pose_map(Keypoints(xy=xy, visible=vis), 48, 40, sigma=sigma)
    for k in rng.choice(NUM_KEYPOINTS, size=5, replace=False):
        amp = 1.0 if vis[k] else HIDDEN_AMPLITUDE
        for _ in range(10):
            i, j = int(rng.integers(48)), int(rng.integers(40))
            expected = amp * np.exp(-((j - xy[k, 0]) ** 2 + (i - xy[k, 1]) ** 2)
                                    / (2 * sigma**2))
            assert pm.maps[k, i, j] == pytest.approx(expected, abs=1e-6)


def test_nonpositive_sigma_rejected():
    with pytest.raises(ValueError):
        render_pose_map(_kps_at(10, 10), 64, 64, sigma=0.0)


def test_default_sigma_scaling():
    assert default_sigma(256) == 4.0
    assert default_sigma(64) == 1.0  # floored at 1 px
    assert default_sigma(512) == 8.0


def test_keypoints_serialization_round_trip(rng):
    xy = rng.uniform(0, 63, size=(NUM_KEYPOINTS, 2))
    vis = rng.random(NUM_KEYPOINTS) > 0.5
    kps = Keypoints(xy=xy, visible=vis)
    back = Keypoints.from_list(kps.to_list())
    assert np.allclose(back.xy, kps.xy)
    assert np.array_equal(back.visible, kps.visible)


def test_keypoints_validation():
    with pytest.raises(ValueError):
        Keypoints(xy=np.zeros((5, 2)), visible=np.ones(5, dtype=bool))
    bad = np.zeros((NUM_KEYPOINTS, 2))
    bad[3, 0] = np.nan
    with pytest.raises(ValueError):
        Keypoints(xy=bad, visible=np.ones(NUM_KEYPOINTS, dtype=bool))
