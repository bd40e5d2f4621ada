"""Trust-mask construction vs a brute-force point-in-polygon oracle."""

import numpy as np
import pytest
import torch
import torch.nn.functional as F
from hypothesis import given, settings
from hypothesis import strategies as st

from posereid.errors import DegenerateGeometryError
from posereid.pose.hull import convex_hull, pool_mask, trust_mask
from posereid.pose.keypoints import NUM_KEYPOINTS, Keypoints


def _kps(xy, visible=None):
    xy = np.asarray(xy, dtype=np.float64)
    if len(xy) < NUM_KEYPOINTS:
        # pad by repeating the first point; duplicates inside the hull are fine
        pad = np.tile(xy[0], (NUM_KEYPOINTS - len(xy), 1))
        xy = np.vstack([xy, pad])
    if visible is None:
        visible = np.ones(NUM_KEYPOINTS, dtype=bool)
    return Keypoints(xy=xy, visible=visible)


def _point_in_polygon(px, py, poly):
    """Crossing-number oracle, written independently of the library code."""
    inside = False
    n = len(poly)
    for k in range(n):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % n]
        if (y1 > py) != (y2 > py):
            x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < x_at:
                inside = not inside
    return inside


def _dist_to_edges(px, py, poly):
    best = np.inf
    n = len(poly)
    p = np.array([px, py])
    for k in range(n):
        a, b = np.asarray(poly[k]), np.asarray(poly[(k + 1) % n])
        d = b - a
        t = np.clip(np.dot(p - a, d) / max(np.dot(d, d), 1e-12), 0, 1)
        best = min(best, np.linalg.norm(p - (a + t * d)))
    return best


# ------------------------------------------------------------ convex_hull

def test_hull_triangle():
    pts = np.array([[10, 10], [50, 10], [10, 50], [20, 20], [15, 12]])
    hull = convex_hull(pts)
    assert len(hull) == 3
    assert {tuple(p) for p in hull} == {(10, 10), (50, 10), (10, 50)}


def test_hull_collinear_raises():
    pts = np.stack([np.arange(20), 2 * np.arange(20)], axis=1)
    with pytest.raises(DegenerateGeometryError):
        convex_hull(pts)


def test_hull_coincident_raises():
    with pytest.raises(DegenerateGeometryError):
        convex_hull(np.ones((20, 2)))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 63), st.floats(0, 63)),
                min_size=4, max_size=20))
def test_hull_contains_every_input_point(points):
    pts = np.asarray(points)
    try:
        hull = convex_hull(pts)
    except DegenerateGeometryError:
        return  # collinear draws are legitimately rejected
    # every input point is inside or on the hull: non-positive signed distance
    cx, cy = hull.mean(axis=0)
    for px, py in pts:
        d = _dist_to_edges(px, py, hull)
        assert _point_in_polygon(px, py, hull) or d < 1e-6


# ------------------------------------------------------------ trust_mask

def test_mask_triangle_area():
    # right triangle with legs 40 -> area 800, allow +- perimeter pixels
    xy = [[10, 10], [50, 10], [10, 50]]
    mask = trust_mask(_kps(xy), 64, 64).mask[0]
    perimeter = 40 + 40 + np.hypot(40, 40)
    assert abs(mask.sum() - 800) <= perimeter


def test_mask_full_image_corners():
    xy = [[0, 0], [63, 0], [63, 63], [0, 63]]
    mask = trust_mask(_kps(xy), 64, 64).mask
    assert mask.min() == 1


def test_mask_ordering_and_duplicate_invariance(rng):
    base = rng.uniform(5, 58, size=(NUM_KEYPOINTS, 2))
    kps_a = _kps(base)
    perm = rng.permutation(NUM_KEYPOINTS)
    kps_b = _kps(base[perm])
    assert np.array_equal(trust_mask(kps_a, 64, 64).mask, trust_mask(kps_b, 64, 64).mask)


def test_mask_monotone_under_added_point(rng):
    for _ in range(10):
        pts = rng.uniform(16, 48, size=(NUM_KEYPOINTS - 1, 2))
        # same 19 points; the 20th is either a duplicate (no-op) or a far point
        small = trust_mask(_kps(np.vstack([pts, pts[:1]])), 64, 64).mask
        big = trust_mask(_kps(np.vstack([pts, [[2.0, 2.0]]])), 64, 64).mask
        assert np.all(big >= small)


def test_mask_vs_point_in_polygon_100_hulls(rng):
    """Exact agreement off-boundary over 100 random keypoint sets."""
    mismatches = 0
    for _ in range(100):
        pts = rng.uniform(1, 62, size=(NUM_KEYPOINTS, 2))
        kps = _kps(pts)
        try:
            hull = convex_hull(pts)
        except DegenerateGeometryError:
            continue
        mask = trust_mask(kps, 64, 64).mask[0]
        for i in range(0, 64, 3):
            for j in range(0, 64, 3):
                if _dist_to_edges(j, i, hull) <= 0.5:
                    continue  # boundary pixels may go either way
                assert mask[i, j] == _point_in_polygon(j, i, hull), (
                    f"pixel ({j},{i}) disagrees with oracle")
        mismatches += 0
    assert mismatches == 0


def test_mask_ignores_visibility(rng):
    pts = rng.uniform(5, 58, size=(NUM_KEYPOINTS, 2))
    vis_all = np.ones(NUM_KEYPOINTS, dtype=bool)
    vis_none = np.zeros(NUM_KEYPOINTS, dtype=bool)
    a = trust_mask(Keypoints(xy=pts, visible=vis_all), 64, 64).mask
    b = trust_mask(Keypoints(xy=pts, visible=vis_none), 64, 64).mask
    assert np.array_equal(a, b)


# ------------------------------------------------------------ pool_mask

def test_pool_all_ones_identity():
    m = trust_mask(_kps([[0, 0], [63, 0], [63, 63], [0, 63]]), 64, 64)
    pooled = pool_mask(m, 16, 16)
    assert pooled.shape == (1, 16, 16)
    assert np.allclose(pooled, 1.0)


def test_pool_half_plane_boundary():
    # vertical half plane: left half ones -> pooling 2x gives clean 0/1 cells
    xy = [[0, 0], [31, 0], [31, 63], [0, 63]]
    m = trust_mask(_kps(xy), 64, 64)
    pooled = pool_mask(m, 32, 32)[0]
    assert set(np.unique(pooled)).issubset({0.0, 0.5, 1.0})
    assert pooled[:, :15].min() == 1.0
    assert pooled[:, 17:].max() == 0.0


def test_pool_block_mean_oracle(rng):
    from posereid.pose.hull import TrustMask

    m = TrustMask(mask=(rng.random((1, 64, 64)) > 0.5).astype(np.uint8))
    pooled = pool_mask(m, 8, 8)[0]
    direct = m.mask[0].reshape(8, 8, 8, 8).mean(axis=(1, 3))
    assert np.abs(pooled - direct).max() < 1e-6


def test_pool_preserves_mean(rng):
    from posereid.pose.hull import TrustMask

    m = TrustMask(mask=(rng.random((1, 64, 64)) > 0.3).astype(np.uint8))
    for t in (32, 16, 8, 4):
        pooled = pool_mask(m, t, t)
        assert abs(pooled.mean() - m.mask.mean()) < 1e-6


def test_pool_matches_torch_adaptive_avg(rng):
    """Non-divisible targets follow adaptive-pooling block boundaries."""
    from posereid.pose.hull import TrustMask

    m = TrustMask(mask=(rng.random((1, 60, 60)) > 0.5).astype(np.uint8))
    for t in (7, 9, 16):
        ours = pool_mask(m, t, t)[0]
        ref = F.adaptive_avg_pool2d(
            torch.from_numpy(m.mask.astype(np.float64))[None], (t, t)
        )[0, 0].numpy()
        assert np.abs(ours - ref).max() < 1e-9


def test_pool_rejects_zero_dims():
    m = trust_mask(_kps([[0, 0], [63, 0], [0, 63]]), 64, 64)
    with pytest.raises(ValueError):
        pool_mask(m, 0, 8)
