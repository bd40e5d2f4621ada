"""SSIM, FID, and retrieval metrics against independent oracles."""

import numpy as np
import pytest
from scipy import linalg as sla

from posereid.metrics.fid import GaussianStats, fid, gaussian_stats
from posereid.metrics.retrieval import cmc_map
from posereid.metrics.ssim import K1, K2, WINDOW_SIGMA, WINDOW_SIZE, ssim


# ---------------------------------------------------------------- ssim

def _random_image(rng, h=24, w=24):
    return rng.random((h, w, 3))


def test_ssim_self_similarity_exact(rng):
    x = _random_image(rng)
    assert ssim(x, x) == 1.0


def test_ssim_symmetric(rng):
    for _ in range(5):
        a, b = _random_image(rng), _random_image(rng)
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-9


def test_ssim_bounded(rng):
    for _ in range(10):
        a, b = _random_image(rng), _random_image(rng)
        s = ssim(a, b)
        assert -1.0 <= s <= 1.0


def test_ssim_constant_images_closed_form():
    # For constants the variance/covariance terms vanish and only the
    # luminance ratio survives: (2*mu_a*mu_b + C1) / (mu_a^2 + mu_b^2 + C1).
    a = np.full((16, 16, 3), 0.25)
    b = np.full((16, 16, 3), 0.75)
    c1 = (K1 * 1.0) ** 2
    c2 = (K2 * 1.0) ** 2
    expected = ((2 * 0.25 * 0.75 + c1) * c2) / ((0.25**2 + 0.75**2 + c1) * c2)
    assert abs(ssim(a, b) - expected) < 1e-9


def test_ssim_noise_hurts(rng):
    base = _random_image(rng)
    noisy_small = np.clip(base + rng.normal(0, 0.02, base.shape), 0, 1)
    noisy_big = np.clip(base + rng.normal(0, 0.3, base.shape), 0, 1)
    assert ssim(base, noisy_big) < ssim(base, noisy_small) < 1.0


def test_ssim_matches_direct_sliding_window(rng):
    """Recompute with an explicit per-window loop (independent oracle)."""
    a = rng.random((16, 16, 1))
    b = rng.random((16, 16, 1))

    half = WINDOW_SIZE // 2
    coords = np.arange(WINDOW_SIZE) - half
    g = np.exp(-(coords**2) / (2 * WINDOW_SIGMA**2))
    win = np.outer(g, g)
    win /= win.sum()
    c1, c2 = (K1 * 1.0) ** 2, (K2 * 1.0) ** 2

    vals = []
    x, y = a[:, :, 0], b[:, :, 0]
    for i in range(16 - WINDOW_SIZE + 1):
        for j in range(16 - WINDOW_SIZE + 1):
            px = x[i:i + WINDOW_SIZE, j:j + WINDOW_SIZE]
            py = y[i:i + WINDOW_SIZE, j:j + WINDOW_SIZE]
            mx, my = (win * px).sum(), (win * py).sum()
            vx = (win * px * px).sum() - mx * mx
            vy = (win * py * py).sum() - my * my
            cov = (win * px * py).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * cov + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    assert abs(ssim(a, b) - np.mean(vals)) < 1e-9


def test_ssim_shape_mismatch():
    with pytest.raises(ValueError):
        ssim(np.zeros((16, 16, 3)), np.zeros((16, 17, 3)))


def test_ssim_too_small():
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))


# ---------------------------------------------------------------- fid

def test_fid_identical_stats_zero(rng):
    feats = rng.normal(size=(40, 6))
    s = gaussian_stats(feats)
    assert fid(s, s) <= 1e-6


def test_fid_mean_shift_only():
    # Equal covariances: the trace term cancels, fid = ||mu_a - mu_b||^2.
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    a = GaussianStats(mean=np.zeros(2), covariance=cov)
    b = GaussianStats(mean=np.array([1.5, -0.5]), covariance=cov)
    assert abs(fid(a, b) - (1.5**2 + 0.5**2)) < 1e-9


def test_fid_diagonal_closed_form(rng):
    da = rng.uniform(0.5, 2.0, size=5)
    db = rng.uniform(0.5, 2.0, size=5)
    mu_a = rng.normal(size=5)
    mu_b = rng.normal(size=5)
    a = GaussianStats(mean=mu_a, covariance=np.diag(da))
    b = GaussianStats(mean=mu_b, covariance=np.diag(db))
    expected = np.sum((mu_a - mu_b) ** 2) + np.sum((np.sqrt(da) - np.sqrt(db)) ** 2)
    assert abs(fid(a, b) - expected) < 1e-6


def test_fid_vs_scipy_sqrtm(rng):
    feats_a = rng.normal(size=(60, 8))
    feats_b = rng.normal(size=(60, 8)) * 1.3 + 0.2
    a, b = gaussian_stats(feats_a), gaussian_stats(feats_b)
    covmean = sla.sqrtm(a.covariance @ b.covariance)
    expected = (np.sum((a.mean - b.mean) ** 2)
                + np.trace(a.covariance) + np.trace(b.covariance)
                - 2 * np.trace(covmean.real))
    assert abs(fid(a, b) - expected) < 1e-8


def test_fid_symmetric(rng):
    a = gaussian_stats(rng.normal(size=(50, 7)))
    b = gaussian_stats(rng.normal(size=(50, 7)) + 1.0)
    assert abs(fid(a, b) - fid(b, a)) < 1e-6


def test_gaussian_stats_normalization(rng):
    feats = rng.normal(size=(20, 4))
    s = gaussian_stats(feats)
    assert np.allclose(s.covariance, np.cov(feats, rowvar=False))
    assert s.shrinkage == 0.0


def test_gaussian_stats_shrinkage_small_n(rng):
    feats = rng.normal(size=(3, 8))  # n < d + 1
    s = gaussian_stats(feats)
    assert s.shrinkage > 0
    # Still symmetric and usable.
    assert np.allclose(s.covariance, s.covariance.T)
    assert np.isfinite(fid(s, s))


def test_fid_dim_mismatch():
    a = GaussianStats(mean=np.zeros(3), covariance=np.eye(3))
    b = GaussianStats(mean=np.zeros(4), covariance=np.eye(4))
    with pytest.raises(ValueError):
        fid(a, b)


# ---------------------------------------------------------------- cmc / map

def _brute_force_ap(dist_row, q_id, gallery_ids):
    order = np.argsort(dist_row, kind="stable")
    hits = np.asarray(gallery_ids)[order] == q_id
    if not hits.any():
        return None
    ranks = np.flatnonzero(hits) + 1
    precisions = [(i + 1) / r for i, r in enumerate(ranks)]
    return float(np.mean(precisions))


def _brute_force_eval(dist, query_ids, gallery_ids, ranks):
    aps, cmc_hits = [], {k: 0 for k in ranks}
    evaluated = 0
    for qi, q_id in enumerate(query_ids):
        ap = _brute_force_ap(dist[qi], q_id, gallery_ids)
        if ap is None:
            continue
        evaluated += 1
        aps.append(ap)
        order = np.argsort(dist[qi], kind="stable")
        hits = np.asarray(gallery_ids)[order] == q_id
        for k in ranks:
            kk = min(k, len(gallery_ids))
            cmc_hits[k] += bool(hits[:kk].any())
    return (float(np.mean(aps)),
            {k: cmc_hits[k] / evaluated for k in ranks})


def test_cmc_map_single_query_rank1():
    dist = np.array([[0.1, 0.5, 0.9]])
    res = cmc_map(dist, query_ids=[7], gallery_ids=[7, 1, 2], ranks=(1, 5))
    assert res.map == 1.0
    assert res.cmc[1] == 1.0 and res.cmc[5] == 1.0


def test_cmc_map_match_second_of_two():
    dist = np.array([[0.2, 0.9]])
    res = cmc_map(dist, query_ids=[3], gallery_ids=[1, 3], ranks=(1, 5))
    assert abs(res.map - 0.5) < 1e-12
    assert res.cmc[1] == 0.0
    assert res.cmc[5] == 1.0  # k > G evaluated at k = G


@pytest.mark.filterwarnings("ignore:skipped")
def test_cmc_map_vs_oracle_50_instances(rng):
    """Exhaustive recomputation across 50 random instances, 1e-9."""
    for _ in range(50):
        q = int(rng.integers(2, 12))
        g = int(rng.integers(3, 30))
        n_ids = int(rng.integers(2, 6))
        query_ids = rng.integers(0, n_ids, size=q)
        gallery_ids = rng.integers(0, n_ids, size=g)
        # make sure at least one query has a match
        gallery_ids[0] = query_ids[0]
        dist = rng.random((q, g))
        res = cmc_map(dist, query_ids, gallery_ids, ranks=(1, 5))
        exp_map, exp_cmc = _brute_force_eval(dist, query_ids, gallery_ids, (1, 5))
        assert abs(res.map - exp_map) < 1e-9
        for k in (1, 5):
            assert abs(res.cmc[k] - exp_cmc[k]) < 1e-9


def test_cmc_monotone_in_k_100_instances(rng):
    for _ in range(100):
        q, g = int(rng.integers(2, 10)), int(rng.integers(10, 25))
        query_ids = rng.integers(0, 4, size=q)
        gallery_ids = rng.integers(0, 4, size=g)
        gallery_ids[:q] = query_ids  # every query has a match
        dist = rng.random((q, g))
        ks = tuple(range(1, g + 1))
        res = cmc_map(dist, query_ids, gallery_ids, ranks=ks)
        curve = [res.cmc[k] for k in ks]
        assert all(b >= a for a, b in zip(curve, curve[1:]))
        assert curve[-1] == 1.0


def test_cmc_map_monotone_transform_invariance(rng):
    dist = rng.random((6, 15))
    query_ids = rng.integers(0, 3, size=6)
    gallery_ids = rng.integers(0, 3, size=15)
    gallery_ids[:6] = query_ids
    a = cmc_map(dist, query_ids, gallery_ids, ranks=(1, 5))
    b = cmc_map(np.exp(3 * dist), query_ids, gallery_ids, ranks=(1, 5))
    assert a.map == b.map and a.cmc == b.cmc


def test_cmc_map_skips_matchless_queries(rng):
    dist = rng.random((2, 4))
    with pytest.warns(UserWarning):
        res = cmc_map(dist, query_ids=[0, 9], gallery_ids=[0, 0, 1, 1], ranks=(1,))
    assert res.skipped_queries == 1
    assert res.num_queries == 1  # evaluated count; skipped reported separately


@pytest.mark.filterwarnings("ignore:skipped")
def test_cmc_map_all_matchless_raises(rng):
    dist = rng.random((2, 3))
    with pytest.raises(ValueError):
        cmc_map(dist, query_ids=[5, 6], gallery_ids=[1, 2, 3], ranks=(1,))
