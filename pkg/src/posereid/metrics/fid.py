"""Frechet distance between Gaussian feature statistics.

The trace of the cross square root is computed symmetrically:
``tr((S_a S_b)^(1/2)) = tr((A S_b A)^(1/2))`` with ``A = S_a^(1/2)``, so every
square root goes through an eigendecomposition of a symmetric matrix. Small
negative eigenvalues (>= -1e-6) are clipped to zero; anything more negative is
treated as an invalid covariance.

Features come from the frozen desk-scale extractor, so absolute values are
not comparable to published numbers computed with other backbones — only
orderings between runs of this package are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EIG_TOLERANCE = 1e-6
SHRINKAGE_GAMMA = 1e-3


@dataclass(frozen=True)
class GaussianStats:
    """Sample mean and (1/(n-1)-normalized) covariance of a feature set."""

    mean: np.ndarray
    covariance: np.ndarray
    num_samples: int = 0
    shrinkage: float = 0.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(f"bad stats shapes: mean {mean.shape}, cov {cov.shape}")
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise ValueError("statistics must be finite")
        if not np.allclose(cov, cov.T, atol=1e-8):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", (cov + cov.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.mean.size


def gaussian_stats(features: np.ndarray) -> GaussianStats:
    """Fit stats to an (n, d) feature matrix.

    With fewer than d+1 samples the sample covariance is rank-deficient, so a
    small ridge (gamma = 1e-3) is added to the diagonal and recorded.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 2:
        raise ValueError(f"need an (n >= 2, d) feature matrix, got {f.shape}")
    n, d = f.shape
    mean = f.mean(axis=0)
    cov = np.cov(f, rowvar=False)
    cov = np.atleast_2d(cov)
    shrinkage = 0.0
    if n < d + 1:
        shrinkage = SHRINKAGE_GAMMA
        cov = cov + shrinkage * np.eye(d)
    return GaussianStats(mean=mean, covariance=cov, num_samples=n, shrinkage=shrinkage)


def _sqrt_eigvals(sym: np.ndarray, what: str) -> np.ndarray:
    vals = np.linalg.eigvalsh(sym)
    if vals.min() < -EIG_TOLERANCE:
        raise ValueError(f"{what} has eigenvalue {vals.min():.3e} below -{EIG_TOLERANCE}")
    return np.sqrt(np.clip(vals, 0.0, None))


def _sym_sqrt(sym: np.ndarray, what: str) -> np.ndarray:
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() < -EIG_TOLERANCE:
        raise ValueError(f"{what} has eigenvalue {vals.min():.3e} below -{EIG_TOLERANCE}")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root) @ vecs.T


def fid(stats_a: GaussianStats, stats_b: GaussianStats) -> float:
    """||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2))."""
    if stats_a.dim != stats_b.dim:
        raise ValueError(f"dimension mismatch: {stats_a.dim} vs {stats_b.dim}")
    mean_term = float(((stats_a.mean - stats_b.mean) ** 2).sum())
    root_a = _sym_sqrt(stats_a.covariance, "covariance A")
    cross = root_a @ stats_b.covariance @ root_a
    cross = (cross + cross.T) / 2.0
    tr_cross = float(_sqrt_eigvals(cross, "cross product matrix").sum())
    value = mean_term + float(np.trace(stats_a.covariance) + np.trace(stats_b.covariance)) - 2.0 * tr_cross
    if value < -EIG_TOLERANCE:
        raise ValueError(f"distance collapsed to {value:.3e}; inputs are not valid covariances")
    return value
