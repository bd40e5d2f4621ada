"""Synthesis metrics (SSIM, FID) and retrieval metrics (mAP, CMC)."""

from posereid.metrics.ssim import ssim
from posereid.metrics.fid import GaussianStats, fid, gaussian_stats
from posereid.metrics.retrieval import RetrievalResult, cmc_map

__all__ = [
    "GaussianStats",
    "RetrievalResult",
    "cmc_map",
    "fid",
    "gaussian_stats",
    "ssim",
]
