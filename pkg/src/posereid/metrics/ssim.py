"""Structural similarity with Gaussian windows.

Window 11, sigma 1.5, K1=0.01, K2=0.03, dynamic range L=1 (images in [0, 1]);
local statistics use 'valid' windows only, and channels are averaged.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1 = 0.01
K2 = 0.03
DYNAMIC_RANGE = 1.0


def _gaussian_window(size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _filter(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    return fftconvolve(img, window, mode="valid")


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM between two (H, W, 3) or (H, W) images in [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if a.ndim != 3:
        raise ValueError(f"expected (H, W[, C]) images, got {a.shape}")
    if a.shape[0] < WINDOW_SIZE or a.shape[1] < WINDOW_SIZE:
        raise ValueError(f"images must be at least {WINDOW_SIZE} pixels on a side")

    window = _gaussian_window()
    c1 = (K1 * DYNAMIC_RANGE) ** 2
    c2 = (K2 * DYNAMIC_RANGE) ** 2
    values = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mu_x = _filter(x, window)
        mu_y = _filter(y, window)
        mu_xx, mu_yy, mu_xy = mu_x * mu_x, mu_y * mu_y, mu_x * mu_y
        var_x = _filter(x * x, window) - mu_xx
        var_y = _filter(y * y, window) - mu_yy
        cov = _filter(x * y, window) - mu_xy
        s = ((2 * mu_xy + c1) * (2 * cov + c2)) / ((mu_xx + mu_yy + c1) * (var_x + var_y + c2))
        values.append(s.mean())
    return float(np.mean(values))
