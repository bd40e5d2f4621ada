"""Keypoint containers and Gaussian response-map rendering.

Coordinate convention everywhere: x is the column, y is the row, origin at the
top-left pixel, and pixel (i, j) has its center at (x=j, y=i). Keypoint
coordinates are float pixels in that frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NUM_KEYPOINTS = 20

# Response amplitude for keypoints flagged invisible (occluded landmarks keep
# their projected coordinates but contribute a weaker peak).
HIDDEN_AMPLITUDE = 0.5


@dataclass(frozen=True)
class Keypoints:
    """20 named 2D landmarks describing one vehicle pose.

    xy: (20, 2) float array of (x, y) pixel coordinates.
    visible: (20,) bool array.
    """

    xy: np.ndarray
    visible: np.ndarray

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=np.float64)
        visible = np.asarray(self.visible, dtype=bool)
        if xy.shape != (NUM_KEYPOINTS, 2):
            raise ValueError(f"expected ({NUM_KEYPOINTS}, 2) coordinates, got {xy.shape}")
        if visible.shape != (NUM_KEYPOINTS,):
            raise ValueError(f"expected ({NUM_KEYPOINTS},) visibility flags, got {visible.shape}")
        if not np.all(np.isfinite(xy)):
            raise ValueError("keypoint coordinates must be finite")
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "visible", visible)

    def to_list(self) -> list[list[float]]:
        """Serialize as [[x, y, visible], ...] rows for manifest JSON."""
        return [
            [float(x), float(y), int(v)]
            for (x, y), v in zip(self.xy, self.visible)
        ]

    @classmethod
    def from_list(cls, rows) -> "Keypoints":
        arr = np.asarray(rows, dtype=np.float64)
        if arr.shape != (NUM_KEYPOINTS, 3):
            raise ValueError(f"expected {NUM_KEYPOINTS} rows of [x, y, visible], got {arr.shape}")
        return cls(xy=arr[:, :2], visible=arr[:, 2] > 0.5)

    def shifted(self, dx: float, dy: float) -> "Keypoints":
        return Keypoints(xy=self.xy + np.array([dx, dy]), visible=self.visible.copy())


@dataclass(frozen=True)
class PoseMap:
    """Per-keypoint Gaussian response channels used as a conditioning signal.

    maps: (20, H, W) float array, each channel in [0, 1].
    sigma: Gaussian width in pixels.
    """

    maps: np.ndarray
    sigma: float

    @property
    def shape(self):
        return self.maps.shape


def default_sigma(resolution: int) -> float:
    """Gaussian width for a given image resolution (4 px at 256, floor 1 px)."""
    return max(1.0, 4.0 * resolution / 256.0)


def render_pose_map(
    kps: Keypoints,
    height: int,
    width: int,
    sigma: float,
    dtype=np.float32,
) -> PoseMap:
    """Render one Gaussian response channel per keypoint, sampled at pixel centers.

    Channel k is amp_k * exp(-((x - x_k)^2 + (y - y_k)^2) / (2 sigma^2)) where
    amp_k is 1.0 for visible keypoints and 0.5 for invisible ones.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    ys = np.arange(height, dtype=np.float64)
    xs = np.arange(width, dtype=np.float64)
    # (K, H, W) squared distances via broadcasting
    dy2 = (ys[None, :] - kps.xy[:, 1:2]) ** 2
    dx2 = (xs[None, :] - kps.xy[:, 0:1]) ** 2
    d2 = dy2[:, :, None] + dx2[:, None, :]
    maps = np.exp(-d2 / (2.0 * sigma * sigma))
    amps = np.where(kps.visible, 1.0, HIDDEN_AMPLITUDE)
    maps *= amps[:, None, None]
    return PoseMap(maps=maps.astype(dtype), sigma=float(sigma))
