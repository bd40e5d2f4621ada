"""Convex-hull trust masks and average pooling to feature resolutions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from posereid.errors import DegenerateGeometryError
from posereid.pose.keypoints import Keypoints

# Cross-product tolerance for hull construction and the inclusive boundary rule.
_EPS = 1e-9


@dataclass(frozen=True)
class TrustMask:
    """Binary (1, H, W) mask: 1 inside/on the keypoint convex hull, 0 outside."""

    mask: np.ndarray

    @property
    def shape(self):
        return self.mask.shape


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull of 2D points via the monotone chain, returned in CCW order.

    Raises DegenerateGeometryError when all points are collinear or coincident.
    """
    pts = np.asarray(points, dtype=np.float64)
    uniq = np.unique(pts, axis=0)
    order = np.lexsort((uniq[:, 1], uniq[:, 0]))
    uniq = [tuple(p) for p in uniq[order]]
    if len(uniq) < 3:
        raise DegenerateGeometryError("convex hull needs at least 3 distinct points")

    # Pop on exact non-left turns only. A sign tolerance here is unsafe: for
    # near-collinear runs almost parallel to the y-axis, x-sorted order need
    # not match along-line order, and a tolerant pop can discard a true
    # extreme point. Degeneracy is judged by the hull's area instead.
    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0.0:
                out.pop()
            out.append(p)
        return out

    lower = half(uniq)
    upper = half(reversed(uniq))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateGeometryError("keypoints are collinear; hull is degenerate")
    arr = np.asarray(hull, dtype=np.float64)
    x, y = arr[:, 0], arr[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    scale = max(1.0, float(np.abs(pts).max()))
    if area <= _EPS * scale * scale:
        raise DegenerateGeometryError("keypoints are numerically collinear; hull is degenerate")
    return arr


def trust_mask(kps: Keypoints, height: int, width: int) -> TrustMask:
    """Rasterize the filled convex hull of all 20 keypoints at pixel centers.

    Visibility flags are ignored; the boundary is inclusive. A pixel belongs to
    the mask iff its center (x=j, y=i) lies inside or on the hull.
    """
    hull = convex_hull(kps.xy)
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    inside = np.ones((height, width), dtype=bool)
    scale = max(1.0, float(np.abs(hull).max()))
    tol = _EPS * scale * scale
    # CCW hull in image coords (y down): interior points have cross <= 0... the
    # chain above yields CCW in the mathematical (y up) sense, which is CW on
    # screen; sign is fixed by testing against the centroid.
    cx, cy = hull.mean(axis=0)
    n = len(hull)
    for k in range(n):
        x1, y1 = hull[k]
        x2, y2 = hull[(k + 1) % n]
        cross_grid = (x2 - x1) * (gy - y1) - (y2 - y1) * (gx - x1)
        cross_centroid = (x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)
        if cross_centroid >= 0:
            inside &= cross_grid >= -tol
        else:
            inside &= cross_grid <= tol
    return TrustMask(mask=inside[None].astype(np.uint8))


def pool_mask(mask: TrustMask, target_h: int, target_w: int) -> np.ndarray:
    """Average-pool a trust mask to a feature-map resolution.

    Returns a (1, target_h, target_w) float array in [0, 1]. When the target
    dims divide the source dims this is the exact block mean; otherwise blocks
    follow adaptive boundaries floor(i*H/th) .. ceil((i+1)*H/th).
    """
    if target_h <= 0 or target_w <= 0:
        raise ValueError(f"target dims must be positive, got ({target_h}, {target_w})")
    m = mask.mask[0].astype(np.float64)
    h, w = m.shape
    if h % target_h == 0 and w % target_w == 0:
        bh, bw = h // target_h, w // target_w
        pooled = m.reshape(target_h, bh, target_w, bw).mean(axis=(1, 3))
    else:
        pooled = np.empty((target_h, target_w), dtype=np.float64)
        for i in range(target_h):
            y0, y1 = (i * h) // target_h, -(-((i + 1) * h) // target_h)
            for j in range(target_w):
                x0, x1 = (j * w) // target_w, -(-((j + 1) * w) // target_w)
                pooled[i, j] = m[y0:y1, x0:x1].mean()
    return pooled[None]
