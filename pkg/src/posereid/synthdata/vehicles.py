"""Layered-polygon toy vehicle renderer with exact keypoint ground truth.

Vehicles are modeled as boxes (body + cabin), wheel discs, and light quads in
a canonical 3D frame, rotated by a per-pose azimuth plus a fixed elevation,
orthographically projected, and painted back-to-front. Landmark positions are
projected with the same transform, so keypoints are exact by construction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from posereid.pose.keypoints import NUM_KEYPOINTS, Keypoints

CATEGORIES = ("sedan", "suv", "van", "hatchback", "mpv", "pickup", "bus", "truck", "estate")

# 4 wheels, 4 lights, 4 roof corners, 4 bumper corners, 4 window corners.
KEYPOINT_NAMES = (
    "wheel_front_left", "wheel_front_right", "wheel_rear_left", "wheel_rear_right",
    "headlight_left", "headlight_right", "taillight_left", "taillight_right",
    "roof_front_left", "roof_front_right", "roof_rear_left", "roof_rear_right",
    "bumper_front_left", "bumper_front_right", "bumper_rear_left", "bumper_rear_right",
    "window_front_left", "window_front_right", "window_rear_left", "window_rear_right",
)

DEFAULT_NUM_POSES = 8
ELEVATION_RAD = np.deg2rad(18.0)
IMAGE_MARGIN = 0.10
SUPERSAMPLE = 2

# Base proportions per category: length, width, body height, cabin length
# fraction, cabin height, cabin center offset (fraction of length, + toward
# front), wheel radius. Length is the unit scale.
_CATEGORY_DIMS = {
    "sedan":     (1.00, 0.42, 0.26, 0.45, 0.20, -0.05, 0.11),
    "suv":       (1.00, 0.46, 0.34, 0.50, 0.24, -0.02, 0.13),
    "van":       (1.02, 0.46, 0.44, 0.66, 0.26, -0.04, 0.12),
    "hatchback": (0.84, 0.42, 0.27, 0.42, 0.22, -0.12, 0.11),
    "mpv":       (0.95, 0.45, 0.36, 0.55, 0.24, -0.05, 0.12),
    "pickup":    (1.08, 0.46, 0.30, 0.32, 0.24, 0.16, 0.13),
    "bus":       (1.40, 0.50, 0.62, 0.82, 0.24, 0.00, 0.13),
    "truck":     (1.30, 0.50, 0.46, 0.30, 0.28, 0.42, 0.14),
    "estate":    (1.04, 0.43, 0.28, 0.55, 0.21, -0.10, 0.11),
}

# Common body colors; identities draw a base color plus a small jitter, so
# same-category same-palette vehicles must be told apart by shape cues.
_PALETTE = np.array([
    (0.92, 0.92, 0.92),  # white
    (0.10, 0.10, 0.11),  # black
    (0.72, 0.73, 0.75),  # silver
    (0.45, 0.46, 0.48),  # gray
    (0.70, 0.12, 0.10),  # red
    (0.12, 0.25, 0.55),  # blue
    (0.10, 0.32, 0.18),  # green
    (0.55, 0.42, 0.20),  # tan
])


@dataclass(frozen=True)
class VehicleSpec:
    """Identity-level description of one toy vehicle."""

    identity_id: int
    category: str
    shape_params: np.ndarray  # (4,) in [-1, 1]: length, width, height, cabin height
    color: np.ndarray  # RGB in [0, 1]

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        sp = np.asarray(self.shape_params, dtype=np.float64)
        col = np.asarray(self.color, dtype=np.float64)
        if sp.shape != (4,):
            raise ValueError(f"shape_params must have 4 entries, got {sp.shape}")
        if sp.min() < -1.0 or sp.max() > 1.0:
            raise ValueError("shape_params must lie in [-1, 1]")
        if col.shape != (3,) or col.min() < 0 or col.max() > 1:
            raise ValueError("color must be an RGB triple in [0, 1]")
        object.__setattr__(self, "shape_params", sp)
        object.__setattr__(self, "color", col)


@dataclass(frozen=True)
class RenderedSample:
    """One rendered view with its exact keypoints."""

    image: np.ndarray  # (H, W, 3) float32 in [0, 1]
    keypoints: Keypoints
    identity_id: int
    pose_id: int
    category: str


def make_vehicle_specs(num_identities: int, seed: int) -> list[VehicleSpec]:
    """Deterministically draw identity specs (category, shape, color)."""
    rng = np.random.default_rng(seed)
    specs = []
    for identity in range(num_identities):
        category = CATEGORIES[int(rng.integers(len(CATEGORIES)))]
        shape = rng.uniform(-1.0, 1.0, size=4)
        base = _PALETTE[int(rng.integers(len(_PALETTE)))]
        color = np.clip(base + rng.uniform(-0.05, 0.05, size=3), 0.0, 1.0)
        specs.append(VehicleSpec(identity, category, shape, color))
    return specs


def _dims(spec: VehicleSpec):
    length, width, body_h, cab_frac, cab_h, cab_off, wheel_r = _CATEGORY_DIMS[spec.category]
    s = spec.shape_params
    length *= 1.0 + 0.12 * s[0]
    width *= 1.0 + 0.10 * s[1]
    body_h *= 1.0 + 0.12 * s[2]
    cab_h *= 1.0 + 0.15 * s[3]
    return length, width, body_h, cab_frac, cab_h, cab_off, wheel_r


def _box_faces(x0, x1, y0, y1, z0, z1):
    """Axis-aligned box as (corner-quad, outward-normal) faces."""
    return [
        ([(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)], (0, 0, 1)),    # front
        ([(x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0)], (0, 0, -1)),   # rear
        ([(x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0)], (-1, 0, 0)),   # left
        ([(x1, y0, z0), (x1, y0, z1), (x1, y1, z1), (x1, y1, z0)], (1, 0, 0)),    # right
        ([(x0, y1, z0), (x1, y1, z0), (x1, y1, z1), (x0, y1, z1)], (0, 1, 0)),    # top
        ([(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)], (0, -1, 0)),   # bottom
    ]


def _build_model(spec: VehicleSpec):
    """3D faces, colors, landmark points, and landmark normals for one spec."""
    length, width, body_h, cab_frac, cab_h, cab_off, wheel_r = _dims(spec)
    clearance = 0.55 * wheel_r
    y0, y1 = clearance, clearance + body_h
    half_l, half_w = length / 2.0, width / 2.0
    cab_len = cab_frac * length
    cab_c = cab_off * length
    cz0, cz1 = cab_c - cab_len / 2.0, cab_c + cab_len / 2.0
    cab_w = 0.86 * width
    y2 = y1 + cab_h
    wheel_z = 0.38 * length
    wheel_x = half_w + 0.01

    body_color = spec.color
    glass = np.array([0.16, 0.19, 0.26]) + 0.15 * spec.color.mean()
    wheel_color = np.array([0.07, 0.07, 0.08])
    head_color = np.array([0.95, 0.92, 0.62])
    tail_color = np.array([0.75, 0.10, 0.10])

    faces = []  # (points3d, normal, color, depth_bias)
    for quad, normal in _box_faces(-half_w, half_w, y0, y1, -half_l, half_l):
        faces.append((np.array(quad, float), np.array(normal, float), body_color, 0.0))
    for quad, normal in _box_faces(-cab_w / 2, cab_w / 2, y1, y2, cz0, cz1):
        color = body_color * 0.92 if normal == (0, 1, 0) else glass
        faces.append((np.array(quad, float), np.array(normal, float), color, 0.0))

    # Wheels: 12-gon discs in the x = +-wheel_x planes, slightly proud of the body.
    ang = np.linspace(0.0, 2.0 * np.pi, 12, endpoint=False)
    for sx in (-1.0, 1.0):
        for sz in (-1.0, 1.0):
            cy, cz = wheel_r, sz * wheel_z
            pts = np.stack([
                np.full_like(ang, sx * wheel_x),
                cy + wheel_r * np.sin(ang),
                cz + wheel_r * np.cos(ang),
            ], axis=1)
            faces.append((pts, np.array([sx, 0.0, 0.0]), wheel_color, 0.002))

    # Lights: quads on the front/rear faces, nudged outward to paint on top.
    lw, lh = 0.10 * width, 0.35 * body_h
    ly0, ly1 = y0 + 0.55 * body_h, y0 + 0.55 * body_h + lh
    for sx in (-1.0, 1.0):
        x_in = sx * (half_w - 0.06 * width) - sx * lw
        x_out = sx * (half_w - 0.06 * width)
        front = [(x_in, ly0, half_l), (x_out, ly0, half_l), (x_out, ly1, half_l), (x_in, ly1, half_l)]
        rear = [(x_in, ly0, -half_l), (x_out, ly0, -half_l), (x_out, ly1, -half_l), (x_in, ly1, -half_l)]
        faces.append((np.array(front), np.array([0.0, 0.0, 1.0]), head_color, 0.004))
        faces.append((np.array(rear), np.array([0.0, 0.0, -1.0]), tail_color, 0.004))

    ly_mid = (ly0 + ly1) / 2.0
    lx = half_w - 0.06 * width - lw / 2.0
    landmarks = {
        "wheel_front_left": ((-wheel_x, wheel_r, wheel_z), [(-1, 0, 0)]),
        "wheel_front_right": ((wheel_x, wheel_r, wheel_z), [(1, 0, 0)]),
        "wheel_rear_left": ((-wheel_x, wheel_r, -wheel_z), [(-1, 0, 0)]),
        "wheel_rear_right": ((wheel_x, wheel_r, -wheel_z), [(1, 0, 0)]),
        "headlight_left": ((-lx, ly_mid, half_l), [(0, 0, 1)]),
        "headlight_right": ((lx, ly_mid, half_l), [(0, 0, 1)]),
        "taillight_left": ((-lx, ly_mid, -half_l), [(0, 0, -1)]),
        "taillight_right": ((lx, ly_mid, -half_l), [(0, 0, -1)]),
        "roof_front_left": ((-cab_w / 2, y2, cz1), [(0, 1, 0)]),
        "roof_front_right": ((cab_w / 2, y2, cz1), [(0, 1, 0)]),
        "roof_rear_left": ((-cab_w / 2, y2, cz0), [(0, 1, 0)]),
        "roof_rear_right": ((cab_w / 2, y2, cz0), [(0, 1, 0)]),
        "bumper_front_left": ((-half_w, y0, half_l), [(0, 0, 1), (-1, 0, 0)]),
        "bumper_front_right": ((half_w, y0, half_l), [(0, 0, 1), (1, 0, 0)]),
        "bumper_rear_left": ((-half_w, y0, -half_l), [(0, 0, -1), (-1, 0, 0)]),
        "bumper_rear_right": ((half_w, y0, -half_l), [(0, 0, -1), (1, 0, 0)]),
        "window_front_left": ((-cab_w / 2, y1, cz1), [(-1, 0, 0), (0, 0, 1)]),
        "window_front_right": ((cab_w / 2, y1, cz1), [(1, 0, 0), (0, 0, 1)]),
        "window_rear_left": ((-cab_w / 2, y1, cz0), [(-1, 0, 0), (0, 0, -1)]),
        "window_rear_right": ((cab_w / 2, y1, cz0), [(1, 0, 0), (0, 0, -1)]),
    }
    return faces, landmarks


def _rotation(pose_id: int, num_poses: int) -> np.ndarray:
    azimuth = 2.0 * np.pi * pose_id / num_poses
    ca, sa = np.cos(azimuth), np.sin(azimuth)
    ce, se = np.cos(ELEVATION_RAD), np.sin(ELEVATION_RAD)
    rot_y = np.array([[ca, 0, sa], [0, 1, 0], [-sa, 0, ca]])
    rot_x = np.array([[1, 0, 0], [0, ce, -se], [0, se, ce]])
    return rot_x @ rot_y


def _projection(spec: VehicleSpec, resolution: int):
    """Pose-independent scale/offset mapping model coords to pixel coords."""
    faces, landmarks = _build_model(spec)
    pts = np.concatenate([f[0] for f in faces] + [np.array([p for p, _ in landmarks.values()])])
    center = (pts.min(axis=0) + pts.max(axis=0)) / 2.0
    radius = float(np.linalg.norm(pts - center, axis=1).max())
    scale = resolution * (1.0 - 2.0 * IMAGE_MARGIN) / (2.0 * radius)
    return faces, landmarks, center, scale


def _project(points3d: np.ndarray, rot: np.ndarray, center, scale, resolution: int):
    """Returns (N, 2) pixel coords (x, y) and (N,) depth, larger depth = nearer."""
    p = (np.atleast_2d(points3d) - center) @ rot.T
    cx = cy = (resolution - 1) / 2.0
    xy = np.stack([cx + scale * p[:, 0], cy - scale * p[:, 1]], axis=1)
    return xy, p[:, 2]


def _background(identity_id: int, pose_id: int) -> np.ndarray:
    digest = hashlib.sha256(f"bg:{identity_id}:{pose_id}".encode()).digest()
    jitter = (np.frombuffer(digest[:3], dtype=np.uint8).astype(np.float64) / 255.0 - 0.5) * 0.10
    return np.clip(0.82 + jitter, 0.0, 1.0)


_LIGHT_DIR = np.array([-0.3, 0.8, 0.55])
_LIGHT_DIR = _LIGHT_DIR / np.linalg.norm(_LIGHT_DIR)


def _shade(color: np.ndarray, normal_cam: np.ndarray) -> np.ndarray:
    lam = max(0.0, float(normal_cam @ _LIGHT_DIR))
    return np.clip(color * (0.55 + 0.45 * lam), 0.0, 1.0)


def _strictly_inside(point, polygon, margin: float = 0.5) -> bool:
    """Crossing-number containment, excluding a band around every edge.

    Keypoints sit on the corners/edges of their own faces; the margin keeps
    those boundary cases out so only genuinely covering faces count.
    """
    x, y = float(point[0]), float(point[1])
    n = len(polygon)
    inside = False
    for i in range(n):
        x0, y0 = polygon[i]
        x1, y1 = polygon[(i + 1) % n]
        dx, dy = x1 - x0, y1 - y0
        seg2 = dx * dx + dy * dy
        u = 0.0 if seg2 == 0.0 else max(0.0, min(1.0, ((x - x0) * dx + (y - y0) * dy) / seg2))
        if np.hypot(x - (x0 + u * dx), y - (y0 + u * dy)) <= margin:
            return False
        if (y0 > y) != (y1 > y):
            t = (y - y0) / (y1 - y0)
            if x < x0 + t * dx:
                inside = not inside
    return inside


def _rasterize(spec, pose_id, num_poses, resolution, background):
    faces, landmarks, center, scale = _projection(spec, resolution)
    rot = _rotation(pose_id, num_poses)

    size = resolution * SUPERSAMPLE
    if background is None:
        canvas = Image.new("L", (size, size), 0)
    else:
        bg = tuple(int(round(255 * c)) for c in background)
        canvas = Image.new("RGB", (size, size), bg)
    draw = ImageDraw.Draw(canvas)

    order = []
    front = []  # (projected polygon, affine depth-plane coefficients)
    for quad, normal, color, bias in faces:
        xy, depth = _project(quad, rot, center, scale, resolution)
        n_cam = rot @ normal
        if n_cam[2] <= 1e-9:  # back-face cull
            continue
        # planar face under orthographic projection: depth is affine in (x, y)
        design = np.c_[xy[:, 0], xy[:, 1], np.ones(len(xy))]
        coef, *_ = np.linalg.lstsq(design, depth, rcond=None)
        front.append((xy, coef))
        order.append((float(depth.mean()) + bias, xy, normal, color))
    order.sort(key=lambda item: item[0])
    for _, xy, normal, color in order:
        pil_xy = [tuple((c + 0.5) * SUPERSAMPLE) for c in xy]
        if background is None:
            draw.polygon(pil_xy, fill=255)
        else:
            shaded = _shade(color, rot @ normal)
            draw.polygon(pil_xy, fill=tuple(int(round(255 * c)) for c in shaded))

    arr = np.asarray(canvas, dtype=np.float32) / 255.0
    if background is None:
        arr = arr.reshape(resolution, SUPERSAMPLE, resolution, SUPERSAMPLE).mean(axis=(1, 3))
    else:
        arr = arr.reshape(resolution, SUPERSAMPLE, resolution, SUPERSAMPLE, 3).mean(axis=(1, 3))

    names = list(KEYPOINT_NAMES)
    pts3d = np.array([landmarks[n][0] for n in names])
    xy, kp_depth = _project(pts3d, rot, center, scale, resolution)
    visible = np.zeros(NUM_KEYPOINTS, dtype=bool)
    for k, name in enumerate(names):
        facing = any(
            (rot @ np.asarray(normal, float))[2] > 1e-9
            for normal in landmarks[name][1]
        )
        if not facing:
            continue
        # hidden when a strictly nearer face covers the projected point (the
        # margin in _strictly_inside keeps a keypoint's own faces out of this)
        x, y = xy[k]
        occluded = any(
            coef[0] * x + coef[1] * y + coef[2] > kp_depth[k] + 1e-3
            and _strictly_inside(xy[k], quad_xy)
            for quad_xy, coef in front
        )
        visible[k] = not occluded
    return arr, Keypoints(xy=xy, visible=visible)


def render_vehicle(spec: VehicleSpec, pose_id: int, resolution: int,
                   num_poses: int = DEFAULT_NUM_POSES) -> RenderedSample:
    """Render one viewpoint of a vehicle with exact projected keypoints."""
    if not 0 <= pose_id < num_poses:
        raise ValueError(f"pose_id {pose_id} out of range [0, {num_poses})")
    if resolution < 32:
        raise ValueError(f"resolution must be >= 32, got {resolution}")
    background = _background(spec.identity_id, pose_id)
    image, keypoints = _rasterize(spec, pose_id, num_poses, resolution, background)
    return RenderedSample(
        image=image.astype(np.float32),
        keypoints=keypoints,
        identity_id=spec.identity_id,
        pose_id=pose_id,
        category=spec.category,
    )


def render_silhouette(spec: VehicleSpec, pose_id: int, resolution: int,
                      num_poses: int = DEFAULT_NUM_POSES) -> np.ndarray:
    """(H, W) bool foreground mask of the rendered vehicle."""
    mask, _ = _rasterize(spec, pose_id, num_poses, resolution, background=None)
    return mask >= 0.5
