"""Keypoint geometry: Gaussian response maps, hull masks, and the pose estimator."""

from posereid.pose.keypoints import (
    NUM_KEYPOINTS,
    Keypoints,
    PoseMap,
    default_sigma,
    render_pose_map,
)
from posereid.pose.hull import TrustMask, convex_hull, pool_mask, trust_mask
from posereid.pose.estimator import (
    PoseEstimator,
    PoseTrainConfig,
    load_pose_estimator,
    save_pose_estimator,
    train_pose_estimator,
)

__all__ = [
    "NUM_KEYPOINTS",
    "Keypoints",
    "PoseMap",
    "TrustMask",
    "PoseEstimator",
    "PoseTrainConfig",
    "convex_hull",
    "default_sigma",
    "load_pose_estimator",
    "pool_mask",
    "render_pose_map",
    "save_pose_estimator",
    "train_pose_estimator",
    "trust_mask",
]
