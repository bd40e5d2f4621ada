"""Joint metric learning over real and pose-unified synthetic views."""

from posereid.reid.models import ReidBackbone, ReidFeatures, extract_features
from posereid.reid.unified import UnifiedPoseTable, build_pose_table, unify_pose
from posereid.reid.losses import JmlReport, jml_loss, triplet_loss
from posereid.reid.ranking import rank_gallery

__all__ = [
    "JmlReport",
    "ReidBackbone",
    "ReidFeatures",
    "UnifiedPoseTable",
    "build_pose_table",
    "extract_features",
    "jml_loss",
    "rank_gallery",
    "triplet_loss",
    "unify_pose",
]
