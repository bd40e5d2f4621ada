"""Training loops, configuration, evaluation, and the command-line interface."""

from posereid.trainer.config import (
    GanSection,
    OptimizerConfig,
    PoseSection,
    ReidSection,
    RunConfig,
    config_hash,
    load_run_config,
)
from posereid.trainer.gan_loop import GanTrainResult, train_gan
from posereid.trainer.reid_loop import ReidTrainResult, train_reid
from posereid.trainer.evaluate import evaluate

__all__ = [
    "GanSection",
    "GanTrainResult",
    "OptimizerConfig",
    "PoseSection",
    "ReidSection",
    "ReidTrainResult",
    "RunConfig",
    "config_hash",
    "evaluate",
    "load_run_config",
    "train_gan",
    "train_reid",
]
