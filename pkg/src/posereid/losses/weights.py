"""Loss weight bundles and the per-step loss report."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import torch

MODES = ("supervised", "unsupervised")


@dataclass(frozen=True)
class LossWeights:
    """Weights for the total objective.

    ``lambda1..lambda5`` scale the adversarial pair, pose, identity-preserving,
    and reconstruction terms; ``beta1..beta3`` mix style/perceptual/content
    inside the identity-preserving term; ``delta`` weights the transfer half of
    the supervised reconstruction loss.
    """

    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float
    lambda5: float
    beta1: float
    beta2: float
    beta3: float
    delta: float = 4.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{f.name} must be finite and non-negative, got {value}")

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json(cls, obj: dict) -> "LossWeights":
        return cls(**{f.name: float(obj[f.name]) for f in fields(cls)})


def supervised_weights() -> LossWeights:
    """Defaults for paired training."""
    return LossWeights(
        lambda1=1.0, lambda2=0.2, lambda3=10_000.0, lambda4=1.0, lambda5=2.0,
        beta1=1000.0, beta2=0.5, beta3=0.05, delta=4.0,
    )


def unsupervised_weights() -> LossWeights:
    """Defaults for unpaired training. ``delta`` is unused in this mode."""
    return LossWeights(
        lambda1=5.0, lambda2=1.0, lambda3=20_000.0, lambda4=1.0, lambda5=0.5,
        beta1=500.0, beta2=0.01, beta3=0.1, delta=4.0,
    )


CSV_HEADER = "step,mode,adv1,adv2,pose,style,per,content,idp,rec,total"


@dataclass
class LossReport:
    """All loss components of one step, kept as graph-attached scalars.

    ``adv1``/``adv2`` are the generator-side adversarial values (the ones that
    enter ``total``); the discriminator-side values ride along separately for
    the alternating optimization. Every non-adversarial component is >= 0;
    least-squares adversarial terms are also >= 0, while the log-form ones are
    unbounded above.
    """

    mode: str
    adv1: torch.Tensor
    adv2: torch.Tensor
    pose: torch.Tensor
    style: torch.Tensor
    perceptual: torch.Tensor
    content: torch.Tensor
    idp: torch.Tensor
    rec: torch.Tensor
    total: torch.Tensor
    adv1_disc: torch.Tensor
    adv2_disc: torch.Tensor

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    def scalars(self) -> dict[str, float]:
        keys = ("adv1", "adv2", "pose", "style", "perceptual", "content",
                "idp", "rec", "total", "adv1_disc", "adv2_disc")
        return {k: float(getattr(self, k).detach()) for k in keys}

    def csv_row(self, step: int) -> str:
        s = self.scalars()
        values = [s[k] for k in ("adv1", "adv2", "pose", "style", "perceptual",
                                 "content", "idp", "rec", "total")]
        return ",".join([str(step), self.mode] + [f"{v:.6g}" for v in values])
