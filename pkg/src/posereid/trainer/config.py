"""Run configuration: defaults, file loading, and hashing.

A config serializes verbatim into every checkpoint and report, and its hash
names cached artifacts, so anything that changes training must live here.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

from posereid.errors import ConfigError
from posereid.losses.weights import LossWeights, supervised_weights, unsupervised_weights

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("gan_supervised", "gan_unsupervised", "pose", "reid_baseline", "reid_jml")


@dataclass(frozen=True)
class OptimizerConfig:
    name: str = "adam"
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999

    def __post_init__(self):
        if self.name != "adam":
            raise ConfigError(f"only the adam optimizer is wired up, got {self.name!r}")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")


@dataclass(frozen=True)
class GanSection:
    resolution: int = 64
    base_channels: int = 16
    num_downsamples: int = 2
    num_residual_blocks: int = 4
    disc_base_channels: int = 16
    disc_layers: int = 3
    iterations: int = 5000
    batch_size: int = 4
    surrogate: str = "lsgan"          # or "log"
    pose_source: str = "gt"           # or "estimator"
    extractor_seed: int = 0
    psi_path: str = ""                # pretrained pose estimator checkpoint
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    checkpoint_every: int = 1000
    log_every: int = 1
    clip_grad: float = 0.0            # 0 disables clipping (abort-on-NaN default)

    def __post_init__(self):
        if self.surrogate not in ("lsgan", "log"):
            raise ConfigError(f"surrogate must be lsgan or log, got {self.surrogate!r}")
        if self.pose_source not in ("gt", "estimator"):
            raise ConfigError(f"pose_source must be gt or estimator, got {self.pose_source!r}")
        if self.iterations < 1 or self.batch_size < 1:
            raise ConfigError("iterations and batch_size must be positive")


@dataclass(frozen=True)
class ReidSection:
    feature_dim: int = 128
    base_channels: int = 16
    epochs: int = 40
    num_ids: int = 16
    per_id: int = 4
    margin: float = 0.3
    gan_checkpoint: str = ""          # required for jml mode
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(lr=3.5e-4))
    lr_step: int = 0                  # 0 -> 2/3 of epochs
    lr_gamma: float = 0.1
    augment: bool = True
    augment_synth: bool = False
    eval_every: int = 5               # epochs between validation evals
    checkpoint_every: int = 20        # epochs

    def __post_init__(self):
        if self.epochs < 1 or self.num_ids < 1 or self.per_id < 1:
            raise ConfigError("epochs, num_ids, and per_id must be positive")
        if self.margin < 0:
            raise ConfigError("margin must be non-negative")

    @property
    def batch_size(self) -> int:
        return self.num_ids * self.per_id

    def step_epoch(self) -> int:
        return self.lr_step if self.lr_step > 0 else max(1, (2 * self.epochs) // 3)


@dataclass(frozen=True)
class PoseSection:
    steps: int = 3500
    batch_size: int = 8
    lr: float = 2e-3
    base: int = 32


@dataclass(frozen=True)
class RunConfig:
    mode: str = "gan_supervised"
    data_root: str = "data"
    out_dir: str = "runs/default"
    seed: int = 0
    device: str = "cpu"
    weights: Optional[LossWeights] = None   # None -> mode default
    gan: GanSection = field(default_factory=GanSection)
    reid: ReidSection = field(default_factory=ReidSection)
    pose: PoseSection = field(default_factory=PoseSection)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")

    def resolved_weights(self) -> LossWeights:
        if self.weights is not None:
            return self.weights
        if self.mode == "gan_unsupervised":
            return unsupervised_weights()
        return supervised_weights()

    def gan_mode(self) -> str:
        if self.mode == "gan_supervised":
            return "supervised"
        if self.mode == "gan_unsupervised":
            return "unsupervised"
        raise ConfigError(f"{self.mode} is not a GAN mode")

    def to_json(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["weights"] = self.resolved_weights().to_json()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = dict(doc)
        try:
            if kwargs.get("weights") is not None:
                kwargs["weights"] = LossWeights.from_json(kwargs["weights"])
            for key, section in (("gan", GanSection), ("reid", ReidSection), ("pose", PoseSection)):
                if key in kwargs and isinstance(kwargs[key], dict):
                    sec = dict(kwargs[key])
                    if isinstance(sec.get("optimizer"), dict):
                        sec["optimizer"] = OptimizerConfig(**sec["optimizer"])
                    kwargs[key] = section(**sec)
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc


def config_hash(config: RunConfig) -> str:
    """16-hex-digit digest of the canonical serialized config."""
    canonical = json.dumps(config.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _deep_update(base: dict, extra: dict) -> dict:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def load_run_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Build a config from an optional JSON/TOML file plus override dict.

    Override keys may be nested dicts (e.g. {"gan": {"iterations": 100}}).
    """
    doc: dict = {}
    if path:
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if path.endswith(".toml"):
            try:
                doc = tomllib.loads(raw.decode())
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"bad TOML: {exc}") from exc
        else:
            try:
                doc = json.loads(raw.decode())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"bad JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold an object/table at top level")
    if overrides:
        _deep_update(doc, overrides)
    return RunConfig.from_json(doc)
