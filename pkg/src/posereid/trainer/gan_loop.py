"""The alternating GAN training loop (paired and unpaired)."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from posereid.errors import ConfigError, NumericalAbortError
from posereid.gan.bundle import autoreconstruct, to_signed
from posereid.gan.networks import Generator, GeneratorConfig, PatchDiscriminator
from posereid.losses.extractor import PerceptualExtractor
from posereid.losses.terms import total_loss
from posereid.losses.weights import CSV_HEADER, LossReport
from posereid.pose.estimator import load_pose_estimator
from posereid.pose.hull import trust_mask
from posereid.pose.keypoints import Keypoints, default_sigma, render_pose_map
from posereid.synthdata.dataset import DatasetManifest, load_image, load_manifest
from posereid.synthdata.sampling import PairingStats, sample_pair_entries
from posereid.trainer.config import RunConfig, config_hash
from posereid.trainer.io_utils import (
    CsvLogger,
    dump_abort,
    load_checkpoint,
    rng_restore,
    rng_snapshot,
    save_checkpoint,
    truncate_csv_after,
)


class EntryCache:
    """Loaded images plus lazily rendered pose maps and trust masks."""

    def __init__(self, manifest: DatasetManifest, sigma: float):
        self.manifest = manifest
        self.sigma = sigma
        self.index = {id(e): i for i, e in enumerate(manifest.entries)}
        self.images = [
            torch.from_numpy(np.ascontiguousarray(load_image(manifest, e).transpose(2, 0, 1)))
            for e in manifest.entries
        ]
        self._pose_maps: dict[int, torch.Tensor] = {}
        self._masks: dict[int, torch.Tensor] = {}

    def image_signed(self, i: int) -> torch.Tensor:
        return to_signed(self.images[i])

    def pose_map(self, i: int) -> torch.Tensor:
        if i not in self._pose_maps:
            entry = self.manifest.entries[i]
            h, w = self.images[i].shape[-2:]
            pm = render_pose_map(entry.keypoints, h, w, self.sigma)
            self._pose_maps[i] = torch.from_numpy(pm.maps)
        return self._pose_maps[i]

    def mask(self, i: int) -> torch.Tensor:
        if i not in self._masks:
            entry = self.manifest.entries[i]
            h, w = self.images[i].shape[-2:]
            tm = trust_mask(entry.keypoints, h, w)
            self._masks[i] = torch.from_numpy(tm.mask.astype(np.float32))
        return self._masks[i]


@dataclass
class GanTrainResult:
    checkpoint_path: str
    csv_path: str
    out_dir: str
    iterations: int
    pair_stats: PairingStats
    history: list[dict[str, float]] = field(default_factory=list)


def build_gan_models(config: RunConfig) -> tuple[Generator, PatchDiscriminator, PatchDiscriminator]:
    gen_cfg = GeneratorConfig(
        image_resolution=config.gan.resolution,
        base_channels=config.gan.base_channels,
        num_downsamples=config.gan.num_downsamples,
        num_residual_blocks=config.gan.num_residual_blocks,
    )
    generator = Generator(gen_cfg)
    d_t = PatchDiscriminator(config.gan.disc_base_channels, config.gan.disc_layers)
    d_o = PatchDiscriminator(config.gan.disc_base_channels, config.gan.disc_layers)
    return generator, d_t, d_o


def _load_frozen_psi(config: RunConfig):
    if not config.gan.psi_path:
        raise ConfigError("gan.psi_path must point at a trained pose estimator checkpoint")
    psi, _meta = load_pose_estimator(config.gan.psi_path)
    psi.eval()
    for p in psi.parameters():
        p.requires_grad_(False)
    return psi


def _batch_indices(cache: EntryCache, entries) -> list[int]:
    return [cache.index[id(e)] for e in entries]


def _assemble(cache: EntryCache, originals: list[int], targets: list[int], with_masks: bool):
    i_o = torch.stack([cache.image_signed(i) for i in originals])
    i_t = torch.stack([cache.image_signed(i) for i in targets])
    p_o = torch.stack([cache.pose_map(i) for i in originals])
    p_t = torch.stack([cache.pose_map(i) for i in targets])
    masks = None
    if with_masks:
        masks = (
            torch.stack([cache.mask(i) for i in targets]),
            torch.stack([cache.mask(i) for i in originals]),
        )
    return i_o, i_t, p_o, p_t, masks


def _estimated_pose_maps(psi, images_signed: torch.Tensor) -> torch.Tensor:
    from posereid.gan.bundle import to_unit

    with torch.no_grad():
        return psi(to_unit(images_signed))


def _checkpoint_payload(config, iteration, generator, d_t, d_o, g_opt, d_opt, rng, stats):
    return {
        "kind": "gan",
        "iteration": iteration,
        "config": config.to_json(),
        "config_hash": config_hash(config),
        "generator": generator.state_dict(),
        "d_t": d_t.state_dict(),
        "d_o": d_o.state_dict(),
        "g_opt": g_opt.state_dict(),
        "d_opt": d_opt.state_dict(),
        "rng": rng_snapshot(rng),
        "pair_draws": stats.draws,
        "pair_same_identity": stats.same_identity,
        "pair_same_category": stats.same_category,
    }


def train_gan(config: RunConfig, resume_from: Optional[str] = None) -> GanTrainResult:
    """Run the alternating loop to config.gan.iterations.

    Per iteration: one generator update on the full objective, then one update
    of both discriminators on theirs. Every logged step appends one CSV row;
    checkpoints land at the configured cadence plus iterations 0 and final.
    A non-finite loss aborts with a batch dump.
    """
    mode = config.gan_mode()
    pair_mode = "paired" if mode == "supervised" else "unpaired"
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    manifest = load_manifest(config.data_root, "train")
    sigma = default_sigma(config.gan.resolution)
    cache = EntryCache(manifest, sigma)

    generator, d_t, d_o = build_gan_models(config)
    psi = _load_frozen_psi(config)
    extractor = PerceptualExtractor(seed=config.gan.extractor_seed)
    weights = config.resolved_weights()

    opt_cfg = config.gan.optimizer
    g_opt = torch.optim.Adam(generator.parameters(), lr=opt_cfg.lr, betas=(opt_cfg.beta1, opt_cfg.beta2))
    d_opt = torch.optim.Adam(
        list(d_t.parameters()) + list(d_o.parameters()),
        lr=opt_cfg.lr,
        betas=(opt_cfg.beta1, opt_cfg.beta2),
    )

    stats = PairingStats()
    start_iter = 0
    if resume_from is not None:
        state = load_checkpoint(resume_from)
        if state.get("kind") != "gan":
            raise ConfigError(f"{resume_from} is not a GAN checkpoint")
        generator.load_state_dict(state["generator"])
        d_t.load_state_dict(state["d_t"])
        d_o.load_state_dict(state["d_o"])
        g_opt.load_state_dict(state["g_opt"])
        d_opt.load_state_dict(state["d_opt"])
        rng = rng_restore(state["rng"])
        start_iter = int(state["iteration"])
        stats.draws = int(state.get("pair_draws", 0))
        stats.same_identity = int(state.get("pair_same_identity", 0))
        stats.same_category = int(state.get("pair_same_category", 0))

    csv_path = os.path.join(out_dir, "gan_losses.csv")
    if resume_from is not None:
        truncate_csv_after(csv_path, start_iter)
    logger = CsvLogger(csv_path, CSV_HEADER, append=resume_from is not None)

    def checkpoint(iteration: int, name: Optional[str] = None) -> str:
        fname = name or f"gan_{iteration:07d}.pt"
        return save_checkpoint(
            os.path.join(out_dir, fname),
            _checkpoint_payload(config, iteration, generator, d_t, d_o, g_opt, d_opt, rng, stats),
        )

    if start_iter == 0:
        checkpoint(0)

    history: list[dict[str, float]] = []
    final_path = os.path.join(out_dir, "gan_final.pt")
    use_estimator_pose = config.gan.pose_source == "estimator"

    with logger:
        for iteration in range(start_iter + 1, config.gan.iterations + 1):
            pairs = [sample_pair_entries(manifest, pair_mode, rng, stats)
                     for _ in range(config.gan.batch_size)]
            originals = _batch_indices(cache, [p[0] for p in pairs])
            targets = _batch_indices(cache, [p[1] for p in pairs])
            i_o, i_t, p_o, p_t, masks = _assemble(
                cache, originals, targets, with_masks=(mode == "unsupervised")
            )
            if use_estimator_pose:
                p_o = _estimated_pose_maps(psi, i_o)
                p_t = _estimated_pose_maps(psi, i_t)

            bundle = autoreconstruct(generator, i_o, p_t, p_o, target=i_t)
            report = total_loss(
                bundle, weights, mode,
                psi=psi, extractor=extractor, d_t=d_t, d_o=d_o,
                masks=masks, surrogate=config.gan.surrogate,
            )

            scalars = report.scalars()
            if not all(np.isfinite(v) for v in scalars.values()):
                path = dump_abort(
                    out_dir, iteration,
                    {"i_o": i_o, "i_t": i_t, "p_o": p_o, "p_t": p_t, "scalars": scalars},
                    note=f"non-finite loss in {mode} mode",
                )
                raise NumericalAbortError(
                    f"non-finite loss at iteration {iteration}; batch dumped to {path}",
                    dump_path=path,
                )

            g_opt.zero_grad(set_to_none=True)
            d_opt.zero_grad(set_to_none=True)
            report.total.backward()
            if config.gan.clip_grad > 0:
                torch.nn.utils.clip_grad_norm_(generator.parameters(), config.gan.clip_grad)
            g_opt.step()

            d_opt.zero_grad(set_to_none=True)
            (report.adv1_disc + report.adv2_disc).backward()
            if config.gan.clip_grad > 0:
                torch.nn.utils.clip_grad_norm_(
                    list(d_t.parameters()) + list(d_o.parameters()), config.gan.clip_grad
                )
            d_opt.step()

            if iteration % config.gan.log_every == 0 or iteration == config.gan.iterations:
                logger.write(report.csv_row(iteration))
                history.append({"step": float(iteration), **scalars})

            if iteration % config.gan.checkpoint_every == 0:
                checkpoint(iteration)

    if mode == "unsupervised" and stats.same_identity:
        raise RuntimeError(
            f"unpaired sampler produced {stats.same_identity} same-identity pairs"
        )

    save_checkpoint(
        final_path,
        _checkpoint_payload(config, config.gan.iterations, generator, d_t, d_o, g_opt, d_opt, rng, stats),
    )
    return GanTrainResult(
        checkpoint_path=final_path,
        csv_path=csv_path,
        out_dir=out_dir,
        iterations=config.gan.iterations,
        pair_stats=stats,
        history=history,
    )


def load_generator(checkpoint_path: str) -> tuple[Generator, RunConfig]:
    """Rebuild the generator (eval mode, frozen) from a GAN checkpoint."""
    state = load_checkpoint(checkpoint_path)
    if state.get("kind") != "gan":
        raise ConfigError(f"{checkpoint_path} is not a GAN checkpoint")
    config = RunConfig.from_json(state["config"])
    generator, _, _ = build_gan_models(config)
    generator.load_state_dict(state["generator"])
    generator.eval()
    for p in generator.parameters():
        p.requires_grad_(False)
    return generator, config
