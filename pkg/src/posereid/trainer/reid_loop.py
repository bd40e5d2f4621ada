"""Re-ID training: M_R baseline and the joint M_R + M_S objective."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from posereid.errors import ConfigError, NumericalAbortError
from posereid.metrics.retrieval import RetrievalResult, cmc_map
from posereid.pose.keypoints import default_sigma
from posereid.reid.losses import jml_loss_from_tensors, make_concat_head, triplet_loss
from posereid.reid.models import ReidBackbone
from posereid.reid.ranking import rank_gallery
from posereid.reid.unified import UnifiedPoseTable, build_pose_table, unify_pose_batch
from posereid.synthdata.dataset import DatasetManifest, load_image, load_manifest
from posereid.synthdata.sampling import sample_reid_batch_entries
from posereid.trainer.config import RunConfig, config_hash
from posereid.trainer.gan_loop import load_generator
from posereid.trainer.io_utils import (
    CsvLogger,
    dump_abort,
    load_checkpoint,
    rng_restore,
    rng_snapshot,
    save_checkpoint,
    sha256_file,
    truncate_csv_after,
)

REID_CSV_HEADER = "step,epoch,mode,l_tr,l_idr,l_tc,l_idc,total"


class _ImageCache:
    def __init__(self, manifest: DatasetManifest):
        self.manifest = manifest
        self.index = {id(e): i for i, e in enumerate(manifest.entries)}
        self.images = torch.stack([
            torch.from_numpy(np.ascontiguousarray(load_image(manifest, e).transpose(2, 0, 1)))
            for e in manifest.entries
        ])

    def batch(self, entries) -> torch.Tensor:
        return self.images[[self.index[id(e)] for e in entries]]


def augment_batch(images: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
    """Random horizontal flip, shifted crop, and erasing, per image.

    Pure function of (images, generator state); used on the real branch only
    by default.
    """
    b, _, h, w = images.shape
    out = images.clone()

    flip = torch.rand(b, generator=gen) < 0.5
    if flip.any():
        out[flip] = torch.flip(out[flip], dims=[3])

    pad = max(2, h // 16)
    padded = F.pad(out, (pad, pad, pad, pad), mode="replicate")
    offsets = torch.randint(0, 2 * pad + 1, (b, 2), generator=gen)
    crops = [padded[i, :, oy:oy + h, ox:ox + w] for i, (oy, ox) in enumerate(offsets.tolist())]
    out = torch.stack(crops)

    erase = torch.rand(b, generator=gen) < 0.5
    for i in range(b):
        if not erase[i]:
            continue
        area = (0.02 + 0.18 * torch.rand((), generator=gen).item()) * h * w
        aspect = 0.3 * (3.3 / 0.3) ** torch.rand((), generator=gen).item()
        eh = min(h, max(1, int(round((area * aspect) ** 0.5))))
        ew = min(w, max(1, int(round((area / aspect) ** 0.5))))
        top = int(torch.randint(0, h - eh + 1, (), generator=gen))
        left = int(torch.randint(0, w - ew + 1, (), generator=gen))
        out[i, :, top:top + eh, left:left + ew] = 0.5
    return out


@dataclass
class PkBatchStats:
    batches: int = 0
    violations: int = 0

    def record(self, entries, num_ids: int, per_id: int):
        self.batches += 1
        ids = [e.identity_id for e in entries]
        counts = {i: ids.count(i) for i in set(ids)}
        if len(counts) != num_ids or any(c != per_id for c in counts.values()):
            self.violations += 1


@dataclass
class ReidTrainResult:
    checkpoint_path: str
    csv_path: str
    out_dir: str
    epochs: int
    pk_stats: PkBatchStats
    val_history: list[dict[str, float]] = field(default_factory=list)
    gan_hash_before: str = ""
    gan_hash_after: str = ""


def _l2_normalize(x: torch.Tensor) -> torch.Tensor:
    return x / x.norm(dim=1, keepdim=True).clamp_min(1e-12)


def reid_features(
    images: torch.Tensor,
    categories: Sequence[str],
    m_r: ReidBackbone,
    m_s: Optional[ReidBackbone],
    generator,
    table: Optional[UnifiedPoseTable],
    feature_source: str,
    sigma: Optional[float] = None,
    batch_size: int = 64,
) -> torch.Tensor:
    """Ranking features: L2-normalized f_r (baseline) or f_c (jml)."""
    if feature_source not in ("f_r", "f_c"):
        raise ValueError(f"feature_source must be f_r or f_c, got {feature_source!r}")
    was_training = m_r.training
    m_r.eval()
    if m_s is not None:
        m_s.eval()
    chunks = []
    with torch.no_grad():
        for lo in range(0, len(images), batch_size):
            img = images[lo:lo + batch_size]
            f = m_r.embed(img)
            if feature_source == "f_c":
                unified = unify_pose_batch(
                    img, categories[lo:lo + batch_size], table, generator, sigma=sigma
                )
                f = torch.cat([f, m_s.embed(unified)], dim=1)
            chunks.append(f)
    m_r.train(was_training)
    if m_s is not None:
        m_s.train(was_training)
    return _l2_normalize(torch.cat(chunks))


def eval_retrieval(
    query_cache: _ImageCache,
    gallery_cache: _ImageCache,
    m_r: ReidBackbone,
    m_s: Optional[ReidBackbone],
    generator,
    table: Optional[UnifiedPoseTable],
    feature_source: str,
    sigma: Optional[float] = None,
) -> RetrievalResult:
    q_feat = reid_features(
        query_cache.images, [e.category for e in query_cache.manifest.entries],
        m_r, m_s, generator, table, feature_source, sigma,
    )
    g_feat = reid_features(
        gallery_cache.images, [e.category for e in gallery_cache.manifest.entries],
        m_r, m_s, generator, table, feature_source, sigma,
    )
    _, dist = rank_gallery(q_feat, g_feat, metric="euclidean")
    return cmc_map(
        dist,
        [e.identity_id for e in query_cache.manifest.entries],
        [e.identity_id for e in gallery_cache.manifest.entries],
        ranks=(1, 5),
    )


def _reid_checkpoint(config, epoch, m_r, m_s, head_c, opt, rng, aug_gen, gan_hash):
    payload = {
        "kind": "reid",
        "mode": config.mode,
        "epoch": epoch,
        "config": config.to_json(),
        "config_hash": config_hash(config),
        "class_ids": list(m_r.class_ids),
        "m_r": m_r.state_dict(),
        "opt": opt.state_dict(),
        "rng": rng_snapshot(rng),
        "aug_rng": aug_gen.get_state(),
        "gan_checkpoint_hash": gan_hash,
    }
    if m_s is not None:
        payload["m_s"] = m_s.state_dict()
        payload["head_c"] = head_c.state_dict()
    return payload


def train_reid(config: RunConfig, resume_from: Optional[str] = None) -> ReidTrainResult:
    """Train the baseline (M_R only) or joint (Eq.-16-style) re-id model.

    Epoch-end retrieval on the test query/gallery split lands in the result's
    ``val_history``; losses stream to CSV per step.
    """
    if config.mode not in ("reid_baseline", "reid_jml"):
        raise ConfigError(f"train_reid got mode {config.mode!r}")
    joint = config.mode == "reid_jml"
    section = config.reid
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    aug_gen = torch.Generator().manual_seed(config.seed + 1)

    train_manifest = load_manifest(config.data_root, "train")
    query_cache = _ImageCache(load_manifest(config.data_root, "test_query"))
    gallery_cache = _ImageCache(load_manifest(config.data_root, "test_gallery"))
    cache = _ImageCache(train_manifest)
    class_ids = train_manifest.identities
    if len(class_ids) < section.num_ids:
        raise ConfigError(
            f"num_ids={section.num_ids} exceeds the {len(class_ids)} training identities"
        )

    m_r = ReidBackbone(class_ids, section.feature_dim, section.base_channels)
    m_s = head_c = None
    generator = table = None
    sigma = None
    gan_hash = ""
    if joint:
        if not section.gan_checkpoint:
            raise ConfigError("reid.gan_checkpoint is required in jml mode")
        gan_hash = sha256_file(section.gan_checkpoint)
        generator, gan_config = load_generator(section.gan_checkpoint)
        resolution = gan_config.gan.resolution
        table = build_pose_table(resolution)
        sigma = default_sigma(resolution)
        m_s = ReidBackbone(class_ids, section.feature_dim, section.base_channels)
        head_c = make_concat_head(m_r, m_s)

    params = list(m_r.parameters())
    if joint:
        params += list(m_s.parameters()) + list(head_c.parameters())
    opt_cfg = section.optimizer
    opt = torch.optim.Adam(params, lr=opt_cfg.lr, betas=(opt_cfg.beta1, opt_cfg.beta2))
    scheduler = torch.optim.lr_scheduler.StepLR(
        opt, step_size=section.step_epoch(), gamma=section.lr_gamma
    )

    start_epoch = 0
    if resume_from is not None:
        state = load_checkpoint(resume_from)
        if state.get("kind") != "reid" or state.get("mode") != config.mode:
            raise ConfigError(f"{resume_from} is not a {config.mode} checkpoint")
        m_r.load_state_dict(state["m_r"])
        if joint:
            m_s.load_state_dict(state["m_s"])
            head_c.load_state_dict(state["head_c"])
        opt.load_state_dict(state["opt"])
        rng = rng_restore(state["rng"])
        aug_gen.set_state(state["aug_rng"])
        start_epoch = int(state["epoch"])
        for _ in range(start_epoch):
            scheduler.step()

    steps_per_epoch = max(1, len(train_manifest) // section.batch_size)
    csv_path = os.path.join(out_dir, "reid_losses.csv")
    if resume_from is not None:
        truncate_csv_after(csv_path, start_epoch * steps_per_epoch)
    logger = CsvLogger(csv_path, REID_CSV_HEADER, append=resume_from is not None)
    pk_stats = PkBatchStats()
    val_history: list[dict[str, float]] = []
    step = start_epoch * steps_per_epoch

    with logger:
        for epoch in range(start_epoch + 1, section.epochs + 1):
            for _ in range(steps_per_epoch):
                step += 1
                entries = sample_reid_batch_entries(
                    train_manifest, section.num_ids, section.per_id, rng
                )
                pk_stats.record(entries, section.num_ids, section.per_id)
                images = cache.batch(entries)
                labels = m_r.label_index([e.identity_id for e in entries])
                real_inputs = augment_batch(images, aug_gen) if section.augment else images

                if joint:
                    synth_inputs = (
                        augment_batch(images, aug_gen) if section.augment_synth else images
                    )
                    total, report = jml_loss_from_tensors(
                        synth_inputs, real_inputs, [e.category for e in entries], labels,
                        m_r, m_s, generator, table, head_c,
                        margin=section.margin, sigma=sigma,
                    )
                    row = report.scalars()
                else:
                    f_r, logits = m_r(real_inputs)
                    l_tr = triplet_loss(f_r, labels, section.margin)
                    l_idr = F.cross_entropy(logits, labels)
                    total = l_tr + l_idr
                    row = {
                        "l_tr": float(l_tr.detach()), "l_idr": float(l_idr.detach()),
                        "l_tc": 0.0, "l_idc": 0.0, "total": float(total.detach()),
                    }

                if not all(np.isfinite(v) for v in row.values()):
                    path = dump_abort(out_dir, step, {"images": images, "row": row},
                                      note=f"non-finite loss in {config.mode}")
                    raise NumericalAbortError(
                        f"non-finite re-id loss at step {step}; dumped to {path}",
                        dump_path=path,
                    )

                opt.zero_grad(set_to_none=True)
                total.backward()
                opt.step()
                logger.write(",".join(
                    [str(step), str(epoch), config.mode]
                    + [f"{row[k]:.6g}" for k in ("l_tr", "l_idr", "l_tc", "l_idc", "total")]
                ))
            scheduler.step()

            if epoch % section.eval_every == 0 or epoch == section.epochs:
                result = eval_retrieval(
                    query_cache, gallery_cache, m_r, m_s, generator, table,
                    "f_c" if joint else "f_r", sigma,
                )
                val_history.append({
                    "epoch": float(epoch), "map": result.map,
                    "cmc1": result.cmc[1], "cmc5": result.cmc[5],
                })

            if epoch % section.checkpoint_every == 0 and epoch < section.epochs:
                save_checkpoint(
                    os.path.join(out_dir, f"reid_{epoch:04d}.pt"),
                    _reid_checkpoint(config, epoch, m_r, m_s, head_c, opt, rng, aug_gen, gan_hash),
                )

    final_path = save_checkpoint(
        os.path.join(out_dir, "reid_final.pt"),
        _reid_checkpoint(config, section.epochs, m_r, m_s, head_c, opt, rng, aug_gen, gan_hash),
    )
    return ReidTrainResult(
        checkpoint_path=final_path,
        csv_path=csv_path,
        out_dir=out_dir,
        epochs=section.epochs,
        pk_stats=pk_stats,
        val_history=val_history,
        gan_hash_before=gan_hash,
        gan_hash_after=sha256_file(section.gan_checkpoint) if joint else "",
    )


def load_reid_models(checkpoint_path: str):
    """Rebuild (m_r, m_s, head_c, config) from a re-id checkpoint.

    ``m_s`` and ``head_c`` are None for baseline checkpoints.
    """
    state = load_checkpoint(checkpoint_path)
    if state.get("kind") != "reid":
        raise ConfigError(f"{checkpoint_path} is not a re-id checkpoint")
    config = RunConfig.from_json(state["config"])
    section = config.reid
    class_ids = [int(c) for c in state["class_ids"]]
    m_r = ReidBackbone(class_ids, section.feature_dim, section.base_channels)
    m_r.load_state_dict(state["m_r"])
    m_r.eval()
    m_s = head_c = None
    if "m_s" in state:
        m_s = ReidBackbone(class_ids, section.feature_dim, section.base_channels)
        m_s.load_state_dict(state["m_s"])
        m_s.eval()
        head_c = make_concat_head(m_r, m_s)
        head_c.load_state_dict(state["head_c"])
    return m_r, m_s, head_c, config
