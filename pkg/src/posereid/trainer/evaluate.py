"""Held-out evaluation: synthesis quality, retrieval quality, plots, report."""

from __future__ import annotations

import json
import os
from typing import Callable, Optional

import matplotlib
import numpy as np
import torch

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from posereid.gan.bundle import to_signed, to_unit
from posereid.losses.extractor import PerceptualExtractor
from posereid.metrics.fid import fid, gaussian_stats
from posereid.metrics.ssim import ssim
from posereid.pose.keypoints import default_sigma, render_pose_map
from posereid.synthdata.dataset import DatasetManifest, load_image, load_manifest
from posereid.trainer.config import RunConfig, config_hash
from posereid.trainer.gan_loop import load_generator
from posereid.trainer.io_utils import read_csv_rows
from posereid.trainer.reid_loop import _ImageCache, eval_retrieval, load_reid_models
from posereid.reid.unified import build_pose_table


def check_split_disjoint(data_root: str) -> dict[str, int]:
    """Hard-fails when any training identity leaks into the test splits."""
    train = load_manifest(data_root, "train")
    query = load_manifest(data_root, "test_query")
    gallery = load_manifest(data_root, "test_gallery")
    train_ids = set(train.identities)
    test_ids = set(query.identities) | set(gallery.identities)
    leaked = train_ids & test_ids
    if leaked:
        raise ValueError(f"split leakage: identities {sorted(leaked)} appear in train and test")
    return {
        "train_images": len(train),
        "query_images": len(query),
        "gallery_images": len(gallery),
        "train_identities": len(train_ids),
        "test_identities": len(test_ids),
    }


def held_out_pairs(data_root: str, max_pairs: int = 64) -> list[tuple]:
    """Deterministic same-identity, different-pose pairs from the test splits.

    Pairs cycle identities round-robin so no identity dominates the cap.
    """
    query = load_manifest(data_root, "test_query")
    gallery = load_manifest(data_root, "test_gallery")
    groups: dict[int, list] = {}
    for manifest in (query, gallery):
        for entry in manifest.entries:
            groups.setdefault(entry.identity_id, []).append((manifest, entry))
    per_identity = []
    for identity in sorted(groups):
        items = sorted(groups[identity], key=lambda me: me[1].pose_id)
        pairs = [
            (items[i], items[(i + 1) % len(items)])
            for i in range(len(items))
            if items[i][1].pose_id != items[(i + 1) % len(items)][1].pose_id
        ]
        per_identity.append(pairs)
    out = []
    depth = 0
    while len(out) < max_pairs and any(depth < len(p) for p in per_identity):
        for pairs in per_identity:
            if depth < len(pairs) and len(out) < max_pairs:
                out.append(pairs[depth])
        depth += 1
    return out


def _entry_tensors(manifest: DatasetManifest, entry, sigma: float):
    image = load_image(manifest, entry)
    h, w = image.shape[:2]
    pose = render_pose_map(entry.keypoints, h, w, sigma)
    return (
        torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))),
        torch.from_numpy(pose.maps),
    )


def synthesis_metrics(
    generator: Callable[[torch.Tensor, torch.Tensor], torch.Tensor],
    data_root: str,
    resolution: int,
    extractor_seed: int = 0,
    max_pairs: int = 64,
    batch_size: int = 16,
) -> dict[str, float]:
    """SSIM/FID of pose transfer plus the identity floor on held-out pairs.

    ``generator`` maps ([-1,1] image, pose map) to a [-1,1] image; any stub
    with that contract works (the identity stub gives the no-op floor).
    """
    pairs = held_out_pairs(data_root, max_pairs)
    if not pairs:
        raise ValueError("no held-out same-identity pose pairs available")
    sigma = default_sigma(resolution)
    extractor = PerceptualExtractor(seed=extractor_seed)

    ssim_synth, ssim_floor, rec_l1 = [], [], []
    feats_synth, feats_real = [], []
    for lo in range(0, len(pairs), batch_size):
        chunk = pairs[lo:lo + batch_size]
        i_o = torch.stack([_entry_tensors(m, e, sigma)[0] for (m, e), _ in chunk])
        i_t = torch.stack([_entry_tensors(m, e, sigma)[0] for _, (m, e) in chunk])
        p_o = torch.stack([_entry_tensors(m, e, sigma)[1] for (m, e), _ in chunk])
        p_t = torch.stack([_entry_tensors(m, e, sigma)[1] for _, (m, e) in chunk])
        with torch.no_grad():
            synth = to_unit(generator(to_signed(i_o), p_t))
            recon = to_unit(generator(to_signed(synth) , p_o))
            f_s = extractor(synth)[-1].mean(dim=(2, 3))
            f_r = extractor(i_t)[-1].mean(dim=(2, 3))
        feats_synth.append(f_s)
        feats_real.append(f_r)
        for k in range(len(chunk)):
            a = synth[k].permute(1, 2, 0).numpy()
            b = i_t[k].permute(1, 2, 0).numpy()
            o = i_o[k].permute(1, 2, 0).numpy()
            ssim_synth.append(ssim(a, b))
            ssim_floor.append(ssim(o, b))
            rec_l1.append(float(np.abs(recon[k].permute(1, 2, 0).numpy() - o).mean()))

    stats_s = gaussian_stats(torch.cat(feats_synth).numpy())
    stats_r = gaussian_stats(torch.cat(feats_real).numpy())
    return {
        "ssim_mean": float(np.mean(ssim_synth)),
        "ssim_floor": float(np.mean(ssim_floor)),
        "rec_l1": float(np.mean(rec_l1)),
        "fid": float(fid(stats_s, stats_r)),
        "num_pairs": len(ssim_synth),
    }


def plot_loss_csv(csv_path: str, out_path: str, columns: tuple[str, ...] = ("total",)) -> Optional[str]:
    rows = read_csv_rows(csv_path)
    if not rows:
        return None
    steps = [float(r["step"]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    for col in columns:
        if col in rows[0]:
            ax.plot(steps, [float(r[col]) for r in rows], label=col, linewidth=1)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def plot_cmc(cmc_points: dict[int, float], out_path: str) -> str:
    ks = sorted(cmc_points)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(ks, [cmc_points[k] for k in ks], marker="o")
    ax.set_xlabel("rank k")
    ax.set_ylabel("CMC@k")
    ax.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def evaluate(
    config: RunConfig,
    gan_checkpoint: Optional[str] = None,
    reid_checkpoint: Optional[str] = None,
    max_pairs: int = 64,
) -> tuple[dict, list[str]]:
    """Full evaluation; writes report.json plus plots into config.out_dir.

    Either checkpoint may be omitted; the corresponding metrics are null in
    the report. Split disjointness is always enforced first.
    """
    counts = check_split_disjoint(config.data_root)
    os.makedirs(config.out_dir, exist_ok=True)
    files: list[str] = []
    report: dict = {
        "ssim_mean": None,
        "fid": None,
        "map": None,
        "cmc": {"1": None, "5": None},
        "counts": counts,
        "config_hash": config_hash(config),
        "extras": {},
    }

    if gan_checkpoint:
        generator, gan_config = load_generator(gan_checkpoint)
        synth = synthesis_metrics(
            generator,
            config.data_root,
            gan_config.gan.resolution,
            extractor_seed=gan_config.gan.extractor_seed,
            max_pairs=max_pairs,
        )
        report["ssim_mean"] = synth["ssim_mean"]
        report["fid"] = synth["fid"]
        report["extras"]["ssim_floor"] = synth["ssim_floor"]
        report["extras"]["rec_l1"] = synth["rec_l1"]
        counts["synthesis_pairs"] = synth["num_pairs"]
        csv_path = os.path.join(os.path.dirname(gan_checkpoint), "gan_losses.csv")
        if os.path.exists(csv_path):
            plot = plot_loss_csv(
                csv_path, os.path.join(config.out_dir, "gan_losses.png"),
                columns=("total", "rec", "pose"),
            )
            if plot:
                files.append(plot)

    if reid_checkpoint:
        m_r, m_s, _head, reid_config = load_reid_models(reid_checkpoint)
        generator = table = None
        sigma = None
        if m_s is not None:
            source = reid_config.reid.gan_checkpoint
            generator, gan_config = load_generator(source)
            table = build_pose_table(gan_config.gan.resolution)
            sigma = default_sigma(gan_config.gan.resolution)
        query_cache = _ImageCache(load_manifest(config.data_root, "test_query"))
        gallery_cache = _ImageCache(load_manifest(config.data_root, "test_gallery"))
        result = eval_retrieval(
            query_cache, gallery_cache, m_r, m_s, generator, table,
            "f_c" if m_s is not None else "f_r", sigma,
        )
        report["map"] = result.map
        report["cmc"] = {"1": result.cmc[1], "5": result.cmc[5]}
        counts["queries_evaluated"] = result.num_queries
        counts["queries_skipped"] = result.skipped_queries
        files.append(plot_cmc(result.cmc, os.path.join(config.out_dir, "cmc.png")))
        csv_path = os.path.join(os.path.dirname(reid_checkpoint), "reid_losses.csv")
        if os.path.exists(csv_path):
            plot = plot_loss_csv(
                csv_path, os.path.join(config.out_dir, "reid_losses.png"),
                columns=("l_tr", "l_idr", "total"),
            )
            if plot:
                files.append(plot)

    report_path = os.path.join(config.out_dir, "report.json")
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=1)
    files.insert(0, report_path)
    return report, files
