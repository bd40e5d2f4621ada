"""Command-line entry point.

Subcommands: gen-data, train-pose, train-gan, synthesize, train-reid,
evaluate, report. Exit codes: 0 success, 2 configuration/usage error,
3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

import numpy as np

from posereid.errors import ConfigError, NumericalAbortError, SamplingError


def _add_config_args(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON or TOML config file")
    parser.add_argument("--data", help="dataset root (overrides config)")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="run seed (overrides config)")


def _run_config(args, mode: Optional[str] = None, **extra):
    from posereid.trainer.config import load_run_config

    overrides: dict = dict(extra)
    if mode:
        overrides["mode"] = mode
    if args.data:
        overrides["data_root"] = args.data
    if args.out:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_run_config(getattr(args, "config", None), overrides)


def _cmd_gen_data(args) -> int:
    from posereid.synthdata.dataset import GenerationConfig, build_dataset

    config = GenerationConfig(
        num_identities=args.ids,
        num_poses=args.poses,
        resolution=args.res,
        out_dir=args.out,
        seed=args.seed,
        train_fraction=args.split_frac,
    )
    manifests = build_dataset(config)
    for split, manifest in manifests.items():
        print(f"{split}: {len(manifest)} images")
    return 0


def _cmd_train_pose(args) -> int:
    import os

    from posereid.pose.estimator import PoseTrainConfig, save_pose_estimator, train_pose_estimator
    from posereid.synthdata.dataset import load_manifest

    manifest = load_manifest(args.data, "train")
    config = PoseTrainConfig(
        steps=args.steps, batch_size=args.batch, lr=args.lr, seed=args.seed,
        base=args.base,
    )
    model, history = train_pose_estimator(manifest, config)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "pose_estimator.pt")
    save_pose_estimator(model, path)
    print(f"final mse {history[-1]:.5f} -> {path}")
    return 0


def _cmd_train_gan(args) -> int:
    from posereid.trainer.gan_loop import train_gan

    mode = f"gan_{args.mode}"
    overrides = {"gan": {}}
    if args.iterations:
        overrides["gan"]["iterations"] = args.iterations
    if args.psi:
        overrides["gan"]["psi_path"] = args.psi
    if args.batch:
        overrides["gan"]["batch_size"] = args.batch
    config = _run_config(args, mode=mode, **overrides)
    result = train_gan(config, resume_from=args.resume)
    print(f"checkpoint {result.checkpoint_path}")
    print(f"losses {result.csv_path}")
    if result.history:
        print(f"final total {result.history[-1]['total']:.4g}")
    return 0


def _cmd_synthesize(args) -> int:
    import torch
    from PIL import Image

    from posereid.gan.bundle import to_signed, to_unit
    from posereid.pose.keypoints import Keypoints, default_sigma, render_pose_map
    from posereid.trainer.gan_loop import load_generator

    generator, config = load_generator(args.ckpt)
    res = config.gan.resolution
    with Image.open(args.input) as img:
        image = np.asarray(img.convert("RGB").resize((res, res)), dtype=np.float32) / 255.0

    sigma = default_sigma(res)
    if args.target_pose.endswith(".json"):
        with open(args.target_pose) as fh:
            doc = json.load(fh)
        rows = doc["keypoints"] if isinstance(doc, dict) else doc
        pose = render_pose_map(Keypoints.from_list(rows), res, res, sigma)
        pose_maps = torch.from_numpy(pose.maps)
    else:
        if not args.psi:
            raise ConfigError("--psi is required when --target-pose is an image")
        from posereid.pose.estimator import load_pose_estimator

        psi, _ = load_pose_estimator(args.psi)
        with Image.open(args.target_pose) as img:
            tgt = np.asarray(img.convert("RGB").resize((res, res)), dtype=np.float32) / 255.0
        with torch.no_grad():
            pose_maps = psi(torch.from_numpy(tgt.transpose(2, 0, 1))[None])[0]

    inp = torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1)))[None]
    with torch.no_grad():
        out = to_unit(generator(to_signed(inp), pose_maps[None]))
    array = (out[0].permute(1, 2, 0).numpy() * 255).round().astype(np.uint8)
    Image.fromarray(array).save(args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_train_reid(args) -> int:
    from posereid.trainer.reid_loop import train_reid

    overrides = {"reid": {}}
    if args.gan_ckpt:
        overrides["reid"]["gan_checkpoint"] = args.gan_ckpt
    if args.epochs:
        overrides["reid"]["epochs"] = args.epochs
    config = _run_config(args, mode=f"reid_{args.mode}", **overrides)
    result = train_reid(config, resume_from=args.resume)
    print(f"checkpoint {result.checkpoint_path}")
    if result.val_history:
        last = result.val_history[-1]
        print(f"epoch {last['epoch']:.0f}: mAP {last['map']:.4f} cmc1 {last['cmc1']:.4f}")
    return 0


def _cmd_evaluate(args) -> int:
    from posereid.trainer.evaluate import evaluate

    config = _run_config(args)
    report, files = evaluate(
        config, gan_checkpoint=args.gan_ckpt, reid_checkpoint=args.reid_ckpt,
        max_pairs=args.max_pairs,
    )
    print(json.dumps(report, indent=1))
    for path in files:
        print(f"wrote {path}")
    return 0


def _cmd_report(args) -> int:
    import os

    path = os.path.join(args.run_dir, "report.json")
    if not os.path.exists(path):
        raise ConfigError(f"no report.json under {args.run_dir}; run evaluate first")
    with open(path) as fh:
        report = json.load(fh)

    def fmt(value, digits=4):
        return "-" if value is None else f"{value:.{digits}f}"

    print(f"report {path}")
    print(f"  config_hash : {report.get('config_hash', '-')}")
    print(f"  ssim_mean   : {fmt(report.get('ssim_mean'))}")
    print(f"  fid         : {fmt(report.get('fid'), 2)}")
    print(f"  mAP         : {fmt(report.get('map'))}")
    cmc = report.get("cmc") or {}
    print(f"  CMC@1       : {fmt(cmc.get('1'))}")
    print(f"  CMC@5       : {fmt(cmc.get('5'))}")
    for key, value in (report.get("extras") or {}).items():
        print(f"  {key:<12}: {value:.4f}" if isinstance(value, float) else f"  {key:<12}: {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posereid",
        description="Pose-guided vehicle synthesis and re-identification toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the toy vehicle dataset")
    p.add_argument("--ids", type=int, default=50)
    p.add_argument("--poses", type=int, default=8)
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-frac", type=float, default=0.8, dest="split_frac")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train-pose", help="train the keypoint-response estimator")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=1500)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--base", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train_pose)

    p = sub.add_parser("train-gan", help="train the synthesis GAN")
    _add_config_args(p)
    p.add_argument("--mode", choices=("supervised", "unsupervised"), default="supervised")
    p.add_argument("--iterations", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--psi", help="pose estimator checkpoint")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=_cmd_train_gan)

    p = sub.add_parser("synthesize", help="apply a trained generator to one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--target-pose", required=True, dest="target_pose",
                   help="keypoints JSON or an image (the latter needs --psi)")
    p.add_argument("--psi")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("train-reid", help="train the re-identification model")
    _add_config_args(p)
    p.add_argument("--mode", choices=("baseline", "jml"), default="baseline")
    p.add_argument("--gan-ckpt", dest="gan_ckpt")
    p.add_argument("--epochs", type=int)
    p.add_argument("--resume")
    p.set_defaults(func=_cmd_train_reid)

    p = sub.add_parser("evaluate", help="evaluate checkpoints on the test split")
    _add_config_args(p)
    p.add_argument("--gan-ckpt", dest="gan_ckpt")
    p.add_argument("--reid-ckpt", dest="reid_ckpt")
    p.add_argument("--max-pairs", type=int, default=64, dest="max_pairs")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="pretty-print an evaluation report")
    p.add_argument("--run-dir", required=True, dest="run_dir")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalAbortError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, SamplingError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
