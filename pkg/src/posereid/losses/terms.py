"""The individual loss terms and their weighted combination.

Conventions, fixed across the package and recorded in run configs:

- pose / perceptual / content: mean-reduced squared L2 over all elements;
- style: mean-reduced squared Frobenius norm of Gram differences, summed
  over the extractor's taps;
- reconstruction: mean-reduced L1;
- images inside bundles live in [-1, 1] and are mapped to [0, 1] before any
  frozen extractor or pose estimator sees them.

Mean reduction keeps every term resolution-independent, which is what makes
fixed weight magnitudes transferable between desk scale and full scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import torch
import torch.nn.functional as F

from posereid.gan.bundle import SynthBundle, to_unit
from posereid.losses.weights import LossReport, LossWeights

Masks = tuple[torch.Tensor, torch.Tensor]  # (mask_t, mask_o), each (B, 1, H, W)

SURROGATES = ("lsgan", "log")


def gram(features: torch.Tensor, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Channel-correlation Gram matrix, normalized by C*H*W.

    ``features`` is (B, C, H, W) or (C, H, W); the optional ``mask`` is
    (B, 1, H, W) / (1, H, W) and multiplies the features before the inner
    product, so both factors are masked.
    """
    squeeze = features.dim() == 3
    f = features.unsqueeze(0) if squeeze else features
    if f.dim() != 4:
        raise ValueError(f"features must be (B, C, H, W) or (C, H, W), got {tuple(features.shape)}")
    if mask is not None:
        m = mask.unsqueeze(0) if mask.dim() == 3 else mask
        if m.shape[-2:] != f.shape[-2:]:
            raise ValueError(
                f"mask spatial dims {tuple(m.shape[-2:])} do not match features "
                f"{tuple(f.shape[-2:])}"
            )
        f = f * m
    b, c, h, w = f.shape
    flat = f.reshape(b, c, h * w)
    out = torch.bmm(flat, flat.transpose(1, 2)) / (c * h * w)
    return out.squeeze(0) if squeeze else out


def pose_loss(
    psi: Callable[[torch.Tensor], torch.Tensor],
    synthetic: torch.Tensor,
    pose_t: torch.Tensor,
    reconstructed: torch.Tensor,
    pose_o: torch.Tensor,
) -> torch.Tensor:
    """Keypoint-response alignment of both generator hops.

    ``psi`` maps [0, 1] images to pose maps; the images come in as [-1, 1].
    """
    est_t = psi(to_unit(synthetic))
    est_o = psi(to_unit(reconstructed))
    for est, ref, tag in ((est_t, pose_t, "P_t"), (est_o, pose_o, "P_o")):
        if est.shape != ref.shape:
            raise ValueError(
                f"pose estimate {tuple(est.shape)} does not match {tag} {tuple(ref.shape)}"
            )
    return F.mse_loss(est_t, pose_t) + F.mse_loss(est_o, pose_o)


def _pool_to(mask: torch.Tensor, feat: torch.Tensor) -> torch.Tensor:
    return F.adaptive_avg_pool2d(mask, feat.shape[-2:])


def _check_masks(masks: Optional[Masks]) -> Masks:
    if masks is None:
        raise RuntimeError("unsupervised mode needs (mask_t, mask_o) trust masks")
    mask_t, mask_o = masks
    if mask_t.shape != mask_o.shape:
        raise ValueError("mask_t and mask_o must share a shape")
    return mask_t, mask_o


def style_loss(
    bundle: SynthBundle,
    extractor: Callable[[torch.Tensor], Sequence[torch.Tensor]],
    mode: str,
    masks: Optional[Masks] = None,
) -> torch.Tensor:
    """Gram-matrix match across all taps.

    Supervised compares the synthetic image against the target; unsupervised
    compares trust-masked Grams of the synthetic image against the ORIGINAL
    (the unpaired target's style is not a ground truth for this vehicle).
    """
    taps_syn = extractor(to_unit(bundle.synthetic))
    if mode == "supervised":
        taps_ref = extractor(to_unit(bundle.require_target("supervised style loss")))
        total = bundle.synthetic.new_zeros(())
        for f_syn, f_ref in zip(taps_syn, taps_ref):
            total = total + ((gram(f_syn) - gram(f_ref)) ** 2).mean()
        return total
    mask_t, mask_o = _check_masks(masks)
    taps_ref = extractor(to_unit(bundle.original))
    total = bundle.synthetic.new_zeros(())
    for f_syn, f_ref in zip(taps_syn, taps_ref):
        g_syn = gram(f_syn, _pool_to(mask_t, f_syn))
        g_ref = gram(f_ref, _pool_to(mask_o, f_ref))
        total = total + ((g_syn - g_ref) ** 2).mean()
    return total


def perceptual_loss(
    bundle: SynthBundle,
    extractor: Callable[[torch.Tensor], Sequence[torch.Tensor]],
    mode: str,
    masks: Optional[Masks] = None,
) -> torch.Tensor:
    """Deepest-tap feature match (masked against the original when unpaired)."""
    deep_syn = extractor(to_unit(bundle.synthetic))[-1]
    if mode == "supervised":
        deep_ref = extractor(to_unit(bundle.require_target("supervised perceptual loss")))[-1]
        return F.mse_loss(deep_syn, deep_ref)
    mask_t, mask_o = _check_masks(masks)
    deep_ref = extractor(to_unit(bundle.original))[-1]
    return F.mse_loss(
        deep_syn * _pool_to(mask_t, deep_syn),
        deep_ref * _pool_to(mask_o, deep_ref),
    )


def content_loss(
    reconstructed: torch.Tensor,
    original: torch.Tensor,
    extractor: Callable[[torch.Tensor], Sequence[torch.Tensor]],
) -> torch.Tensor:
    """All-tap feature match between the round-trip result and the source."""
    taps_rec = extractor(to_unit(reconstructed))
    taps_org = extractor(to_unit(original))
    total = reconstructed.new_zeros(())
    for f_rec, f_org in zip(taps_rec, taps_org):
        total = total + F.mse_loss(f_rec, f_org)
    return total


def reconstruction_loss(bundle: SynthBundle, mode: str, delta: float) -> torch.Tensor:
    """Pixel L1: round-trip always; plus delta-weighted transfer when paired."""
    rec = F.l1_loss(bundle.reconstructed, bundle.original)
    if mode == "supervised":
        target = bundle.require_target("supervised reconstruction loss")
        rec = rec + delta * F.l1_loss(bundle.synthetic, target)
    return rec


@dataclass
class AdversarialTerms:
    """Generator- and discriminator-side values of both adversarial games."""

    adv1_gen: torch.Tensor   # G fooling D_t on the synthetic image
    adv1_disc: torch.Tensor  # D_t separating I_t from I_o^t
    adv2_gen: torch.Tensor   # G fooling D_o on the reconstruction
    adv2_disc: torch.Tensor  # D_o separating I_o from I_o^o


def _gan_pair(
    d: Callable[[torch.Tensor], torch.Tensor],
    real: torch.Tensor,
    fake: torch.Tensor,
    surrogate: str,
) -> tuple[torch.Tensor, torch.Tensor]:
    """(generator objective, discriminator objective) for one real/fake game.

    Discriminator terms see the fake detached; generator terms backpropagate
    through it. ``lsgan`` is the least-squares form (0/1 targets, 0.5-scaled
    discriminator loss); ``log`` is the non-saturating logistic form.
    """
    logits_real = d(real)
    logits_fake_d = d(fake.detach())
    logits_fake_g = d(fake)
    if surrogate == "lsgan":
        disc = 0.5 * (
            ((logits_real - 1.0) ** 2).mean() + (logits_fake_d ** 2).mean()
        )
        gen = ((logits_fake_g - 1.0) ** 2).mean()
    elif surrogate == "log":
        disc = F.binary_cross_entropy_with_logits(
            logits_real, torch.ones_like(logits_real)
        ) + F.binary_cross_entropy_with_logits(
            logits_fake_d, torch.zeros_like(logits_fake_d)
        )
        gen = F.binary_cross_entropy_with_logits(
            logits_fake_g, torch.ones_like(logits_fake_g)
        )
    else:
        raise ValueError(f"surrogate must be one of {SURROGATES}, got {surrogate!r}")
    return gen, disc


def adv_losses(
    d_t: Callable[[torch.Tensor], torch.Tensor],
    d_o: Callable[[torch.Tensor], torch.Tensor],
    bundle: SynthBundle,
    surrogate: str = "lsgan",
) -> AdversarialTerms:
    """Both adversarial games of one step.

    Game 1: D_t sees the target image as real and the synthetic as fake (in
    unpaired mode the target is simply the sampled other-identity image).
    Game 2: D_o sees the original as real and the reconstruction as fake.
    """
    real_t = bundle.require_target("the adversarial loss (real sample for D_t)")
    adv1_gen, adv1_disc = _gan_pair(d_t, real_t, bundle.synthetic, surrogate)
    adv2_gen, adv2_disc = _gan_pair(d_o, bundle.original, bundle.reconstructed, surrogate)
    return AdversarialTerms(adv1_gen, adv1_disc, adv2_gen, adv2_disc)


def total_loss(
    bundle: SynthBundle,
    weights: LossWeights,
    mode: str,
    *,
    psi: Callable[[torch.Tensor], torch.Tensor],
    extractor: Callable[[torch.Tensor], Sequence[torch.Tensor]],
    d_t: Callable[[torch.Tensor], torch.Tensor],
    d_o: Callable[[torch.Tensor], torch.Tensor],
    masks: Optional[Masks] = None,
    surrogate: str = "lsgan",
) -> LossReport:
    """Weighted sum of every term, with all components kept in the report."""
    if mode == "supervised" and masks is not None:
        raise ValueError("supervised mode must not receive trust masks")
    adv = adv_losses(d_t, d_o, bundle, surrogate)
    l_pose = pose_loss(psi, bundle.synthetic, bundle.pose_t, bundle.reconstructed, bundle.pose_o)
    l_style = style_loss(bundle, extractor, mode, masks)
    l_per = perceptual_loss(bundle, extractor, mode, masks)
    l_content = content_loss(bundle.reconstructed, bundle.original, extractor)
    idp = weights.beta1 * l_style + weights.beta2 * l_per + weights.beta3 * l_content
    l_rec = reconstruction_loss(bundle, mode, weights.delta)
    total = (
        weights.lambda1 * adv.adv1_gen
        + weights.lambda2 * adv.adv2_gen
        + weights.lambda3 * l_pose
        + weights.lambda4 * idp
        + weights.lambda5 * l_rec
    )
    return LossReport(
        mode=mode,
        adv1=adv.adv1_gen,
        adv2=adv.adv2_gen,
        pose=l_pose,
        style=l_style,
        perceptual=l_per,
        content=l_content,
        idp=idp,
        rec=l_rec,
        total=total,
        adv1_disc=adv.adv1_disc,
        adv2_disc=adv.adv2_disc,
    )
