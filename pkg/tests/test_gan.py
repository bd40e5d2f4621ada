"""Architecture contracts for the generator and the patch discriminators."""

import pytest
import torch

from posereid.errors import ConfigError
from posereid.gan import (
    Generator,
    GeneratorConfig,
    PatchDiscriminator,
    autoreconstruct,
    discriminate,
    generate,
    to_signed,
    to_unit,
)


def _images(batch, res, seed=0):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand((batch, 3, res, res), generator=gen) * 2.0 - 1.0


def _poses(batch, res, seed=1):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand((batch, 20, res, res), generator=gen)


def _tiny_generator(res=32, seed=0):
    torch.manual_seed(seed)
    cfg = GeneratorConfig(image_resolution=res, base_channels=8, num_residual_blocks=1)
    return Generator(cfg)


@pytest.mark.parametrize("res", [32, 64, 128])
def test_generator_shape_and_range(res):
    g = _tiny_generator(res)
    with torch.no_grad():
        out = g(_images(2, res), _poses(2, res))
    assert out.shape == (2, 3, res, res)
    assert float(out.min()) >= -1.0
    assert float(out.max()) <= 1.0


def test_generator_resolution_agnostic_weights():
    # fully convolutional: one weight set runs at several resolutions
    g = _tiny_generator(64)
    for res in (32, 64):
        out = g(_images(1, res), _poses(1, res))
        assert out.shape == (1, 3, res, res)


@pytest.mark.parametrize("kwargs", [
    {"image_resolution": 24},                        # not a power of two
    {"image_resolution": 16},                        # below the minimum
    {"image_resolution": 32, "num_downsamples": 4},  # bottleneck under 4 px
    {"num_downsamples": 0},
    {"base_channels": 0},
    {"num_residual_blocks": -1},
])
def test_generator_config_validation(kwargs):
    with pytest.raises(ConfigError):
        GeneratorConfig(**kwargs)


def test_generator_without_residual_blocks_still_runs():
    torch.manual_seed(2)
    g = Generator(GeneratorConfig(image_resolution=32, base_channels=4,
                                  num_residual_blocks=0))
    assert g(_images(1, 32), _poses(1, 32)).shape == (1, 3, 32, 32)


def test_generator_input_validation():
    g = _tiny_generator()
    with pytest.raises(ValueError):
        g(_images(1, 32)[0], _poses(1, 32))  # unbatched image
    with pytest.raises(ValueError):
        g(_images(1, 32), _poses(1, 16))  # spatial mismatch


def test_generator_is_deterministic():
    g = _tiny_generator()
    img, pose = _images(2, 32), _poses(2, 32)
    assert torch.equal(g(img, pose), g(img, pose))


def test_generator_depends_on_the_pose_map():
    g = _tiny_generator()
    img = _images(1, 32)
    assert not torch.equal(g(img, _poses(1, 32, seed=3)), g(img, _poses(1, 32, seed=4)))


def test_autoreconstruct_uses_one_generator():
    g = _tiny_generator()
    img, p_t, p_o = _images(2, 32), _poses(2, 32, seed=5), _poses(2, 32, seed=6)
    bundle = autoreconstruct(g, img, p_t, p_o, target=img)

    assert bundle.synthetic.shape == img.shape
    assert bundle.reconstructed.shape == img.shape
    assert torch.equal(bundle.original, img)
    assert torch.equal(bundle.target, img)
    # both hops are the same module, so the trainable surface is exactly one
    # generator's parameters
    total_params = sum(p.numel() for p in g.parameters())
    hop1 = generate(g, img, p_t)
    hop2 = generate(g, hop1, p_o)
    reachable = {id(p) for p in g.parameters()}
    assert len(reachable) == len(list(g.parameters()))
    assert torch.equal(bundle.synthetic, hop1)
    assert torch.equal(bundle.reconstructed, hop2)
    assert total_params == sum(p.numel() for p in g.parameters())


def test_autoreconstruct_gradients_reach_every_parameter():
    g = _tiny_generator()
    bundle = autoreconstruct(g, _images(2, 32), _poses(2, 32, seed=7), _poses(2, 32, seed=8))
    loss = bundle.reconstructed.abs().mean()
    loss.backward()
    missing = [name for name, p in g.named_parameters() if p.grad is None]
    assert missing == []
    nonzero = sum(int(p.grad.abs().sum() > 0) for p in g.parameters())
    assert nonzero == len(list(g.parameters()))


def test_first_hop_gradient_also_reaches_every_parameter():
    g = _tiny_generator(seed=9)
    synthetic = generate(g, _images(2, 32), _poses(2, 32, seed=10))
    synthetic.pow(2).mean().backward()
    assert all(p.grad is not None for p in g.parameters())


def test_signed_unit_conversions_are_inverses():
    x = torch.linspace(0.0, 1.0, steps=11)
    assert torch.allclose(to_unit(to_signed(x)), x)
    assert float(to_signed(torch.tensor(0.0))) == -1.0
    assert float(to_signed(torch.tensor(1.0))) == 1.0
    assert float(to_unit(torch.tensor(-1.0))) == 0.0
    assert float(to_unit(torch.tensor(1.0))) == 1.0


def test_discriminator_emits_a_patch_grid():
    torch.manual_seed(11)
    d = PatchDiscriminator(base_channels=8, num_layers=3)
    logits = d(_images(2, 64))
    assert logits.dim() == 4
    assert logits.shape[0] == 2
    assert logits.shape[1] == 1
    assert logits.shape[2] > 1 and logits.shape[3] > 1  # a grid, not one score


def test_discriminators_are_independently_initialized():
    torch.manual_seed(12)
    d_t = PatchDiscriminator(base_channels=8, num_layers=2)
    d_o = PatchDiscriminator(base_channels=8, num_layers=2)
    img = _images(1, 32)
    assert not torch.equal(d_t(img), d_o(img))
    shared = {id(p) for p in d_t.parameters()} & {id(p) for p in d_o.parameters()}
    assert shared == set()


def test_discriminator_validation():
    with pytest.raises(ConfigError):
        PatchDiscriminator(num_layers=0)
    d = PatchDiscriminator(base_channels=4, num_layers=2)
    with pytest.raises(ValueError):
        d(torch.zeros((1, 1, 32, 32)))


def test_discriminate_checks_for_finite_logits():
    torch.manual_seed(13)
    d = PatchDiscriminator(base_channels=4, num_layers=2)
    out = discriminate(d, _images(1, 32))
    assert torch.isfinite(out.logits).all()

    with torch.no_grad():
        next(d.parameters()).fill_(float("nan"))
    with pytest.raises(RuntimeError):
        discriminate(d, _images(1, 32))
