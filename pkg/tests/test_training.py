import math

import numpy as np
import pytest
import torch

from cookgen.cis import EmbeddingNet, EmbeddingNetConfig
from cookgen.conditioning import ContextIndex
from cookgen.nets import DiscriminatorConfig, DiscriminatorNet, GeneratorConfig, GeneratorNet
from cookgen.sessions import synth_session
from cookgen.training import (
    GenTrainConfig,
    cis_loss,
    composite_loss,
    gan_loss_d,
    gan_loss_g,
    lr_schedule,
    perceptual_loss,
    pyramid_l1,
    register_perceptual_plugin,
    train_generator,
    write_gen_loss_csv,
    _EXTERNAL_PERCEPTUAL,
)

LN2 = 0.6931471805599453


class _ZeroLogitDisc:
    """Stands in for a discriminator that is maximally unsure everywhere."""

    def forward_pair(self, cond, judged):
        assert cond.shape == judged.shape
        return torch.zeros(cond.shape[0], 1, 6, 6)


# --- schedule ---------------------------------------------------------


def test_lr_schedule_hand_values():
    cfg = GenTrainConfig()
    assert lr_schedule(0, cfg) == 2e-4
    assert lr_schedule(10, cfg) == 2e-4
    assert lr_schedule(25, cfg) == 2e-4
    assert lr_schedule(49, cfg) == 2e-4
    assert lr_schedule(50, cfg) == pytest.approx(2e-4, rel=1e-12)  # continuous knee
    assert lr_schedule(75, cfg) == pytest.approx(1e-4, rel=1e-12)
    assert lr_schedule(99, cfg) == pytest.approx(4e-6, rel=1e-12)


def test_lr_schedule_rejects_out_of_range():
    cfg = GenTrainConfig()
    with pytest.raises(ValueError):
        lr_schedule(-1, cfg)
    with pytest.raises(ValueError):
        lr_schedule(100, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        GenTrainConfig(lambda_perc=-1)
    with pytest.raises(ValueError):
        GenTrainConfig(epochs_const=0, epochs_decay=0)
    with pytest.raises(ValueError):
        GenTrainConfig(perceptual_impl="vgg")


# --- gan loss ---------------------------------------------------------


def test_gan_losses_at_zero_logits_are_ln2(rng):
    d = _ZeroLogitDisc()
    raw = torch.from_numpy(rng.normal(size=(1, 3, 64, 64)).astype(np.float32))
    real = torch.from_numpy(rng.normal(size=(1, 3, 64, 64)).astype(np.float32))
    fake = torch.from_numpy(rng.normal(size=(1, 3, 64, 64)).astype(np.float32))
    assert float(gan_loss_d(d, raw, real, fake)) == pytest.approx(LN2, abs=1e-7)
    assert float(gan_loss_g(d, raw, fake)) == pytest.approx(LN2, abs=1e-7)


def test_gan_loss_d_does_not_touch_generator_graph():
    torch.manual_seed(0)
    disc = DiscriminatorNet(DiscriminatorConfig())
    raw = torch.randn(1, 3, 64, 64)
    real = torch.randn(1, 3, 64, 64)
    fake_leaf = torch.randn(1, 3, 64, 64, requires_grad=True)
    fake = fake_leaf * 1.0
    gan_loss_d(disc, raw, real, fake).backward()
    assert fake_leaf.grad is None  # the fake half is detached inside


# --- perceptual ---------------------------------------------------------


def test_pyramid_l1_zero_on_equal(rng):
    a = torch.from_numpy(rng.normal(size=(1, 3, 16, 16)).astype(np.float32))
    assert float(pyramid_l1(a, a.clone())) == 0.0


def test_pyramid_l1_constant_offset_hand_value():
    a = torch.zeros(1, 3, 8, 8)
    b = torch.full((1, 3, 8, 8), 0.5)
    # blur maps constants to constants, so all three levels see |diff| = 0.5
    assert float(pyramid_l1(a, b)) == pytest.approx(0.5, abs=1e-7)


def test_pyramid_l1_shift_invariant(rng):
    a = torch.from_numpy(rng.normal(size=(1, 3, 16, 16)).astype(np.float32))
    b = torch.from_numpy(rng.normal(size=(1, 3, 16, 16)).astype(np.float32))
    c = torch.full_like(a, 0.3)
    assert float(pyramid_l1(a, b)) == pytest.approx(float(pyramid_l1(a + c, b + c)), abs=1e-6)


def test_perceptual_loss_shape_mismatch():
    with pytest.raises(ValueError):
        perceptual_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 3, 4, 4))


def test_perceptual_external_plugin_roundtrip():
    a, b = torch.zeros(1, 3, 8, 8), torch.ones(1, 3, 8, 8)
    with pytest.raises(ValueError, match="no plugin registered"):
        perceptual_loss(a, b, impl="external-lpips")
    try:
        register_perceptual_plugin("external-lpips", lambda x, y: torch.tensor(0.125))
        assert float(perceptual_loss(a, b, impl="external-lpips")) == 0.125
    finally:
        _EXTERNAL_PERCEPTUAL.pop("external-lpips", None)


# --- cis loss ---------------------------------------------------------


@pytest.fixture()
def frozen_cis():
    torch.manual_seed(0)
    net = EmbeddingNet(EmbeddingNetConfig(embed_dim=32, proj_dims=(32, 16), img_size=16))
    net.eval()
    net.requires_grad_(False)
    return net


def test_cis_loss_requires_frozen_net():
    torch.manual_seed(0)
    net = EmbeddingNet(EmbeddingNetConfig(embed_dim=32, proj_dims=(32, 16), img_size=16))
    with pytest.raises(ValueError, match="frozen"):
        cis_loss(net, torch.zeros(1, 3, 16, 16), torch.zeros(1, 3, 16, 16))


def test_cis_loss_zero_for_identical(frozen_cis, rng):
    x = torch.from_numpy(rng.normal(size=(1, 3, 16, 16)).astype(np.float32))
    assert float(cis_loss(frozen_cis, x, x.clone())) == pytest.approx(0.0, abs=1e-6)


def test_cis_loss_grad_reaches_fake_only(frozen_cis, rng):
    real = torch.from_numpy(rng.normal(size=(1, 3, 16, 16)).astype(np.float32))
    fake = torch.from_numpy(rng.normal(size=(1, 3, 16, 16)).astype(np.float32))
    fake.requires_grad_(True)
    loss = cis_loss(frozen_cis, real, fake)
    loss.backward()
    assert fake.grad is not None and torch.isfinite(fake.grad).all()
    assert all(p.grad is None for p in frozen_cis.parameters())


# --- composite ---------------------------------------------------------


def test_composite_loss_hand_value():
    # defaults (1, 50, 50): 1*0.7 + 50*0.1 + 50*0.2 = 15.7
    assert composite_loss(0.7, 0.1, 0.2) == pytest.approx(15.7, abs=1e-12)


def test_composite_loss_custom_weights():
    cfg = GenTrainConfig(lambda_gan=2.0, lambda_perc=0.0, lambda_cis=1.0)
    assert composite_loss(0.5, 9.9, 0.25, cfg) == pytest.approx(1.25)


# --- training loop ---------------------------------------------------------


def _micro_setup():
    session = synth_session(
        __import__("cookgen.sessions", fromlist=["SyntheticRecipeSpec"]).SyntheticRecipeSpec(
            name="p", shape_kind="disc", seed=3
        ),
        n_frames=8,
        img_size=32,
    )
    torch.manual_seed(0)
    gen = GeneratorNet(GeneratorConfig(img_size=32, base_dim=16), ContextIndex())
    disc = DiscriminatorNet(DiscriminatorConfig())
    cis = EmbeddingNet(EmbeddingNetConfig(embed_dim=32, proj_dims=(32, 16), img_size=32))
    cis.eval()
    return [session], gen, disc, cis


def _micro_cfg(**kw):
    base = dict(epochs_const=1, epochs_decay=1, augment=True, seed=0)
    base.update(kw)
    return GenTrainConfig(**base)


def test_train_generator_micro_run():
    sessions, gen, disc, cis = _micro_setup()
    history = train_generator(sessions, gen, disc, cis, _micro_cfg())
    assert len(history) == 2
    assert all(math.isfinite(h.composite) for h in history)
    assert history[0].lr == 2e-4
    assert history[1].lr == pytest.approx(2e-4)  # knee epoch of 1+1
    # contexts were registered for every (recipe, state) seen in training
    assert gen.index.pairs() == [("p", "basic"), ("p", "extended"), ("p", "standard")]


def test_train_generator_deterministic():
    h1 = train_generator(*(lambda s: (s[0], s[1], s[2], s[3]))(_micro_setup()), _micro_cfg())
    h2 = train_generator(*(lambda s: (s[0], s[1], s[2], s[3]))(_micro_setup()), _micro_cfg())
    assert [h.composite for h in h1] == [h.composite for h in h2]
    assert [h.gan_d for h in h1] == [h.gan_d for h in h2]


def test_train_generator_rejects_empty():
    _, gen, disc, cis = _micro_setup()
    with pytest.raises(ValueError):
        train_generator([], gen, disc, cis, _micro_cfg())


def test_train_generator_flags_non_finite_losses():
    sessions, gen, disc, cis = _micro_setup()
    try:
        register_perceptual_plugin(
            "external-lpips", lambda a, b: torch.tensor(float("nan"), requires_grad=True)
        )
        with pytest.raises(RuntimeError, match="non-finite"):
            train_generator(
                sessions, gen, disc, cis, _micro_cfg(perceptual_impl="external-lpips")
            )
    finally:
        _EXTERNAL_PERCEPTUAL.pop("external-lpips", None)


def test_write_gen_loss_csv(tmp_path):
    sessions, gen, disc, cis = _micro_setup()
    history = train_generator(sessions, gen, disc, cis, _micro_cfg())
    p = tmp_path / "gen.csv"
    write_gen_loss_csv(history, p)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "epoch,gan_d,gan_g,perc,cis,composite,lr"
    assert len(lines) == 3
