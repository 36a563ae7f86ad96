import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from cookgen.cis import (
    CisTrainConfig,
    EmbeddingNet,
    EmbeddingNetConfig,
    cis_batch_loss,
    cis_lr_schedule,
    embed,
    embed_batch,
    f_cul,
    f_cul_unclamped,
    predicted_matrix,
    register_backbone,
    session_batches,
    train_cis,
    write_loss_csv,
)
from cookgen.sessions import SimilarityMatrix, synth_session, temporal_matrix


def _img(seed, size=32):
    return np.random.default_rng(seed).uniform(-1, 1, (size, size, 3)).astype(np.float32)


# --- embeddings ---------------------------------------------------------


def test_embed_is_unit_norm(tiny_cis):
    z = embed(tiny_cis, _img(0))
    assert z.shape == (32,)
    assert np.linalg.norm(z) == pytest.approx(1.0, abs=1e-6)


def test_embed_shape_check(tiny_cis):
    with pytest.raises(ValueError):
        embed(tiny_cis, _img(0, size=16))


def test_embed_batch_matches_single(tiny_cis):
    imgs = [_img(i) for i in range(3)]
    batch = embed_batch(tiny_cis, imgs)
    assert batch.shape == (3, 32)
    for i, im in enumerate(imgs):
        assert np.allclose(batch[i], embed(tiny_cis, im), atol=1e-5)


def test_f_cul_self_similarity_is_one(tiny_cis):
    img = _img(1)
    assert f_cul(tiny_cis, img, img) == pytest.approx(1.0, abs=1e-6)


def test_f_cul_symmetric_and_clamped(tiny_cis):
    a, b = _img(2), _img(3)
    s = f_cul(tiny_cis, a, b)
    assert s == f_cul(tiny_cis, b, a)
    assert 0.0 <= s <= 1.0
    raw = f_cul_unclamped(tiny_cis, a, b)
    assert -1.0 - 1e-6 <= raw <= 1.0 + 1e-6
    assert s == min(1.0, max(0.0, raw))


def test_predicted_matrix_properties(tiny_cis):
    m = predicted_matrix(tiny_cis, [_img(i) for i in range(4)])
    assert m.kind == "predicted"
    assert m.values.shape == (4, 4)
    assert np.array_equal(m.values, m.values.T)
    assert np.all(np.diag(m.values) == 1.0)
    with pytest.raises(ValueError):
        predicted_matrix(tiny_cis, [_img(0)])


def test_custom_backbone_registry():
    class Flat(torch.nn.Module):
        def __init__(self, cfg):
            super().__init__()
            self.fc = torch.nn.Linear(3 * cfg.img_size**2, cfg.embed_dim)

        def forward(self, x):
            return self.fc(x.flatten(1))

    register_backbone("flat", Flat)
    net = EmbeddingNet(EmbeddingNetConfig(backbone="flat", embed_dim=16, proj_dims=(16, 8), img_size=8))
    z = net(torch.randn(2, 3, 8, 8))
    assert z.shape == (2, 8)
    with pytest.raises(ValueError, match="registered"):
        EmbeddingNet(EmbeddingNetConfig(backbone="resnet-giant"))


# --- loss ---------------------------------------------------------


def test_cis_batch_loss_hand_value():
    pred = SimilarityMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]), kind="predicted")
    truth = SimilarityMatrix(np.ones((2, 2)), kind="ground_truth_temporal")
    # squared errors: 0, 1, 1, 0 -> mean 0.5
    assert float(cis_batch_loss(pred, truth)) == pytest.approx(0.5, abs=1e-12)


def test_cis_batch_loss_accepts_arrays_and_tensors():
    a = np.array([[1.0, 0.5], [0.5, 1.0]])
    b = torch.tensor([[1.0, 0.25], [0.25, 1.0]])
    v = float(cis_batch_loss(a, b))
    assert v == pytest.approx((2 * 0.25**2) / 4, abs=1e-12)


def test_cis_batch_loss_shape_mismatch():
    with pytest.raises(ValueError):
        cis_batch_loss(np.ones((2, 2)), np.ones((3, 3)))


@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
@settings(max_examples=25)
def test_cis_batch_loss_nonnegative_zero_iff_equal(n, seed):
    g = np.random.default_rng(seed)
    a = g.uniform(0, 1, (n, n))
    b = g.uniform(0, 1, (n, n))
    assert float(cis_batch_loss(a, b)) >= 0.0
    assert float(cis_batch_loss(a, a)) == 0.0


# --- schedule ---------------------------------------------------------


def test_cis_lr_schedule_hand_values():
    cfg = CisTrainConfig()
    assert cis_lr_schedule(0, cfg) == pytest.approx(1e-4, rel=1e-12)
    assert cis_lr_schedule(9, cfg) == pytest.approx(1e-4, rel=1e-12)
    assert cis_lr_schedule(10, cfg) == pytest.approx(6e-5, rel=1e-12)
    assert cis_lr_schedule(25, cfg) == pytest.approx(3.6e-5, rel=1e-12)
    assert cis_lr_schedule(99, cfg) == pytest.approx(1e-4 * 0.6**9, rel=1e-12)
    with pytest.raises(ValueError):
        cis_lr_schedule(-1, cfg)


# --- batching ---------------------------------------------------------


def test_session_batches_cover_in_order(disc_spec):
    s = synth_session(disc_spec, n_frames=10, img_size=32)
    batches = session_batches(s, batch_size=4)
    assert batches == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]


# --- training ---------------------------------------------------------


@pytest.fixture(scope="module")
def micro_corpus():
    from cookgen.sessions import SyntheticRecipeSpec

    specs = [
        SyntheticRecipeSpec(name="a", shape_kind="disc", seed=1),
        SyntheticRecipeSpec(name="b", shape_kind="rectangle", seed=2),
    ]
    return [synth_session(sp, n_frames=6, img_size=32) for sp in specs]


def _micro_cfg():
    return CisTrainConfig(epochs=2, batch_size=4, augment=False, seed=0)


def _micro_net_cfg():
    return EmbeddingNetConfig(embed_dim=32, proj_dims=(32, 16), img_size=32)


def test_train_cis_runs_and_learns_shapes(micro_corpus):
    net, history = train_cis(micro_corpus, cfg=_micro_cfg(), net_cfg=_micro_net_cfg())
    assert len(history) == 2
    assert all(np.isfinite(h.mean_loss) for h in history)
    assert history[0].lr == pytest.approx(1e-4)
    assert not net.training  # left in eval mode
    z = embed(net, micro_corpus[0].frames[0].image)
    assert np.linalg.norm(z) == pytest.approx(1.0, abs=1e-5)


def test_train_cis_deterministic(micro_corpus):
    _, h1 = train_cis(micro_corpus, cfg=_micro_cfg(), net_cfg=_micro_net_cfg())
    _, h2 = train_cis(micro_corpus, cfg=_micro_cfg(), net_cfg=_micro_net_cfg())
    assert [h.mean_loss for h in h1] == [h.mean_loss for h in h2]


def test_train_cis_rejects_unusable_input():
    with pytest.raises(ValueError):
        train_cis([], cfg=_micro_cfg())


def test_train_cis_loss_tracks_temporal_truth(micro_corpus):
    # 12 epochs on two tiny sessions: the predicted matrix should move
    # measurably toward the temporal one
    cfg = CisTrainConfig(epochs=12, batch_size=6, augment=False, seed=0)
    net, history = train_cis(micro_corpus, cfg=cfg, net_cfg=_micro_net_cfg())
    assert history[-1].mean_loss < history[0].mean_loss
    s = micro_corpus[0]
    pred = predicted_matrix(net, s.frames).values
    truth = temporal_matrix(s).values
    start_err = float(cis_batch_loss(predicted_matrix(EmbeddingNet(_micro_net_cfg()), s.frames).values, truth))
    end_err = float(cis_batch_loss(pred, truth))
    assert end_err < start_err


def test_write_loss_csv(tmp_path, micro_corpus):
    _, history = train_cis(micro_corpus, cfg=_micro_cfg(), net_cfg=_micro_net_cfg())
    p = tmp_path / "loss.csv"
    write_loss_csv(history, p)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "epoch,mean_loss,lr"
    assert len(lines) == 3
    assert lines[1].startswith("0,")
