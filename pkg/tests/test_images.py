import numpy as np
import pytest
import torch

from cookgen.images import load_png, save_png, to_image, to_tensor


def test_to_tensor_layout():
    img = np.zeros((4, 6, 3), dtype=np.float32)
    img[0, 0] = [0.1, 0.2, 0.3]
    t = to_tensor(img)
    assert t.shape == (1, 3, 4, 6)
    assert t.dtype == torch.float32
    assert t[0, :, 0, 0].tolist() == pytest.approx([0.1, 0.2, 0.3])


def test_to_tensor_rejects_bad_shapes():
    with pytest.raises(ValueError):
        to_tensor(np.zeros((4, 4), dtype=np.float32))
    with pytest.raises(ValueError):
        to_tensor(np.zeros((4, 4, 4), dtype=np.float32))


def test_tensor_round_trip(rng):
    img = rng.uniform(-1, 1, size=(5, 7, 3)).astype(np.float32)
    assert np.array_equal(to_image(to_tensor(img)), img)


def test_to_image_accepts_3d():
    t = torch.zeros(3, 2, 2)
    assert to_image(t).shape == (2, 2, 3)
    with pytest.raises(ValueError):
        to_image(torch.zeros(2, 3, 2, 2))


def test_png_round_trip_quantizes_once(tmp_path, rng):
    img = rng.uniform(-1, 1, size=(8, 8, 3)).astype(np.float32)
    p = tmp_path / "a.png"
    save_png(img, p)
    back = load_png(p)
    # one trip quantizes to the 8-bit grid...
    assert np.abs(back - img).max() <= 0.5 / 127.5 + 1e-6
    # ...and is idempotent afterwards
    save_png(back, p)
    assert np.array_equal(load_png(p), back)


def test_png_endpoints(tmp_path):
    img = np.stack(
        [np.full((2, 2), -1.0), np.full((2, 2), 1.0), np.zeros((2, 2))], axis=2
    ).astype(np.float32)
    p = tmp_path / "e.png"
    save_png(img, p)
    back = load_png(p)
    assert back[..., 0] == pytest.approx(-1.0)
    assert back[..., 1] == pytest.approx(1.0)
    assert np.abs(back[..., 2]).max() <= 1 / 127.5
