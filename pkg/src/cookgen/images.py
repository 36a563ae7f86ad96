"""Image helpers shared across the pipeline.

Images travel through the code as H x W x 3 float32 arrays with channel
values in [-1, 1]. Files on disk are 8-bit RGB PNGs. Torch tensors are a
private detail of the networks; the two conversion helpers below are the
only crossing points.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image


def to_tensor(image: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """H x W x 3 array in [-1, 1] -> 1 x 3 x H x W tensor."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected H x W x 3 image, got shape {image.shape}")
    t = torch.from_numpy(np.ascontiguousarray(image)).to(dtype)
    return t.permute(2, 0, 1).unsqueeze(0)


def to_image(t: torch.Tensor) -> np.ndarray:
    """1 x 3 x H x W (or 3 x H x W) tensor -> H x W x 3 float32 array."""
    if t.dim() == 4:
        if t.shape[0] != 1:
            raise ValueError(f"expected batch of 1, got shape {tuple(t.shape)}")
        t = t[0]
    if t.dim() != 3 or t.shape[0] != 3:
        raise ValueError(f"expected 3 x H x W tensor, got shape {tuple(t.shape)}")
    return t.detach().permute(1, 2, 0).cpu().numpy().astype(np.float32)


def load_png(path: str | Path) -> np.ndarray:
    """8-bit RGB PNG -> H x W x 3 float32 in [-1, 1] (0 -> -1, 255 -> 1)."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return arr / 127.5 - 1.0


def save_png(image: np.ndarray, path: str | Path) -> None:
    """H x W x 3 float in [-1, 1] -> 8-bit RGB PNG."""
    arr = np.clip(np.round((np.asarray(image) + 1.0) * 127.5), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")
