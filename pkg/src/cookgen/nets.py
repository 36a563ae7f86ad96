"""The two adversarial networks.

Generator: a context-conditioned U-Net. Every down stage, the bottleneck,
and every up stage ends in a FiLM modulation driven by the recipe/state
embedding; decoder stages concatenate the encoder output of matching
resolution (the deepest skip is the raw input image itself). Output is tanh,
so pixels stay in [-1, 1].

Discriminator: the canonical 70x70 PatchGAN over the 6-channel concatenation
of the conditioning image and the judged image, emitting raw patch logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .conditioning import EMBED_DIM, ContextEmbedder, ContextIndex, FiLMHeadBank, film
from .images import to_image, to_tensor


@dataclass
class GeneratorConfig:
    img_size: int = 224  # desk scale uses 64
    in_ch: int = 3
    out_ch: int = 3
    base_dim: int = 32
    dim_mults: tuple[int, ...] = (1, 2, 4, 8)
    resnet_groups: int = 8
    n_down: int = 4
    n_up: int = 4
    n_mid: int = 2

    def __post_init__(self) -> None:
        self.dim_mults = tuple(self.dim_mults)
        if len(self.dim_mults) != self.n_down:
            raise ValueError("len(dim_mults) must equal n_down")
        if self.n_up != self.n_down:
            raise ValueError("n_up must equal n_down (mirrored U-Net)")
        if self.img_size % (1 << self.n_down) != 0:
            raise ValueError(f"img_size must be divisible by {1 << self.n_down}")

    @property
    def dims(self) -> list[int]:
        return [self.base_dim * m for m in self.dim_mults]


class ResnetBlock(nn.Module):
    """conv-GN-SiLU twice plus residual; norms sit after the convs so group
    counts only ever see the (multiple-of-groups) output width."""

    def __init__(self, in_ch: int, out_ch: int, groups: int = 8):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm1 = nn.GroupNorm(groups, out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.norm2 = nn.GroupNorm(groups, out_ch)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.silu(self.norm1(self.conv1(x)))
        h = F.silu(self.norm2(self.conv2(h)))
        return h + self.skip(x)


class Downsample(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv = nn.Conv2d(ch, ch, 3, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv = nn.Conv2d(ch, ch, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(F.interpolate(x, scale_factor=2.0, mode="nearest"))


class DownStage(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, groups: int):
        super().__init__()
        self.block1 = ResnetBlock(in_ch, out_ch, groups)
        self.block2 = ResnetBlock(out_ch, out_ch, groups)
        self.down = Downsample(out_ch)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.down(self.block2(self.block1(x)))


class UpStage(nn.Module):
    def __init__(self, in_ch: int, skip_ch: int, out_ch: int, groups: int):
        super().__init__()
        self.up = Upsample(in_ch)
        self.block1 = ResnetBlock(in_ch + skip_ch, out_ch, groups)
        self.block2 = ResnetBlock(out_ch, out_ch, groups)

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        x = self.up(x)
        return self.block2(self.block1(torch.cat([x, skip], dim=1)))


class GeneratorNet(nn.Module):
    """Context-conditioned U-Net translating a raw dish image to a cooked one."""

    def __init__(self, cfg: GeneratorConfig, index: ContextIndex):
        super().__init__()
        self.cfg = cfg
        dims = cfg.dims
        self.embedder = ContextEmbedder(index)
        self.film_bank = FiLMHeadBank(EMBED_DIM)

        self.stem = nn.Conv2d(cfg.in_ch, cfg.base_dim, 3, padding=1)
        downs = []
        prev = cfg.base_dim
        for k, d in enumerate(dims):
            downs.append(DownStage(prev, d, cfg.resnet_groups))
            self.film_bank.register_layer(f"enc{k + 1}", d)
            prev = d
        self.downs = nn.ModuleList(downs)

        self.mids = nn.ModuleList(
            ResnetBlock(dims[-1], dims[-1], cfg.resnet_groups) for _ in range(cfg.n_mid)
        )
        self.film_bank.register_layer("mid", dims[-1])

        # Decoder stage l consumes the encoder output of matching resolution;
        # the last stage's skip is the raw input image itself.
        ups = []
        prev = dims[-1]
        for l in range(1, cfg.n_up + 1):
            skip_ch = dims[cfg.n_down - 1 - l] if l < cfg.n_up else cfg.in_ch
            out_ch = dims[cfg.n_down - 1 - l] if l < cfg.n_up else cfg.base_dim
            ups.append(UpStage(prev, skip_ch, out_ch, cfg.resnet_groups))
            self.film_bank.register_layer(f"dec{l}", out_ch)
            prev = out_ch
        self.ups = nn.ModuleList(ups)

        self.final_block = ResnetBlock(cfg.base_dim, cfg.base_dim, cfg.resnet_groups)
        self.out_conv = nn.Conv2d(cfg.base_dim, cfg.out_ch, 1)

    @property
    def index(self) -> ContextIndex:
        return self.embedder.index

    def forward(self, x: torch.Tensor, e: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != self.cfg.in_ch:
            raise ValueError(f"expected B x {self.cfg.in_ch} x H x W input, got {tuple(x.shape)}")
        if x.shape[2] != self.cfg.img_size or x.shape[3] != self.cfg.img_size:
            raise ValueError(
                f"expected {self.cfg.img_size} x {self.cfg.img_size} input, "
                f"got {tuple(x.shape[2:])}"
            )
        skips = [x]
        h = self.stem(x)
        for k, stage in enumerate(self.downs):
            h = stage(h)
            h = film(h, self.film_bank.params(e, f"enc{k + 1}"))
            skips.append(h)
        for block in self.mids:
            h = block(h)
        h = film(h, self.film_bank.params(e, "mid"))
        for l, stage in enumerate(self.ups, start=1):
            h = stage(h, skips[self.cfg.n_down - l])
            h = film(h, self.film_bank.params(e, f"dec{l}"))
        h = self.final_block(h)
        return torch.tanh(self.out_conv(h))

    def forward_context(self, x: torch.Tensor, recipe_id: str, state_name: str) -> torch.Tensor:
        return self.forward(x, self.embedder.embed(recipe_id, state_name))


def generate(g: GeneratorNet, raw_image: np.ndarray, recipe_id: str, state_name: str) -> np.ndarray:
    """Translate one H x W x 3 raw image (in [-1,1]) to the requested state."""
    size = g.cfg.img_size
    if raw_image.shape != (size, size, 3):
        raise ValueError(f"expected {size} x {size} x 3 raw image, got {raw_image.shape}")
    dtype = next(g.parameters()).dtype
    with torch.no_grad():
        out = g.forward_context(to_tensor(raw_image, dtype), recipe_id, state_name)
    return to_image(out)


def generator_feature_shapes(cfg: GeneratorConfig) -> list[tuple[str, int, int]]:
    """(stage, channels, spatial side) through the network, for shape audits."""
    dims = cfg.dims
    shapes = []
    size = cfg.img_size
    for k, d in enumerate(dims):
        size //= 2
        shapes.append((f"enc{k + 1}", d, size))
    shapes.append(("mid", dims[-1], size))
    for l in range(1, cfg.n_up + 1):
        size *= 2
        ch = dims[cfg.n_down - 1 - l] if l < cfg.n_up else cfg.base_dim
        shapes.append((f"dec{l}", ch, size))
    return shapes


def _conv_params(cin: int, cout: int, k: int) -> int:
    return k * k * cin * cout + cout


def _resnet_params(cin: int, cout: int) -> int:
    n = _conv_params(cin, cout, 3) + _conv_params(cout, cout, 3) + 2 * (2 * cout)
    if cin != cout:
        n += _conv_params(cin, cout, 1)
    return n


def expected_generator_param_count(cfg: GeneratorConfig, n_contexts_embed_dim: int = EMBED_DIM) -> int:
    """Parameter census derived from shape arithmetic alone (no torch walk).

    Cross-checks the live model: the two numbers must agree exactly.
    """
    dims = cfg.dims
    total = _conv_params(cfg.in_ch, cfg.base_dim, 3)  # stem
    prev = cfg.base_dim
    for d in dims:
        total += _resnet_params(prev, d) + _resnet_params(d, d) + _conv_params(d, d, 3)
        prev = d
    total += cfg.n_mid * _resnet_params(dims[-1], dims[-1])
    prev = dims[-1]
    for l in range(1, cfg.n_up + 1):
        skip = dims[cfg.n_down - 1 - l] if l < cfg.n_up else cfg.in_ch
        out = dims[cfg.n_down - 1 - l] if l < cfg.n_up else cfg.base_dim
        total += _conv_params(prev, prev, 3)  # upsample conv
        total += _resnet_params(prev + skip, out) + _resnet_params(out, out)
        prev = out
    total += _resnet_params(cfg.base_dim, cfg.base_dim)
    total += _conv_params(cfg.base_dim, cfg.out_ch, 1)
    # context MLP: spe_dim -> 128 -> 128
    spe_dim = n_contexts_embed_dim // 4
    total += (spe_dim * n_contexts_embed_dim + n_contexts_embed_dim) + (
        n_contexts_embed_dim * n_contexts_embed_dim + n_contexts_embed_dim
    )
    # FiLM heads: enc stages, mid, dec stages
    head_channels = [d for d in dims] + [dims[-1]]
    head_channels += [dims[cfg.n_down - 1 - l] if l < cfg.n_up else cfg.base_dim for l in range(1, cfg.n_up + 1)]
    for c in head_channels:
        total += n_contexts_embed_dim * 2 * c + 2 * c
    return total


def param_census(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


# ---------------------------------------------------------------------------
# Discriminator
# ---------------------------------------------------------------------------


@dataclass
class DiscriminatorConfig:
    in_ch: int = 6
    ndf: int = 64
    kernel: int = 4
    stride2_layers: int = 3
    leaky_slope: float = 0.2

    def layer_specs(self) -> list[tuple[int, int, int, int, int]]:
        """(cin, cout, kernel, stride, padding) per conv, in forward order."""
        specs = []
        cin = self.in_ch
        cout = self.ndf
        for _ in range(self.stride2_layers):
            specs.append((cin, cout, self.kernel, 2, 1))
            cin, cout = cout, cout * 2
        specs.append((cin, cout, self.kernel, 1, 1))  # one stride-1 widening layer
        specs.append((cout, 1, self.kernel, 1, 1))  # single-channel logit map
        return specs


class DiscriminatorNet(nn.Module):
    """PatchGAN over concatenated (conditioning, judged) images; raw logits out.

    Batch norm on every conv except the first and the final logit layer.
    """

    def __init__(self, cfg: DiscriminatorConfig | None = None):
        super().__init__()
        self.cfg = cfg or DiscriminatorConfig()
        layers: list[nn.Module] = []
        specs = self.cfg.layer_specs()
        for i, (cin, cout, k, s, p) in enumerate(specs):
            last = i == len(specs) - 1
            first = i == 0
            layers.append(nn.Conv2d(cin, cout, k, stride=s, padding=p, bias=first or last))
            if not first and not last:
                layers.append(nn.BatchNorm2d(cout))
            if not last:
                layers.append(nn.LeakyReLU(self.cfg.leaky_slope, inplace=True))
        self.model = nn.Sequential(*layers)

    def forward(self, pair: torch.Tensor) -> torch.Tensor:
        if pair.dim() != 4 or pair.shape[1] != self.cfg.in_ch:
            raise ValueError(
                f"expected B x {self.cfg.in_ch} x H x W input, got {tuple(pair.shape)}"
            )
        return self.model(pair)

    def forward_pair(self, cond: torch.Tensor, judged: torch.Tensor) -> torch.Tensor:
        if cond.shape != judged.shape:
            raise ValueError(f"image shape mismatch: {tuple(cond.shape)} vs {tuple(judged.shape)}")
        return self.forward(torch.cat([cond, judged], dim=1))


def discriminate(d: DiscriminatorNet, cond_image: np.ndarray, judged_image: np.ndarray) -> np.ndarray:
    """Patch logit map (h' x w') for one (conditioning, judged) image pair."""
    if cond_image.shape != judged_image.shape:
        raise ValueError(
            f"image shape mismatch: {cond_image.shape} vs {judged_image.shape}"
        )
    dtype = next(d.parameters()).dtype
    with torch.no_grad():
        logits = d.forward_pair(to_tensor(cond_image, dtype), to_tensor(judged_image, dtype))
    return logits[0, 0].cpu().numpy()


def patch_map_size(cfg: DiscriminatorConfig, img_size: int) -> int:
    """Output side length from conv arithmetic: o = floor((n + 2p - k)/s) + 1."""
    n = img_size
    for _, _, k, s, p in cfg.layer_specs():
        n = (n + 2 * p - k) // s + 1
    return n


def receptive_field(cfg: DiscriminatorConfig) -> int:
    """Input pixels seen by one output logit."""
    rf = 1
    for _, _, k, s, _ in reversed(cfg.layer_specs()):
        rf = rf * s + (k - s)
    return rf
