"""Adversarial training of the generator: loss components, schedules, loop.

The composite objective is lambda_gan * L_gan + lambda_perc * L_perc +
lambda_cis * L_cis. The GAN term is vanilla sigmoid cross-entropy on patch
logits; the default perceptual term is a self-contained 3-level Gaussian
pyramid L1 (external LPIPS plugs in by name); the similarity term is
1 - cosine under a frozen embedding net.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .cis import EmbeddingNet
from .images import to_tensor
from .nets import DiscriminatorNet, GeneratorNet
from .sessions import CookingSession, pair_raw_state, sample_augment_params, augment

PERCEPTUAL_IMPLS = ("pyramid-l1", "external-lpips")


@dataclass
class GenTrainConfig:
    epochs_const: int = 50
    epochs_decay: int = 50
    lr: float = 2e-4
    adam_beta1: float = 0.5
    batch_size: int = 1
    lambda_gan: float = 1.0
    lambda_perc: float = 50.0
    lambda_cis: float = 50.0
    perceptual_impl: str = "pyramid-l1"
    augment: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.lambda_gan, self.lambda_perc, self.lambda_cis) < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.epochs_const + self.epochs_decay <= 0:
            raise ValueError("total epochs must be positive")
        if self.perceptual_impl not in PERCEPTUAL_IMPLS:
            raise ValueError(
                f"perceptual_impl must be one of {PERCEPTUAL_IMPLS}, got {self.perceptual_impl!r}"
            )

    @property
    def total_epochs(self) -> int:
        return self.epochs_const + self.epochs_decay


def lr_schedule(epoch: int, cfg: GenTrainConfig | None = None) -> float:
    """Flat for epochs_const epochs, then linear to zero over epochs_decay.

    With the 50+50 defaults: lr(e) = 2e-4 for e < 50, 2e-4 * (100 - e) / 50
    after; the knee is continuous (lr(49) = lr(50)) and the last epoch still
    takes a nonzero step.
    """
    cfg = cfg or GenTrainConfig()
    if not 0 <= epoch < cfg.total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {cfg.total_epochs})")
    if epoch < cfg.epochs_const:
        return cfg.lr
    return cfg.lr * (cfg.total_epochs - epoch) / cfg.epochs_decay


# ---------------------------------------------------------------------------
# Loss components (torch tensors, B x 3 x H x W in [-1, 1])
# ---------------------------------------------------------------------------


def gan_loss_d(
    d: DiscriminatorNet, raw: torch.Tensor, real: torch.Tensor, fake: torch.Tensor
) -> torch.Tensor:
    """Discriminator objective: mean BCE over the patch map, real-vs-fake halves."""
    logits_real = d.forward_pair(raw, real)
    logits_fake = d.forward_pair(raw, fake.detach())
    loss_real = F.binary_cross_entropy_with_logits(logits_real, torch.ones_like(logits_real))
    loss_fake = F.binary_cross_entropy_with_logits(logits_fake, torch.zeros_like(logits_fake))
    return 0.5 * (loss_real + loss_fake)


def gan_loss_g(d: DiscriminatorNet, raw: torch.Tensor, fake: torch.Tensor) -> torch.Tensor:
    """Generator objective: fool the discriminator on every patch."""
    logits_fake = d.forward_pair(raw, fake)
    return F.binary_cross_entropy_with_logits(logits_fake, torch.ones_like(logits_fake))


_PYRAMID_KERNEL = torch.tensor([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _blur_downsample(x: torch.Tensor) -> torch.Tensor:
    """Separable binomial blur then stride-2 subsample; constants map to constants."""
    c = x.shape[1]
    k = _PYRAMID_KERNEL.to(x.dtype)
    kh = k.view(1, 1, 1, -1).expand(c, 1, 1, -1)
    kv = k.view(1, 1, -1, 1).expand(c, 1, -1, 1)
    x = F.pad(x, (2, 2, 0, 0), mode="reflect")
    x = F.conv2d(x, kh, groups=c)
    x = F.pad(x, (0, 0, 2, 2), mode="reflect")
    x = F.conv2d(x, kv, groups=c)
    return x[:, :, ::2, ::2]


def pyramid_l1(a: torch.Tensor, b: torch.Tensor, levels: int = 3) -> torch.Tensor:
    """Mean absolute difference averaged over Gaussian-pyramid levels."""
    total = (a - b).abs().mean()
    for _ in range(levels - 1):
        a, b = _blur_downsample(a), _blur_downsample(b)
        total = total + (a - b).abs().mean()
    return total / levels


_EXTERNAL_PERCEPTUAL = {}


def register_perceptual_plugin(name: str, fn) -> None:
    """Register an external scorer fn(a, b) -> scalar, e.g. a real LPIPS net."""
    _EXTERNAL_PERCEPTUAL[name] = fn


def perceptual_loss(a: torch.Tensor, b: torch.Tensor, impl: str = "pyramid-l1") -> torch.Tensor:
    if a.shape != b.shape:
        raise ValueError(f"image shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if impl == "pyramid-l1":
        return pyramid_l1(a, b)
    if impl == "external-lpips":
        fn = _EXTERNAL_PERCEPTUAL.get("external-lpips")
        if fn is None:
            raise ValueError(
                "perceptual_impl 'external-lpips' selected but no plugin registered; "
                "call register_perceptual_plugin('external-lpips', fn) first"
            )
        return fn(a, b)
    raise ValueError(f"unknown perceptual impl {impl!r}")


def cis_loss(cis_net: EmbeddingNet, real: torch.Tensor, fake: torch.Tensor) -> torch.Tensor:
    """1 - unclamped cosine between embeddings; gradient flows to fake only.

    Requires a frozen net (no parameter grads) so generator steps can never
    touch the metric.
    """
    if any(p.requires_grad for p in cis_net.parameters()):
        raise ValueError("cis_net must be frozen (requires_grad=False) before use as a loss")
    with torch.no_grad():
        e_real = cis_net(real)
    e_fake = cis_net(fake)
    cos = (e_real * e_fake).sum(dim=1).mean()
    return 1.0 - cos


def composite_loss(gan: float, perc: float, cis: float, cfg: GenTrainConfig | None = None):
    cfg = cfg or GenTrainConfig()
    return cfg.lambda_gan * gan + cfg.lambda_perc * perc + cfg.lambda_cis * cis


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class GenEpochStats:
    epoch: int
    gan_d: float
    gan_g: float
    perc: float
    cis: float
    composite: float
    lr: float


def train_generator(
    sessions: list[CookingSession],
    gen: GeneratorNet,
    disc: DiscriminatorNet,
    cis_net: EmbeddingNet,
    cfg: GenTrainConfig | None = None,
) -> list[GenEpochStats]:
    """Alternate one discriminator and one generator step per (raw, cooked) pair.

    Both images of a pair share one augmentation transform so spatial
    correspondence survives; the similarity net is frozen throughout.
    """
    cfg = cfg or GenTrainConfig()
    pairs = []
    for s in sessions:
        for raw_img, state_img, recipe, state in pair_raw_state(s):
            pairs.append((s.session_id, raw_img, state_img, recipe, state))
    if not pairs:
        raise ValueError("train_generator needs a nonempty train split")
    for recipe_state in sorted({(p[3], p[4]) for p in pairs}):
        gen.index.register(*recipe_state)

    cis_net.eval()
    cis_net.requires_grad_(False)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr, betas=(cfg.adam_beta1, 0.999))
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr, betas=(cfg.adam_beta1, 0.999))

    history: list[GenEpochStats] = []
    for epoch in range(cfg.total_epochs):
        lr = lr_schedule(epoch, cfg)
        for opt in (opt_g, opt_d):
            for group in opt.param_groups:
                group["lr"] = lr
        order = rng.permutation(len(pairs))
        sums = np.zeros(5)
        for j in order:
            sid, raw_img, state_img, recipe, state = pairs[j]
            if cfg.augment:
                params = sample_augment_params(rng)
                raw_img = augment(raw_img, params=params)
                state_img = augment(state_img, params=params)
            raw = to_tensor(raw_img)
            real = to_tensor(state_img)
            e = gen.embedder.embed(recipe, state)

            fake = gen(raw, e)

            d_loss = gan_loss_d(disc, raw, real, fake)
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()

            g_gan = gan_loss_g(disc, raw, fake)
            g_perc = perceptual_loss(real, fake, cfg.perceptual_impl)
            g_cis = cis_loss(cis_net, real, fake)
            g_loss = composite_loss(g_gan, g_perc, g_cis, cfg)
            opt_g.zero_grad()
            g_loss.backward()
            opt_g.step()

            vals = [
                float(t.detach()) for t in (d_loss, g_gan, g_perc, g_cis, g_loss)
            ]
            if not all(np.isfinite(vals)):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, pair {sid}/{state}: "
                    f"gan_d={vals[0]}, gan_g={vals[1]}, perc={vals[2]}, "
                    f"cis={vals[3]}, composite={vals[4]}"
                )
            sums += vals
        means = sums / len(pairs)
        history.append(
            GenEpochStats(
                epoch=epoch,
                gan_d=means[0],
                gan_g=means[1],
                perc=means[2],
                cis=means[3],
                composite=means[4],
                lr=lr,
            )
        )
    return history


def write_gen_loss_csv(history: list[GenEpochStats], path) -> None:
    lines = ["epoch,gan_d,gan_g,perc,cis,composite,lr"]
    lines += [
        f"{h.epoch},{h.gan_d:.10g},{h.gan_g:.10g},{h.perc:.10g},"
        f"{h.cis:.10g},{h.composite:.10g},{h.lr:.10g}"
        for h in history
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
