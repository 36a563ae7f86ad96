"""Time the pieces of one generator training step at a given resolution.

Useful for sizing epoch counts before a long run:

    python3 scripts/profile_step.py --img-size 64 --base-dim 16 --repeats 5
"""

from __future__ import annotations

import argparse
import time

import numpy as np
import torch

from cookgen.cis import EmbeddingNet, EmbeddingNetConfig
from cookgen.conditioning import ContextIndex
from cookgen.images import to_tensor
from cookgen.nets import DiscriminatorNet, GeneratorConfig, GeneratorNet
from cookgen.training import cis_loss, gan_loss_d, gan_loss_g, perceptual_loss


def timed(label: str, fn, repeats: int) -> None:
    fn()  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    print(f"{label:>24}: {(time.perf_counter() - t0) / repeats * 1e3:8.1f} ms")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--img-size", type=int, default=64)
    ap.add_argument("--base-dim", type=int, default=16)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    torch.manual_seed(0)
    index = ContextIndex()
    index.register("r", "standard")
    gen = GeneratorNet(GeneratorConfig(img_size=args.img_size, base_dim=args.base_dim), index)
    disc = DiscriminatorNet()
    cis = EmbeddingNet(EmbeddingNetConfig(embed_dim=256, proj_dims=(256, 128), img_size=args.img_size))
    cis.eval()
    cis.requires_grad_(False)
    opt = torch.optim.Adam(gen.parameters(), lr=2e-4, betas=(0.5, 0.999))

    rng = np.random.default_rng(0)
    raw = to_tensor(rng.uniform(-1, 1, (args.img_size, args.img_size, 3)))
    real = to_tensor(rng.uniform(-1, 1, (args.img_size, args.img_size, 3)))

    n_params = sum(p.numel() for p in gen.parameters())
    print(f"generator: {n_params:,} parameters at {args.img_size}x{args.img_size}")

    with torch.no_grad():
        timed("gen forward", lambda: gen.forward_context(raw, "r", "standard"), args.repeats)
        fake = gen.forward_context(raw, "r", "standard")
        timed("disc forward", lambda: disc.forward_pair(raw, fake), args.repeats)
        timed("pyramid perceptual", lambda: perceptual_loss(fake, real), args.repeats)
        timed("cis pair", lambda: cis_loss(cis, real, fake), args.repeats)
        timed("disc loss", lambda: gan_loss_d(disc, raw, real, fake), args.repeats)

    def full_step() -> None:
        opt.zero_grad()
        fake = gen.forward_context(raw, "r", "standard")
        loss = gan_loss_g(disc, raw, fake) + 50.0 * perceptual_loss(fake, real) + 50.0 * cis_loss(cis, real, fake)
        loss.backward()
        opt.step()

    timed("full generator step", full_step, args.repeats)


if __name__ == "__main__":
    main()
