"""Culinary image similarity: a Siamese embedding network scored by cosine.

The network maps frames of one cooking session into an embedding space where
temporal progression is a smooth trajectory; supervision is the analytic
temporal-proximity matrix, optimized with MSE over predicted-vs-true cosine
matrices, one session per batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .images import to_tensor
from .sessions import CookingSession, SimilarityMatrix, augment, temporal_matrix

_NORM_EPS = 1e-12


@dataclass
class EmbeddingNetConfig:
    backbone: str = "small-conv"
    embed_dim: int = 2048
    proj_dims: tuple[int, int] = (2048, 128)
    img_size: int = 224

    def __post_init__(self) -> None:
        self.proj_dims = tuple(self.proj_dims)
        if len(self.proj_dims) != 2:
            raise ValueError("proj_dims must be (hidden, out)")


class SmallConvBackbone(nn.Module):
    """Default encoder: 4 stride-2 conv blocks, global average pool, linear."""

    def __init__(self, embed_dim: int):
        super().__init__()
        chans = [3, 32, 64, 128, 256]
        blocks = []
        for cin, cout in zip(chans, chans[1:]):
            blocks += [
                nn.Conv2d(cin, cout, 3, stride=2, padding=1),
                nn.GroupNorm(8, cout),
                nn.SiLU(),
            ]
        self.features = nn.Sequential(*blocks)
        self.head = nn.Linear(chans[-1], embed_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.features(x)
        h = h.mean(dim=(2, 3))
        return self.head(h)


BACKBONES = {
    "small-conv": lambda cfg: SmallConvBackbone(cfg.embed_dim),
}


def register_backbone(name: str, factory) -> None:
    """Plug in an alternate encoder; factory(cfg) must emit cfg.embed_dim features."""
    BACKBONES[name] = factory


def _normalize(h: torch.Tensor) -> torch.Tensor:
    norms = h.norm(dim=-1, keepdim=True)
    if bool((norms < _NORM_EPS).any()):
        raise ArithmeticError("degenerate embedding: zero vector before L2 normalization")
    return h / norms


class EmbeddingNet(nn.Module):
    """Backbone -> L2 norm -> MLP projection (2048 -> 2048 -> 128) -> L2 norm."""

    def __init__(self, cfg: EmbeddingNetConfig | None = None):
        super().__init__()
        self.cfg = cfg or EmbeddingNetConfig()
        if self.cfg.backbone not in BACKBONES:
            raise ValueError(
                f"unknown backbone {self.cfg.backbone!r}; registered: {sorted(BACKBONES)}"
            )
        self.backbone = BACKBONES[self.cfg.backbone](self.cfg)
        hidden, out = self.cfg.proj_dims
        self.proj = nn.Sequential(
            nn.Linear(self.cfg.embed_dim, hidden), nn.ReLU(), nn.Linear(hidden, out)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = _normalize(self.backbone(x))
        return _normalize(self.proj(h))


def embed(net: EmbeddingNet, image: np.ndarray) -> np.ndarray:
    """One H x W x 3 image in [-1,1] -> 128-d unit vector."""
    size = net.cfg.img_size
    if image.shape != (size, size, 3):
        raise ValueError(f"expected {size} x {size} x 3 image, got {image.shape}")
    dtype = next(net.parameters()).dtype
    with torch.no_grad():
        z = net(to_tensor(image, dtype))
    return z[0].cpu().numpy()


def embed_batch(net: EmbeddingNet, images: list[np.ndarray] | np.ndarray) -> np.ndarray:
    dtype = next(net.parameters()).dtype
    batch = torch.cat([to_tensor(np.asarray(im), dtype) for im in images], dim=0)
    with torch.no_grad():
        z = net(batch)
    return z.cpu().numpy()


def f_cul_unclamped(net: EmbeddingNet, image_a: np.ndarray, image_b: np.ndarray) -> float:
    """Raw cosine of the two unit embeddings, in [-1, 1]."""
    ea, eb = embed(net, image_a), embed(net, image_b)
    return float(np.dot(ea, eb))


def f_cul(net: EmbeddingNet, image_a: np.ndarray, image_b: np.ndarray) -> float:
    """Reported culinary similarity: cosine clamped into [0, 1]."""
    return min(1.0, max(0.0, f_cul_unclamped(net, image_a, image_b)))


def predicted_matrix(net: EmbeddingNet, frames) -> SimilarityMatrix:
    """Pairwise unclamped cosine matrix over a session's frames.

    Accepts a list of Frame objects or of H x W x 3 arrays. The matrix is
    symmetrized and gets an exact unit diagonal (float round-off removal).
    """
    images = [f.image if hasattr(f, "image") else np.asarray(f) for f in frames]
    if len(images) < 2:
        raise ValueError("predicted_matrix needs >= 2 frames")
    emb = embed_batch(net, images).astype(np.float64)
    values = emb @ emb.T
    values = (values + values.T) / 2.0
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(values=values, kind="predicted")


def cis_batch_loss(predicted, truth):
    """Mean squared entry difference between two n x n similarity matrices.

    Works on SimilarityMatrix, numpy arrays, or torch tensors (the torch path
    keeps gradients).
    """
    p = predicted.values if isinstance(predicted, SimilarityMatrix) else predicted
    t = truth.values if isinstance(truth, SimilarityMatrix) else truth
    if tuple(p.shape) != tuple(t.shape):
        raise ValueError(f"similarity-matrix shape mismatch: {tuple(p.shape)} vs {tuple(t.shape)}")
    if isinstance(p, torch.Tensor) or isinstance(t, torch.Tensor):
        if not isinstance(p, torch.Tensor):
            p = torch.as_tensor(p, dtype=t.dtype)
        if not isinstance(t, torch.Tensor):
            t = torch.as_tensor(t, dtype=p.dtype)
        return ((p - t) ** 2).mean()
    return float(((np.asarray(p) - np.asarray(t)) ** 2).mean())


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class CisTrainConfig:
    epochs: int = 100
    lr: float = 1e-4
    weight_decay: float = 1e-5
    lr_decay_gamma: float = 0.6
    lr_decay_every: int = 10
    batch_size: int = 32
    augment: bool = True
    seed: int = 0


def cis_lr_schedule(epoch: int, cfg: CisTrainConfig | None = None) -> float:
    """Step decay: lr * gamma^(epoch // step)."""
    cfg = cfg or CisTrainConfig()
    if epoch < 0:
        raise ValueError(f"epoch must be nonnegative, got {epoch}")
    return cfg.lr * cfg.lr_decay_gamma ** (epoch // cfg.lr_decay_every)


@dataclass
class CisEpochStats:
    epoch: int
    mean_loss: float
    lr: float


def session_batches(session: CookingSession, batch_size: int) -> list[list[int]]:
    """Temporally ordered frame-index chunks of at most batch_size."""
    n = session.n_frames
    return [list(range(i, min(i + batch_size, n))) for i in range(0, n, batch_size)]


def train_cis(
    sessions: list[CookingSession],
    cfg: CisTrainConfig | None = None,
    net_cfg: EmbeddingNetConfig | None = None,
    net: EmbeddingNet | None = None,
) -> tuple[EmbeddingNet, list[CisEpochStats]]:
    """Train the similarity net on session batches against temporal matrices.

    Each batch holds up to batch_size temporally ordered frames of a single
    session; augmentation (when on) draws an independent transform per frame.
    """
    cfg = cfg or CisTrainConfig()
    usable = [s for s in sessions if s.n_frames >= 2 and s.duration_T > 0]
    if not usable:
        raise ValueError("train_cis needs at least one session with >= 2 frames")

    torch.manual_seed(cfg.seed)
    if net is None:
        if net_cfg is None:
            size = usable[0].frames[0].image.shape[0]
            net_cfg = EmbeddingNetConfig(img_size=size)
        net = EmbeddingNet(net_cfg)
    net.train()

    rng = np.random.default_rng(cfg.seed)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    truth_full = {s.session_id: temporal_matrix(s).values for s in usable}

    batches = [
        (s, idx) for s in usable for idx in session_batches(s, cfg.batch_size)
    ]
    history: list[CisEpochStats] = []
    for epoch in range(cfg.epochs):
        lr = cis_lr_schedule(epoch, cfg)
        for group in opt.param_groups:
            group["lr"] = lr
        order = rng.permutation(len(batches))
        losses = []
        for b in order:
            session, idx = batches[b]
            imgs = [session.frames[i].image for i in idx]
            if cfg.augment:
                imgs = [augment(im, rng) for im in imgs]
            batch = torch.cat([to_tensor(im) for im in imgs], dim=0)
            emb = net(batch)
            pred = emb @ emb.T
            truth = torch.from_numpy(
                truth_full[session.session_id][np.ix_(idx, idx)]
            ).to(pred.dtype)
            loss = cis_batch_loss(pred, truth)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        history.append(CisEpochStats(epoch=epoch, mean_loss=float(np.mean(losses)), lr=lr))
    net.eval()
    return net, history


def write_loss_csv(history: list[CisEpochStats], path) -> None:
    lines = ["epoch,mean_loss,lr"]
    lines += [f"{h.epoch},{h.mean_loss:.10g},{h.lr:.10g}" for h in history]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
