"""Recipe/state conditioning machinery.

Each (recipe, state) pair gets an integer index, the index a fixed sinusoidal
encoding, the encoding a learned 128-d context vector, and every network
layer a dedicated affine head that turns that vector into per-channel
scale/shift pairs applied as feature-wise linear modulation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

SPE_DIM = 32
SPE_THETA = 10000.0
EMBED_DIM = 4 * SPE_DIM  # 128


class ContextIndex:
    """Bijection (recipe_id, state_name) -> contiguous integer index.

    Indices are assigned in registration order and survive save/load, so a
    trained model keeps addressing the same contexts.
    """

    def __init__(self) -> None:
        self._table: dict[tuple[str, str], int] = {}

    @classmethod
    def from_vocab(cls, recipe_ids, state_names) -> "ContextIndex":
        idx = cls()
        for r in recipe_ids:
            for s in state_names:
                idx.register(r, s)
        return idx

    def register(self, recipe_id: str, state_name: str) -> int:
        key = (recipe_id, state_name)
        if key not in self._table:
            self._table[key] = len(self._table)
        return self._table[key]

    def index_of(self, recipe_id: str, state_name: str) -> int:
        key = (recipe_id, state_name)
        if key not in self._table:
            known = ", ".join(f"{r}|{s}" for r, s in self._table)
            raise KeyError(
                f"unknown context pair {recipe_id!r}|{state_name!r}; known pairs: [{known}]"
            )
        return self._table[key]

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self._table

    def __len__(self) -> int:
        return len(self._table)

    def pairs(self) -> list[tuple[str, str]]:
        return sorted(self._table, key=self._table.get)

    def to_json(self) -> dict[str, int]:
        return {f"{r}|{s}": p for (r, s), p in self._table.items()}

    @classmethod
    def from_json(cls, d: dict[str, int]) -> "ContextIndex":
        idx = cls()
        for key, _ in sorted(d.items(), key=lambda kv: kv[1]):
            recipe, state = key.split("|", 1)
            idx.register(recipe, state)
        if idx.to_json() != {k: int(v) for k, v in d.items()}:
            raise ValueError("context-index mapping is not a contiguous bijection from 0")
        return idx

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, s: str) -> "ContextIndex":
        return cls.from_json(json.loads(s))


def spe(p: int, dim: int = SPE_DIM, theta: float = SPE_THETA) -> np.ndarray:
    """Sinusoidal encoding of index p: first dim/2 sines, last dim/2 cosines.

    Entry k is sin(p / theta^(2k/dim)); entry dim/2 + k is the matching cosine.
    """
    if dim % 2 != 0:
        raise ValueError(f"spe dim must be even, got {dim}")
    if p < 0:
        raise ValueError(f"spe index must be nonnegative, got {p}")
    k = np.arange(dim // 2, dtype=np.float64)
    args = p / theta ** (2.0 * k / dim)
    return np.concatenate([np.sin(args), np.cos(args)])


class ContextEmbedder(nn.Module):
    """Maps a context index to a learned 128-d embedding: MLP(spe(p)).

    MLP = linear(32 -> 128) -> SiLU -> linear(128 -> 128).
    """

    def __init__(self, index: ContextIndex, spe_dim: int = SPE_DIM, theta: float = SPE_THETA):
        super().__init__()
        self.index = index
        self.spe_dim = spe_dim
        self.theta = theta
        self.embed_dim = 4 * spe_dim
        self.fc1 = nn.Linear(spe_dim, self.embed_dim)
        self.act = nn.SiLU()
        self.fc2 = nn.Linear(self.embed_dim, self.embed_dim)

    def forward(self, p: int) -> torch.Tensor:
        dtype = self.fc1.weight.dtype
        base = torch.from_numpy(spe(p, self.spe_dim, self.theta)).to(dtype)
        return self.fc2(self.act(self.fc1(base)))

    def embed(self, recipe_id: str, state_name: str) -> torch.Tensor:
        return self.forward(self.index.index_of(recipe_id, state_name))


@dataclass
class FiLMParams:
    gamma: torch.Tensor  # (C,)
    beta: torch.Tensor  # (C,)


class FiLMHead(nn.Module):
    """Per-layer affine head: 128-d embedding -> (gamma, beta) over channels.

    Initialized to the identity modulation (gamma = 1, beta = 0) so a fresh
    model ignores its context until training moves the head.
    """

    def __init__(self, channels: int, embed_dim: int = EMBED_DIM):
        super().__init__()
        self.channels = channels
        self.proj = nn.Linear(embed_dim, 2 * channels)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        nn.init.zeros_(self.proj.weight)
        with torch.no_grad():
            self.proj.bias[: self.channels] = 1.0
            self.proj.bias[self.channels :] = 0.0

    def forward(self, e: torch.Tensor) -> FiLMParams:
        out = self.proj(e)
        return FiLMParams(gamma=out[: self.channels], beta=out[self.channels :])


class FiLMHeadBank(nn.Module):
    """Registry of FiLM heads keyed by layer id."""

    def __init__(self, embed_dim: int = EMBED_DIM):
        super().__init__()
        self.embed_dim = embed_dim
        self.heads = nn.ModuleDict()

    def register_layer(self, layer_id: str, channels: int) -> None:
        self.heads[layer_id] = FiLMHead(channels, self.embed_dim)

    def channels_of(self, layer_id: str) -> int:
        return self._head(layer_id).channels

    def _head(self, layer_id: str) -> FiLMHead:
        if layer_id not in self.heads:
            known = ", ".join(sorted(self.heads.keys()))
            raise KeyError(f"unregistered FiLM layer {layer_id!r}; registered: [{known}]")
        return self.heads[layer_id]

    def params(self, e: torch.Tensor, layer_id: str) -> FiLMParams:
        return self._head(layer_id)(e)


def film_params(e: torch.Tensor, layer_id: str, bank: FiLMHeadBank) -> FiLMParams:
    """Functional spelling of FiLMHeadBank.params."""
    return bank.params(e, layer_id)


def film(z: torch.Tensor, fp: FiLMParams) -> torch.Tensor:
    """Feature-wise linear modulation: out[c] = gamma[c] * z[c] + beta[c].

    Accepts C x H x W or B x C x H x W feature maps.
    """
    if z.dim() == 3:
        c = z.shape[0]
        shape = (c, 1, 1)
    elif z.dim() == 4:
        c = z.shape[1]
        shape = (1, c, 1, 1)
    else:
        raise ValueError(f"film expects a 3-d or 4-d feature tensor, got {z.dim()}-d")
    if fp.gamma.numel() != c or fp.beta.numel() != c:
        raise ValueError(
            f"FiLM channel mismatch: feature has {c} channels, "
            f"params have {fp.gamma.numel()}/{fp.beta.numel()}"
        )
    return fp.gamma.reshape(shape) * z + fp.beta.reshape(shape)
