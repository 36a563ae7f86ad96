"""Weight archives: portable serialization plus post-training quantization.

An archive is a directory holding ``manifest.json`` (model kind, config echo,
context vocabulary for generators, and a tensor directory with byte extents)
and ``tensors.bin`` (little-endian, row-major payloads back to back).
Quantization rewrites an archive under a per-layer-kind policy and reports
payload bytes before/after along with per-tensor dequantization error.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .cis import EmbeddingNet, EmbeddingNetConfig
from .conditioning import ContextIndex
from .nets import (
    DiscriminatorConfig,
    DiscriminatorNet,
    GeneratorConfig,
    GeneratorNet,
)

MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "tensors.bin"
FORMAT_TAG = "cookgen-weights-v1"

DTYPE_TO_NP = {
    "float64": "<f8",
    "float32": "<f4",
    "float16": "<f2",
    "int8": "|i1",
    "int64": "<i8",
}
TORCH_TO_DTYPE = {
    torch.float64: "float64",
    torch.float32: "float32",
    torch.float16: "float16",
    torch.int8: "int8",
    torch.int64: "int64",
}

INT8 = "int8-symmetric-per-tensor"
VALID_POLICY_DTYPES = ("float32", "float16", INT8)


class ArchiveFormatError(ValueError):
    """Manifest/payload disagreement or unreadable archive."""


@dataclass(frozen=True)
class QuantScheme:
    """Maps a layer kind (conv, linear, film, norm, bias, other) to a storage dtype."""

    policy: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for kind, dtype in self.policy.items():
            if dtype not in VALID_POLICY_DTYPES:
                raise ValueError(f"policy[{kind!r}] = {dtype!r}; expected one of {VALID_POLICY_DTYPES}")

    def dtype_for(self, kind: str) -> str:
        return self.policy.get(kind, "float32")

    def to_json(self) -> dict:
        return {"policy": dict(self.policy)}

    @classmethod
    def from_json(cls, obj: dict) -> "QuantScheme":
        return cls(policy=dict(obj["policy"]))


def default_quant_scheme() -> QuantScheme:
    """Hybrid policy: big weight matrices to int8, everything small to fp16."""
    return QuantScheme(
        policy={
            "conv": INT8,
            "linear": INT8,
            "film": "float16",
            "norm": "float16",
            "bias": "float16",
            "other": "float16",
        }
    )


def classify_tensor(name: str, shape: tuple[int, ...], dtype: str) -> str:
    """Layer kind used for policy lookup.

    The conditioning tower (context embedder + film heads) is matched by name
    so its linear weights stay high precision under the default policy.
    """
    if dtype in ("int64", "int8"):
        return "buffer"
    lowered = name.lower()
    if "film" in lowered or "embedder" in lowered:
        return "film"
    if "running_mean" in lowered or "running_var" in lowered:
        return "norm"
    if name.endswith(".bias"):
        return "bias"
    if name.endswith(".weight"):
        if len(shape) >= 3:
            return "conv"
        if len(shape) == 2:
            return "linear"
        return "norm"
    return "other"


# --- archive IO ------------------------------------------------------------


def _model_kind(model: nn.Module) -> str:
    if isinstance(model, GeneratorNet):
        return "generator"
    if isinstance(model, DiscriminatorNet):
        return "discriminator"
    if isinstance(model, EmbeddingNet):
        return "cis"
    raise TypeError(f"cannot archive {type(model).__name__}; expected generator/discriminator/cis")


def save_weights(model: nn.Module, path: str | os.PathLike) -> dict:
    """Write ``manifest.json`` + ``tensors.bin`` under ``path``; returns the manifest."""
    kind = _model_kind(model)
    os.makedirs(path, exist_ok=True)

    tensors: dict[str, dict] = {}
    chunks: list[bytes] = []
    offset = 0
    for name, t in model.state_dict().items():
        if t.dtype not in TORCH_TO_DTYPE:
            raise ArchiveFormatError(f"tensor {name!r} has unsupported dtype {t.dtype}")
        dtype = TORCH_TO_DTYPE[t.dtype]
        arr = np.ascontiguousarray(t.detach().cpu().numpy())
        raw = arr.astype(DTYPE_TO_NP[dtype], copy=False).tobytes()
        tensors[name] = {
            "shape": list(t.shape),
            "dtype": dtype,
            "file": PAYLOAD_NAME,
            "byte_offset": offset,
            "byte_length": len(raw),
            "quant": None,
        }
        chunks.append(raw)
        offset += len(raw)

    manifest = {
        "format": FORMAT_TAG,
        "kind": kind,
        "config": dataclasses.asdict(model.cfg),
        "tensors": tensors,
    }
    if kind == "generator":
        manifest["context"] = model.index.to_json()

    with open(os.path.join(path, PAYLOAD_NAME), "wb") as fh:
        fh.write(b"".join(chunks))
    with open(os.path.join(path, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(path: str | os.PathLike) -> dict:
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise ArchiveFormatError(f"no {MANIFEST_NAME} under {path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != FORMAT_TAG:
        raise ArchiveFormatError(f"unrecognized archive format {manifest.get('format')!r}")
    return manifest


def _read_payload_tensor(payload: bytes, name: str, entry: dict) -> np.ndarray:
    shape = tuple(entry["shape"])
    dtype = entry["dtype"]
    if dtype not in DTYPE_TO_NP:
        raise ArchiveFormatError(f"tensor {name!r} has unknown dtype {dtype!r}")
    np_dtype = np.dtype(DTYPE_TO_NP[dtype])
    expected = int(np.prod(shape, dtype=np.int64)) * np_dtype.itemsize
    if entry["byte_length"] != expected:
        raise ArchiveFormatError(
            f"tensor {name!r}: declared byte_length {entry['byte_length']} "
            f"does not match shape {shape} x {dtype} = {expected} bytes"
        )
    lo, hi = entry["byte_offset"], entry["byte_offset"] + entry["byte_length"]
    if lo < 0 or hi > len(payload):
        raise ArchiveFormatError(
            f"tensor {name!r}: extent [{lo}, {hi}) outside payload of {len(payload)} bytes"
        )
    return np.frombuffer(payload[lo:hi], dtype=np_dtype).reshape(shape)


def load_tensors(path: str | os.PathLike) -> tuple[dict, dict[str, np.ndarray]]:
    """Raw manifest + stored arrays (no dequantization)."""
    manifest = read_manifest(path)
    with open(os.path.join(path, PAYLOAD_NAME), "rb") as fh:
        payload = fh.read()
    arrays = {
        name: _read_payload_tensor(payload, name, entry)
        for name, entry in manifest["tensors"].items()
    }
    return manifest, arrays


def _dequantize(name: str, entry: dict, arr: np.ndarray) -> np.ndarray:
    quant = entry.get("quant")
    if quant is None:
        return arr
    scheme = quant["scheme"]
    if scheme == INT8:
        # multiply in float64 so the reconstruction is the exact codes * scale
        # value rounded once, keeping the per-element error at scale/2
        return (arr.astype(np.float64) * quant["scale"]).astype(np.float32)
    if scheme == "float16":
        return arr.astype(np.float32)
    raise ArchiveFormatError(f"tensor {name!r}: unknown quant scheme {scheme!r}")


def _generator_from_manifest(manifest: dict) -> GeneratorNet:
    cfg_json = dict(manifest["config"])
    cfg_json["dim_mults"] = tuple(cfg_json["dim_mults"])
    cfg = GeneratorConfig(**cfg_json)
    index = ContextIndex.from_json(manifest["context"])
    return GeneratorNet(cfg, index)


def _discriminator_from_manifest(manifest: dict) -> DiscriminatorNet:
    return DiscriminatorNet(DiscriminatorConfig(**manifest["config"]))


def _cis_from_manifest(manifest: dict) -> EmbeddingNet:
    cfg_json = dict(manifest["config"])
    cfg_json["proj_dims"] = tuple(cfg_json["proj_dims"])
    return EmbeddingNet(EmbeddingNetConfig(**cfg_json))


_BUILDERS = {
    "generator": _generator_from_manifest,
    "discriminator": _discriminator_from_manifest,
    "cis": _cis_from_manifest,
}


def load_weights(path: str | os.PathLike) -> nn.Module:
    """Rebuild the model named in the manifest and load its tensors.

    Quantized entries are dequantized to float32 on the way in.
    """
    manifest, arrays = load_tensors(path)
    kind = manifest.get("kind")
    if kind not in _BUILDERS:
        raise ArchiveFormatError(f"unknown model kind {kind!r}")
    model = _BUILDERS[kind](manifest)

    state = {}
    for name, entry in manifest["tensors"].items():
        arr = _dequantize(name, entry, arrays[name])
        # frombuffer views are read-only; torch wants ownership
        state[name] = torch.from_numpy(np.array(arr, copy=True))
    missing, unexpected = model.load_state_dict(state, strict=False)
    if missing or unexpected:
        raise ArchiveFormatError(
            f"archive/model tensor mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}"
        )
    model.eval()
    return model


# --- quantization ------------------------------------------------------------


@dataclass
class TensorQuantStats:
    kind: str
    stored_dtype: str
    bytes_before: int
    bytes_after: int
    max_error: float
    scale: float | None = None


@dataclass
class SizeReport:
    bytes_before: int
    bytes_after: int
    per_tensor: dict[str, TensorQuantStats]

    @property
    def reduction_factor(self) -> float:
        return self.bytes_before / max(self.bytes_after, 1)

    @property
    def max_error(self) -> float:
        return max((s.max_error for s in self.per_tensor.values()), default=0.0)

    def summary(self) -> str:
        return (
            f"{self.bytes_before} -> {self.bytes_after} payload bytes "
            f"({self.reduction_factor:.2f}x, max dequant error {self.max_error:.3e})"
        )

    def to_json(self) -> dict:
        return {
            "bytes_before": self.bytes_before,
            "bytes_after": self.bytes_after,
            "reduction_factor": self.reduction_factor,
            "per_tensor": {
                name: dataclasses.asdict(stats) for name, stats in self.per_tensor.items()
            },
        }


def quantize_tensor_int8(arr: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetric per-tensor int8: scale = max|x| / 127, codes = round(x/scale).

    An all-zero tensor keeps scale 0 with all-zero codes (exact).
    """
    max_abs = float(np.abs(arr).max()) if arr.size else 0.0
    if max_abs == 0.0:
        return np.zeros(arr.shape, dtype=np.int8), 0.0
    scale = max_abs / 127.0
    codes = np.clip(np.round(arr.astype(np.float64) / scale), -127, 127).astype(np.int8)
    return codes, scale


def quantize_archive(
    src: str | os.PathLike,
    dst: str | os.PathLike,
    scheme: QuantScheme | None = None,
) -> SizeReport:
    """Rewrite ``src`` under ``scheme`` (default hybrid int8+fp16) into ``dst``.

    Tensor names and shapes are preserved; integer buffers pass through
    untouched. The report carries payload bytes before/after and each
    tensor's max |x - dequant(x)|.
    """
    scheme = scheme or default_quant_scheme()
    manifest, arrays = load_tensors(src)

    new_tensors: dict[str, dict] = {}
    chunks: list[bytes] = []
    per_tensor: dict[str, TensorQuantStats] = {}
    offset = 0
    for name, entry in manifest["tensors"].items():
        if entry.get("quant") is not None:
            raise ArchiveFormatError(f"tensor {name!r} is already quantized; re-quantization unsupported")
        arr = arrays[name]
        kind = classify_tensor(name, tuple(entry["shape"]), entry["dtype"])

        if kind == "buffer" or entry["dtype"] != "float32":
            stored, quant, max_err, scale = arr, None, 0.0, None
            stored_dtype = entry["dtype"]
        else:
            target = scheme.dtype_for(kind)
            if target == "float32":
                stored, quant, max_err, scale = arr, None, 0.0, None
                stored_dtype = "float32"
            elif target == "float16":
                stored = arr.astype(np.float16)
                quant = {"scheme": "float16"}
                max_err = float(np.abs(arr - stored.astype(np.float32)).max()) if arr.size else 0.0
                scale = None
                stored_dtype = "float16"
            else:
                codes, scale = quantize_tensor_int8(arr)
                stored = codes
                quant = {"scheme": INT8, "scale": scale}
                deq = codes.astype(np.float64) * scale
                max_err = float(np.abs(arr.astype(np.float64) - deq).max()) if arr.size else 0.0
                stored_dtype = "int8"

        raw = np.ascontiguousarray(stored).astype(DTYPE_TO_NP[stored_dtype], copy=False).tobytes()
        new_tensors[name] = {
            "shape": list(entry["shape"]),
            "dtype": stored_dtype,
            "file": PAYLOAD_NAME,
            "byte_offset": offset,
            "byte_length": len(raw),
            "quant": quant,
        }
        chunks.append(raw)
        offset += len(raw)
        per_tensor[name] = TensorQuantStats(
            kind=kind,
            stored_dtype=stored_dtype,
            bytes_before=entry["byte_length"],
            bytes_after=len(raw),
            max_error=max_err,
            scale=scale,
        )

    new_manifest = dict(manifest)
    new_manifest["tensors"] = new_tensors
    os.makedirs(dst, exist_ok=True)
    with open(os.path.join(dst, PAYLOAD_NAME), "wb") as fh:
        fh.write(b"".join(chunks))
    with open(os.path.join(dst, MANIFEST_NAME), "w") as fh:
        json.dump(new_manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    report = SizeReport(
        bytes_before=sum(e["byte_length"] for e in manifest["tensors"].values()),
        bytes_after=offset,
        per_tensor=per_tensor,
    )
    with open(os.path.join(dst, "size_report.json"), "w") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
