"""Cooking-session data model, the procedural synthetic-session oracle,
on-disk ingestion, dataset splits, augmentation, and temporal ground truth.

A session is a fixed-interval image sequence of one dish. Synthetic sessions
render a simple dish shape whose interior colour follows a logistic browning
curve and whose footprint scales linearly over the session; they are the
fully analytic stand-in for real captured data and drive every oracle test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .images import load_png, save_png

STATE_ORDER = ("raw", "basic", "standard", "extended")
COOKED_STATES = ("basic", "standard", "extended")
SHAPE_KINDS = ("disc", "rectangle", "blob-cluster")

DEFAULT_INTERVAL_S = 30.0
SESSION_META_NAME = "session.json"


class SessionFormatError(ValueError):
    """An on-disk session directory violates the expected layout."""


@dataclass
class Frame:
    """One captured image plus its capture-time offset in seconds."""

    image: np.ndarray  # H x W x 3 float32 in [-1, 1]
    t_seconds: float


@dataclass
class CookingSession:
    session_id: str
    recipe_id: str
    frames: list[Frame]
    duration_T: float
    annotations: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = [f.t_seconds for f in self.frames]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError(f"session {self.session_id}: timestamps must be nondecreasing")
        if self.frames and not math.isclose(self.duration_T, times[-1], abs_tol=1e-9):
            raise ValueError(
                f"session {self.session_id}: duration_T={self.duration_T} != last frame t={times[-1]}"
            )
        for state, idx in self.annotations.items():
            if state not in STATE_ORDER:
                raise ValueError(f"unknown state name {state!r}")
            if not 0 <= idx < len(self.frames):
                raise ValueError(f"annotation {state}={idx} out of range")
        if "raw" in self.annotations and self.annotations["raw"] != 0:
            raise ValueError("raw annotation must point at frame 0")
        marked = [self.annotations[s] for s in STATE_ORDER if s in self.annotations]
        if any(b <= a for a, b in zip(marked, marked[1:])):
            raise ValueError(f"annotated indices must strictly increase: {self.annotations}")

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def images(self) -> np.ndarray:
        """All frames stacked as N x H x W x 3."""
        return np.stack([f.image for f in self.frames])


@dataclass(frozen=True)
class SyntheticRecipeSpec:
    """Analytic description of one synthetic dish.

    size_factor is the final/initial footprint (area) ratio: < 1 shrinks
    (meat-like), > 1 expands (cookie-like). state_fractions locate the
    basic/standard/extended annotations as fractions of the session length.
    """

    name: str
    shape_kind: str = "disc"
    raw_color: tuple[float, float, float] = (0.9, 0.8, 0.6)
    extended_color: tuple[float, float, float] = (0.35, 0.2, 0.08)
    browning_rate: float = 8.0
    browning_midpoint: float = 0.5
    size_factor: float = 1.0
    texture_noise_gain: float = 0.02
    state_fractions: tuple[float, float, float] = (0.4, 0.7, 0.95)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.shape_kind not in SHAPE_KINDS:
            raise ValueError(f"shape_kind must be one of {SHAPE_KINDS}, got {self.shape_kind!r}")
        for cname, col in (("raw_color", self.raw_color), ("extended_color", self.extended_color)):
            if len(col) != 3 or any(not 0.0 <= c <= 1.0 for c in col):
                raise ValueError(f"{cname} must be an RGB triple in [0,1], got {col}")
        if self.browning_rate <= 0:
            raise ValueError("browning_rate must be positive")
        if not 0.0 < self.browning_midpoint < 1.0:
            raise ValueError("browning_midpoint must lie in (0,1)")
        if self.size_factor <= 0:
            raise ValueError("size_factor must be positive")
        if self.texture_noise_gain < 0:
            raise ValueError("texture_noise_gain must be nonnegative")
        f = self.state_fractions
        if len(f) != 3 or not (0.0 < f[0] < f[1] < f[2] <= 1.0):
            raise ValueError(f"state_fractions must be strictly increasing in (0,1], got {f}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "shape_kind": self.shape_kind,
            "raw_color": list(self.raw_color),
            "extended_color": list(self.extended_color),
            "browning_rate": self.browning_rate,
            "browning_midpoint": self.browning_midpoint,
            "size_factor": self.size_factor,
            "texture_noise_gain": self.texture_noise_gain,
            "state_fractions": list(self.state_fractions),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticRecipeSpec":
        d = dict(d)
        for key in ("raw_color", "extended_color", "state_fractions"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class DatasetSplit:
    train: list[str]
    val: list[str]
    test: list[str]

    def __post_init__(self) -> None:
        groups = [set(self.train), set(self.val), set(self.test)]
        total = sum(len(g) for g in groups)
        union = set().union(*groups)
        if total != len(union):
            raise ValueError("split lists must be disjoint and free of duplicates")

    def to_dict(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test)}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSplit":
        return cls(train=list(d["train"]), val=list(d["val"]), test=list(d["test"]))


@dataclass
class SimilarityMatrix:
    values: np.ndarray  # n x n
    kind: str  # "ground_truth_temporal" | "predicted"

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"similarity matrix must be square, got shape {v.shape}")
        if self.kind not in ("ground_truth_temporal", "predicted"):
            raise ValueError(f"unknown similarity-matrix kind {self.kind!r}")
        self.values = v


# ---------------------------------------------------------------------------
# Synthetic-session oracle
# ---------------------------------------------------------------------------


def browning_level(spec: SyntheticRecipeSpec, u) -> np.ndarray | float:
    """Normalized logistic doneness at session fraction u in [0, 1].

    Pinned so level(0) = 0 and level(1) = 1 exactly; the raw logistic
    sigmoid(rate * (u - midpoint)) is rescaled between its endpoint values.
    """
    u = np.asarray(u, dtype=np.float64)
    r, m = spec.browning_rate, spec.browning_midpoint

    def sig(x):
        return 1.0 / (1.0 + np.exp(-x))

    lo, hi = sig(r * (0.0 - m)), sig(r * (1.0 - m))
    out = (sig(r * (u - m)) - lo) / (hi - lo)
    return float(out) if out.ndim == 0 else out


def interior_color(spec: SyntheticRecipeSpec, u: float) -> np.ndarray:
    """Noise-free interior RGB (in [0,1]) at session fraction u."""
    level = browning_level(spec, u)
    raw = np.asarray(spec.raw_color, dtype=np.float64)
    ext = np.asarray(spec.extended_color, dtype=np.float64)
    return raw + (ext - raw) * level


def footprint_scale(spec: SyntheticRecipeSpec, u: float) -> float:
    """Footprint (area) ratio vs the raw frame; linear from 1 to size_factor."""
    return 1.0 + (spec.size_factor - 1.0) * u


def _blob_centers(spec: SyntheticRecipeSpec, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.28, 0.72, size=(5, 2))


def synthetic_mask(
    spec: SyntheticRecipeSpec, u: float, img_size: int, centers: np.ndarray | None = None
) -> np.ndarray:
    """Boolean dish-interior mask at session fraction u.

    blob-cluster needs the per-session blob centers; passing None draws them
    from a fresh RNG seeded with spec.seed (matching synth_session).
    """
    yy, xx = np.mgrid[0:img_size, 0:img_size]
    yy = (yy + 0.5) / img_size
    xx = (xx + 0.5) / img_size
    lin = math.sqrt(footprint_scale(spec, u))  # linear scale = sqrt(area scale)
    if spec.shape_kind == "disc":
        r = 0.32 * lin
        return (yy - 0.5) ** 2 + (xx - 0.5) ** 2 <= r * r
    if spec.shape_kind == "rectangle":
        hh, hw = 0.30 * lin, 0.22 * lin
        return (np.abs(yy - 0.5) <= hh) & (np.abs(xx - 0.5) <= hw)
    if centers is None:
        centers = _blob_centers(spec, np.random.default_rng(spec.seed))
    r = 0.13 * lin
    mask = np.zeros((img_size, img_size), dtype=bool)
    for cy, cx in centers:
        mask |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    return mask


def state_frame_index(state_fraction: float, n_frames: int) -> int:
    """round(f * (n_frames - 1)) with round-half-up."""
    return int(math.floor(state_fraction * (n_frames - 1) + 0.5))


def synth_session(
    spec: SyntheticRecipeSpec,
    n_frames: int,
    interval_s: float = DEFAULT_INTERVAL_S,
    img_size: int = 64,
    session_id: str | None = None,
) -> CookingSession:
    """Render a deterministic synthetic cooking session.

    Frame k sits at t = k * interval_s. The dish interior follows the spec's
    logistic browning curve, the footprint scales linearly to size_factor,
    and zero-mean texture noise grows in amplitude with t. Background is -1.
    """
    if n_frames < 4:
        raise ValueError(f"n_frames must be >= 4, got {n_frames}")
    if interval_s <= 0:
        raise ValueError("interval_s must be positive")

    annotations = {"raw": 0}
    for state, frac in zip(COOKED_STATES, spec.state_fractions):
        annotations[state] = state_frame_index(frac, n_frames)
    marked = [annotations[s] for s in STATE_ORDER]
    if any(b <= a for a, b in zip(marked, marked[1:])):
        raise ValueError(
            f"state_fractions {spec.state_fractions} collide on frame indices {marked} "
            f"for n_frames={n_frames}"
        )

    rng = np.random.default_rng(spec.seed)
    centers = _blob_centers(spec, rng) if spec.shape_kind == "blob-cluster" else None

    frames = []
    for k in range(n_frames):
        u = k / (n_frames - 1)
        color = interior_color(spec, u) * 2.0 - 1.0  # to [-1, 1]
        mask = synthetic_mask(spec, u, img_size, centers)
        img = np.full((img_size, img_size, 3), -1.0, dtype=np.float32)
        img[mask] = color.astype(np.float32)
        amp = spec.texture_noise_gain * u
        noise = rng.normal(0.0, 1.0, size=(img_size, img_size, 3)).astype(np.float32)
        if amp > 0:
            img[mask] += amp * noise[mask]
        img = np.clip(img, -1.0, 1.0)
        frames.append(Frame(image=img, t_seconds=k * interval_s))

    return CookingSession(
        session_id=session_id or f"{spec.name}-{spec.seed:05d}",
        recipe_id=spec.name,
        frames=frames,
        duration_T=(n_frames - 1) * interval_s,
        annotations=annotations,
    )


# ---------------------------------------------------------------------------
# On-disk ingestion / persistence
# ---------------------------------------------------------------------------


def save_session(session: CookingSession, root: str | Path) -> Path:
    """Write `<root>/<session_id>/frame_####.png` plus session.json."""
    out = Path(root) / session.session_id
    out.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(session.frames):
        save_png(frame.image, out / f"frame_{k:04d}.png")
    times = [f.t_seconds for f in session.frames]
    interval = times[1] - times[0] if len(times) > 1 else DEFAULT_INTERVAL_S
    meta = {
        "recipe_id": session.recipe_id,
        "interval_s": interval,
        "annotations": dict(sorted(session.annotations.items())),
    }
    uniform = all(
        math.isclose(t, k * interval, abs_tol=1e-6) for k, t in enumerate(times)
    )
    if not uniform:
        meta["timestamps"] = times
    (out / SESSION_META_NAME).write_text(json.dumps(meta, indent=2, sort_keys=True))
    return out


def load_session(session_dir: str | Path) -> CookingSession:
    """Load one session directory (frames + session.json)."""
    session_dir = Path(session_dir)
    sid = session_dir.name
    meta_path = session_dir / SESSION_META_NAME
    if not meta_path.is_file():
        raise SessionFormatError(f"session {sid!r}: missing {SESSION_META_NAME}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as e:
        raise SessionFormatError(f"session {sid!r}: unreadable metadata: {e}") from e
    for key in ("recipe_id", "interval_s", "annotations"):
        if key not in meta:
            raise SessionFormatError(f"session {sid!r}: metadata missing field {key!r}")
    interval = float(meta["interval_s"])

    frame_paths = sorted(session_dir.glob("frame_*.png"))
    if not frame_paths:
        raise SessionFormatError(f"session {sid!r}: no frame_*.png files")
    indices = []
    for p in frame_paths:
        stem = p.stem.split("_", 1)[1]
        try:
            indices.append(int(stem))
        except ValueError as e:
            raise SessionFormatError(f"session {sid!r}: bad frame filename {p.name}") from e
    if indices != list(range(len(indices))):
        raise SessionFormatError(
            f"session {sid!r}: frame indices must run 0..N-1 without gaps, got {indices}"
        )

    if "timestamps" in meta:
        times = [float(t) for t in meta["timestamps"]]
        if len(times) != len(frame_paths):
            raise SessionFormatError(f"session {sid!r}: timestamps length != frame count")
        if times and times[0] != 0.0:
            raise SessionFormatError(f"session {sid!r}: timestamps must start at 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise SessionFormatError(f"session {sid!r}: non-monotone timestamps")
    else:
        if interval <= 0:
            raise SessionFormatError(f"session {sid!r}: non-monotone timestamps (interval_s <= 0)")
        times = [k * interval for k in range(len(frame_paths))]

    frames = [Frame(image=load_png(p), t_seconds=t) for p, t in zip(frame_paths, times)]
    annotations = {str(k): int(v) for k, v in meta["annotations"].items()}
    try:
        return CookingSession(
            session_id=sid,
            recipe_id=str(meta["recipe_id"]),
            frames=frames,
            duration_T=times[-1],
            annotations=annotations,
        )
    except ValueError as e:
        raise SessionFormatError(f"session {sid!r}: {e}") from e


def load_sessions(root: str | Path) -> list[CookingSession]:
    """Load every session directory under root, sorted by session id."""
    root = Path(root)
    if not root.is_dir():
        raise SessionFormatError(f"session root {root} is not a directory")
    return [load_session(d) for d in sorted(root.iterdir()) if d.is_dir()]


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------


def split_dataset(sessions: list[CookingSession], seed: int) -> DatasetSplit:
    """Deterministic 70:10:20 split, stratified by recipe_id.

    Each recipe's sessions are shuffled and split independently; fractional
    remainders go to train.
    """
    if len(sessions) < 10:
        raise ValueError(f"need at least 10 sessions to split, got {len(sessions)}")
    by_recipe: dict[str, list[str]] = {}
    for s in sessions:
        by_recipe.setdefault(s.recipe_id, []).append(s.session_id)

    rng = np.random.default_rng(seed)
    train: list[str] = []
    val: list[str] = []
    test: list[str] = []
    for recipe in sorted(by_recipe):
        ids = sorted(by_recipe[recipe])
        order = rng.permutation(len(ids))
        ids = [ids[i] for i in order]
        n = len(ids)
        n_val, n_test = n // 10, n * 2 // 10
        n_train = n - n_val - n_test
        train.extend(ids[:n_train])
        val.extend(ids[n_train : n_train + n_val])
        test.extend(ids[n_train + n_val :])
    return DatasetSplit(train=train, val=val, test=test)


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentParams:
    flip: bool
    angle_deg: float


def sample_augment_params(rng: np.random.Generator) -> AugmentParams:
    """Horizontal flip with p=0.5, rotation angle uniform in [-60, 60] degrees."""
    flip = bool(rng.random() < 0.5)
    angle = float(rng.uniform(-60.0, 60.0))
    return AugmentParams(flip=flip, angle_deg=angle)


def augment(
    image: np.ndarray,
    rng: np.random.Generator | None = None,
    params: AugmentParams | None = None,
) -> np.ndarray:
    """Flip-then-rotate augmentation; bilinear resampling, out-of-bounds = -1.

    Pass explicit params to share one transform across a (raw, cooked) pair
    or to force the identity (flip=False, angle_deg=0.0).
    """
    if params is None:
        if rng is None:
            raise ValueError("augment needs either an rng or explicit params")
        params = sample_augment_params(rng)
    out = np.asarray(image)
    if params.flip:
        out = out[:, ::-1, :]
    if params.angle_deg != 0.0:
        out = ndimage.rotate(
            out,
            params.angle_deg,
            axes=(0, 1),
            reshape=False,
            order=1,
            mode="constant",
            cval=-1.0,
        )
        out = np.clip(out, -1.0, 1.0)
    return np.ascontiguousarray(out, dtype=np.float32)


# ---------------------------------------------------------------------------
# Temporal ground truth / supervision pairs
# ---------------------------------------------------------------------------


def temporal_matrix(session: CookingSession) -> SimilarityMatrix:
    """Pairwise temporal proximity: value[i, j] = 1 - |t_i - t_j| / T."""
    if session.n_frames < 2:
        raise ValueError("temporal_matrix needs a session with >= 2 frames")
    if session.duration_T <= 0:
        raise ValueError("temporal_matrix needs duration_T > 0")
    t = np.array([f.t_seconds for f in session.frames], dtype=np.float64)
    values = 1.0 - np.abs(t[:, None] - t[None, :]) / session.duration_T
    return SimilarityMatrix(values=values, kind="ground_truth_temporal")


def pair_raw_state(
    session: CookingSession,
) -> list[tuple[np.ndarray, np.ndarray, str, str]]:
    """(raw image, state image, recipe_id, state name) per annotated cooked state."""
    if "raw" not in session.annotations:
        raise ValueError(f"session {session.session_id}: missing raw annotation")
    raw_img = session.frames[0].image
    pairs = []
    for state in COOKED_STATES:
        if state in session.annotations:
            idx = session.annotations[state]
            pairs.append((raw_img, session.frames[idx].image, session.recipe_id, state))
    if not pairs:
        raise ValueError(f"session {session.session_id}: no annotated cooked state")
    return pairs


# ---------------------------------------------------------------------------
# Synthetic spec files (JSON list of specs)
# ---------------------------------------------------------------------------


def load_spec_file(path: str | Path) -> list[SyntheticRecipeSpec]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ValueError("spec file must hold a JSON list of recipe specs")
    return [SyntheticRecipeSpec.from_dict(d) for d in data]


def save_spec_file(specs: list[SyntheticRecipeSpec], path: str | Path) -> None:
    Path(path).write_text(json.dumps([s.to_dict() for s in specs], indent=2, sort_keys=True))


def synth_dataset(
    specs: list[SyntheticRecipeSpec],
    out_root: str | Path,
    sessions_per_spec: int = 1,
    n_frames: int = 16,
    interval_s: float = DEFAULT_INTERVAL_S,
    img_size: int = 64,
) -> list[CookingSession]:
    """Render sessions_per_spec sessions per spec (seeds seed .. seed+k-1) to disk."""
    sessions = []
    for spec in specs:
        for k in range(sessions_per_spec):
            s = synth_session(
                replace(spec, seed=spec.seed + k),
                n_frames=n_frames,
                interval_s=interval_s,
                img_size=img_size,
            )
            save_session(s, out_root)
            sessions.append(s)
    return sessions
