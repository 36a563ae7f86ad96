"""Baseline metrics and comparison reports.

ssim is the classic single-scale index on [0,1] grayscale with an 11-tap
Gaussian window. eval_state_table averages SSIM / perceptual / culinary
similarity over (raw, state) pairs; trajectory_report tracks all three
against an anchor across a session, exposing each metric's dynamic range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .cis import EmbeddingNet, f_cul
from .images import to_tensor
from .sessions import COOKED_STATES, CookingSession
from .training import perceptual_loss

log = logging.getLogger(__name__)

PAIR_KINDS = ("raw-raw", "raw-basic", "raw-standard", "raw-extended")


def _to_gray01(image: np.ndarray) -> np.ndarray:
    """H x W x 3 in [-1,1] (or H x W already gray) -> H x W in [0,1]."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    return (arr + 1.0) / 2.0


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    window_size: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Mean structural similarity over the valid-windowed map; range [-1, 1]."""
    if np.asarray(a).shape != np.asarray(b).shape:
        raise ValueError(f"image shape mismatch: {np.asarray(a).shape} vs {np.asarray(b).shape}")
    x, y = _to_gray01(a), _to_gray01(b)
    if min(x.shape) < window_size:
        raise ValueError(f"window {window_size} larger than image {x.shape}")
    w = _gaussian_window(window_size, sigma)
    c1, c2 = k1**2, k2**2  # dynamic range L = 1

    mu_x = convolve2d(x, w, mode="valid")
    mu_y = convolve2d(y, w, mode="valid")
    var_x = convolve2d(x * x, w, mode="valid") - mu_x**2
    var_y = convolve2d(y * y, w, mode="valid") - mu_y**2
    cov = convolve2d(x * y, w, mode="valid") - mu_x * mu_y

    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float((num / den).mean())


@dataclass
class StateRow:
    mean_ssim: float
    mean_one_minus_perc: float
    mean_cis: float
    count: int


@dataclass
class StateTable:
    rows: dict[str, StateRow]
    perceptual_label: str  # names the perceptual impl actually used

    def to_csv(self, path) -> None:
        lines = [f"pair,mean_ssim,mean_one_minus_{self.perceptual_label},mean_cis,count"]
        for kind in PAIR_KINDS:
            if kind in self.rows:
                r = self.rows[kind]
                lines.append(
                    f"{kind},{r.mean_ssim:.10g},{r.mean_one_minus_perc:.10g},"
                    f"{r.mean_cis:.10g},{r.count}"
                )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _perc_distance(a: np.ndarray, b: np.ndarray, impl: str) -> float:
    return float(perceptual_loss(to_tensor(a), to_tensor(b), impl))


def eval_state_table(
    cis_net: EmbeddingNet,
    perceptual_impl: str,
    sessions: list[CookingSession],
) -> StateTable:
    """Per-pair-kind metric means over every annotated (raw, state) pair."""
    acc: dict[str, list[tuple[float, float, float]]] = {k: [] for k in PAIR_KINDS}
    for s in sessions:
        if "raw" not in s.annotations:
            continue
        raw_img = s.frames[0].image
        acc["raw-raw"].append(
            (
                ssim(raw_img, raw_img),
                1.0 - _perc_distance(raw_img, raw_img, perceptual_impl),
                f_cul(cis_net, raw_img, raw_img),
            )
        )
        for state in COOKED_STATES:
            if state not in s.annotations:
                continue
            img = s.frames[s.annotations[state]].image
            acc[f"raw-{state}"].append(
                (
                    ssim(raw_img, img),
                    1.0 - _perc_distance(raw_img, img, perceptual_impl),
                    f_cul(cis_net, raw_img, img),
                )
            )
    if not acc["raw-raw"]:
        raise ValueError("eval_state_table needs at least one session annotated with raw")
    rows = {}
    for kind, triples in acc.items():
        if not triples:
            continue
        arr = np.array(triples)
        rows[kind] = StateRow(
            mean_ssim=float(arr[:, 0].mean()),
            mean_one_minus_perc=float(arr[:, 1].mean()),
            mean_cis=float(arr[:, 2].mean()),
            count=len(triples),
        )
    return StateTable(rows=rows, perceptual_label=perceptual_impl)


@dataclass
class TrajectoryRow:
    t_seconds: float
    cis: float
    ssim: float
    one_minus_perc: float


@dataclass
class TrajectoryReport:
    rows: list[TrajectoryRow]
    cis_range: float
    ssim_range: float
    perc_range: float
    perceptual_label: str

    @property
    def range_ratio(self) -> float:
        """CIS dynamic range relative to SSIM's (large = CIS more discriminative)."""
        return self.cis_range / max(self.ssim_range, 1e-12)

    def to_csv(self, path) -> None:
        lines = [f"t_seconds,cis,ssim,one_minus_{self.perceptual_label}"]
        lines += [
            f"{r.t_seconds:.10g},{r.cis:.10g},{r.ssim:.10g},{r.one_minus_perc:.10g}"
            for r in self.rows
        ]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def trajectory_report(
    cis_net: EmbeddingNet,
    session: CookingSession,
    anchor: int | np.ndarray = 0,
    perceptual_impl: str = "pyramid-l1",
) -> TrajectoryReport:
    """Compare an anchor (frame index or arbitrary image) against every frame."""
    if session.n_frames == 0:
        raise ValueError("trajectory_report needs a nonempty session")
    if isinstance(anchor, (int, np.integer)):
        if not 0 <= anchor < session.n_frames:
            raise ValueError(f"anchor index {anchor} out of bounds for {session.n_frames} frames")
        anchor_img = session.frames[anchor].image
    else:
        anchor_img = np.asarray(anchor)

    rows = []
    for f in session.frames:
        rows.append(
            TrajectoryRow(
                t_seconds=f.t_seconds,
                cis=f_cul(cis_net, anchor_img, f.image),
                ssim=ssim(anchor_img, f.image),
                one_minus_perc=1.0 - _perc_distance(anchor_img, f.image, perceptual_impl),
            )
        )
    cis_vals = [r.cis for r in rows]
    ssim_vals = [r.ssim for r in rows]
    perc_vals = [r.one_minus_perc for r in rows]
    report = TrajectoryReport(
        rows=rows,
        cis_range=max(cis_vals) - min(cis_vals),
        ssim_range=max(ssim_vals) - min(ssim_vals),
        perc_range=max(perc_vals) - min(perc_vals),
        perceptual_label=perceptual_impl,
    )
    log.info(
        "trajectory %s: cis range %.4f, ssim range %.4f, ratio %.2f",
        session.session_id,
        report.cis_range,
        report.ssim_range,
        report.range_ratio,
    )
    return report
