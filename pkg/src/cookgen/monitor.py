"""Cooking-progress monitoring.

Frames stream in against a user-selected target image. Each step appends
the clamped similarity to the target, refreshes a centered moving average,
and stops once the running maximum of the smoothed trace has been followed
by peak_confirm strictly lower smoothed samples. The reported stop index is
the peak frame itself, not the frame that confirmed it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .cis import EmbeddingNet, embed
from .sessions import CookingSession, Frame


@dataclass
class MonitorConfig:
    interval_s: float = 30.0
    smooth_window: int = 3
    peak_confirm: int = 2
    min_peak_sim: float = 0.5

    def __post_init__(self) -> None:
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValueError(f"smooth_window must be odd and >= 1, got {self.smooth_window}")
        if self.peak_confirm < 1:
            raise ValueError("peak_confirm must be >= 1")
        if not 0.0 <= self.min_peak_sim <= 1.0:
            raise ValueError("min_peak_sim must lie in [0, 1]")


@dataclass(frozen=True)
class StopDecision:
    stopped: bool
    index: int | None = None
    t_seconds: float | None = None


_CONTINUE = StopDecision(stopped=False)


class MonitorState:
    """Live similarity history and stop status of one monitoring run."""

    def __init__(self, net: EmbeddingNet, target_embedding: np.ndarray, cfg: MonitorConfig):
        self.net = net
        self.target_embedding = target_embedding
        self.cfg = cfg
        self.history: list[tuple[float, float]] = []  # (t_seconds, raw similarity)
        self.smoothed: list[float] = []
        self.stopped_at: tuple[int, float] | None = None
        self.step_times: list[float] = []

    @property
    def running(self) -> bool:
        return self.stopped_at is None

    def _refresh_smoothed(self) -> None:
        # Only the trailing half-window of smoothed entries can change when a
        # sample arrives, so each step costs O(window^2), independent of n.
        raw = [r for _, r in self.history]
        n = len(raw)
        h = self.cfg.smooth_window // 2
        if len(self.smoothed) < n:
            self.smoothed.extend([0.0] * (n - len(self.smoothed)))
        for i in range(max(0, n - 1 - h), n):
            lo, hi = max(0, i - h), min(n, i + h + 1)
            self.smoothed[i] = float(np.mean(raw[lo:hi]))

    def _check_peak(self) -> StopDecision:
        s = self.smoothed
        n = len(s)
        m = int(np.argmax(s))  # earliest maximum so far
        if s[m] < self.cfg.min_peak_sim:
            return _CONTINUE
        confirm = self.cfg.peak_confirm
        if n - 1 - m < confirm:
            return _CONTINUE
        if all(s[m + j] < s[m] for j in range(1, confirm + 1)):
            t = self.history[m][0]
            self.stopped_at = (m, t)
            return StopDecision(stopped=True, index=m, t_seconds=t)
        return _CONTINUE

    def push(self, t_seconds: float, raw_similarity: float) -> StopDecision:
        """Ingest one already-computed similarity sample (the core of step)."""
        if not self.running:
            raise RuntimeError("monitor already stopped; state is immutable")
        if self.history and t_seconds <= self.history[-1][0]:
            raise ValueError(
                f"frame timestamp {t_seconds} not after last seen {self.history[-1][0]}"
            )
        self.history.append((t_seconds, float(raw_similarity)))
        self._refresh_smoothed()
        return self._check_peak()

    def step(self, frame: Frame) -> StopDecision:
        t0 = time.perf_counter()
        sim = float(np.dot(embed(self.net, frame.image), self.target_embedding))
        decision = self.push(frame.t_seconds, min(1.0, max(0.0, sim)))
        self.step_times.append(time.perf_counter() - t0)
        return decision


def start_monitor(
    cis_net: EmbeddingNet, target_image: np.ndarray, cfg: MonitorConfig | None = None
) -> MonitorState:
    """Embed the target once and open a fresh monitoring run."""
    cfg = cfg or MonitorConfig()
    target_embedding = embed(cis_net, target_image)
    return MonitorState(cis_net, target_embedding, cfg)


@dataclass
class TraceRow:
    frame_index: int
    t_seconds: float
    raw_similarity: float
    smoothed: float
    decision: str  # "continue" | "stop"


@dataclass
class MonitorReport:
    stop_index: int | None
    stop_t_seconds: float | None
    rows: list[TraceRow] = field(default_factory=list)

    @property
    def stopped(self) -> bool:
        return self.stop_index is not None

    def to_csv(self, path) -> None:
        lines = ["frame_index,t_seconds,raw_similarity,smoothed,decision"]
        lines += [
            f"{r.frame_index},{r.t_seconds:.10g},{r.raw_similarity:.10g},"
            f"{r.smoothed:.10g},{r.decision}"
            for r in self.rows
        ]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def run_session_offline(
    cis_net: EmbeddingNet,
    session: CookingSession,
    target_image: np.ndarray,
    cfg: MonitorConfig | None = None,
) -> MonitorReport:
    """Replay a recorded session through the live stepping path.

    Frames feed in order until a stop fires (or the session ends with no
    peak, reported as stop_index None). The smoothed column holds the final
    smoothed trace; the decision column marks the step that stopped the run.
    """
    if session.n_frames == 0:
        raise ValueError("cannot monitor an empty session")
    state = start_monitor(cis_net, target_image, cfg)
    decisions = []
    for frame in session.frames:
        decision = state.step(frame)
        decisions.append(decision)
        if decision.stopped:
            break
    rows = [
        TraceRow(
            frame_index=i,
            t_seconds=state.history[i][0],
            raw_similarity=state.history[i][1],
            smoothed=state.smoothed[i],
            decision="stop" if decisions[i].stopped else "continue",
        )
        for i in range(len(state.history))
    ]
    if state.stopped_at is None:
        return MonitorReport(stop_index=None, stop_t_seconds=None, rows=rows)
    return MonitorReport(stop_index=state.stopped_at[0], stop_t_seconds=state.stopped_at[1], rows=rows)
