import numpy as np
import pytest

from cookgen.cis import embed
from cookgen.monitor import (
    MonitorConfig,
    MonitorState,
    StopDecision,
    run_session_offline,
    start_monitor,
)
from cookgen.sessions import Frame, synth_session


def _state(window=3, confirm=2, min_peak=0.5):
    cfg = MonitorConfig(smooth_window=window, peak_confirm=confirm, min_peak_sim=min_peak)
    return MonitorState(net=None, target_embedding=None, cfg=cfg)


def _push_all(state, sims, dt=30.0):
    out = []
    for i, s in enumerate(sims):
        out.append(state.push(i * dt, s))
    return out


# --- config ---------------------------------------------------------


def test_monitor_config_validation():
    with pytest.raises(ValueError):
        MonitorConfig(smooth_window=2)
    with pytest.raises(ValueError):
        MonitorConfig(smooth_window=-1)
    with pytest.raises(ValueError):
        MonitorConfig(peak_confirm=0)
    with pytest.raises(ValueError):
        MonitorConfig(min_peak_sim=1.5)


# --- smoothing ---------------------------------------------------------


def test_smoothing_shrinks_at_boundaries():
    st = _state(window=3, confirm=2, min_peak=1.0)  # threshold 1.0: never stops
    _push_all(st, [0.0, 1.0, 0.0, 1.0, 0.0])
    np.testing.assert_allclose(st.smoothed, [0.5, 1 / 3, 2 / 3, 1 / 3, 0.5], atol=1e-12)


def test_smoothing_window_one_is_identity():
    st = _state(window=1, confirm=1, min_peak=1.0)
    sims = [0.1, 0.9, 0.3, 0.6]
    _push_all(st, sims)
    np.testing.assert_allclose(st.smoothed, sims, atol=1e-15)


# --- stop rule ---------------------------------------------------------


def test_hand_trace_stops_at_peak_frame():
    # trace 0.2 0.4 0.7 0.9 0.85 0.80, window 1, confirm 2:
    # the sixth frame is the second strictly-lower sample, so stop fires
    # there and points back at index 3
    st = _state(window=1, confirm=2, min_peak=0.5)
    decisions = _push_all(st, [0.2, 0.4, 0.7, 0.9, 0.85, 0.80])
    assert [d.stopped for d in decisions] == [False] * 5 + [True]
    assert decisions[-1].index == 3
    assert decisions[-1].t_seconds == 90.0
    assert not st.running


def test_monotone_rising_never_stops():
    st = _state(window=3, confirm=2, min_peak=0.5)
    decisions = _push_all(st, np.linspace(0.1, 0.99, 40))
    assert not any(d.stopped for d in decisions)
    assert st.running


def test_peak_below_threshold_is_ignored():
    st = _state(window=1, confirm=2, min_peak=0.5)
    decisions = _push_all(st, [0.2, 0.45, 0.3, 0.2, 0.1])
    assert not any(d.stopped for d in decisions)


def test_plateau_is_not_a_peak():
    # equal samples after the max are not "strictly lower"
    st = _state(window=1, confirm=2, min_peak=0.5)
    decisions = _push_all(st, [0.3, 0.9, 0.9, 0.9, 0.9])
    assert not any(d.stopped for d in decisions)


def test_step_after_stop_raises():
    st = _state(window=1, confirm=1, min_peak=0.5)
    _push_all(st, [0.9, 0.4])
    with pytest.raises(RuntimeError, match="stopped"):
        st.push(999.0, 0.5)


def test_non_monotone_timestamp_raises():
    st = _state()
    st.push(0.0, 0.1)
    with pytest.raises(ValueError, match="not after"):
        st.push(0.0, 0.2)


def test_stop_decision_is_frozen():
    d = StopDecision(stopped=True, index=2, t_seconds=60.0)
    with pytest.raises(Exception):
        d.stopped = False


# --- end-to-end over real frames ---------------------------------------------------------


def test_start_monitor_embeds_target(tiny_cis, disc_spec):
    s = synth_session(disc_spec, n_frames=8, img_size=32)
    target = s.frames[5].image
    st = start_monitor(tiny_cis, target)
    assert np.allclose(st.target_embedding, embed(tiny_cis, target), atol=1e-6)
    d = st.step(s.frames[0])
    assert isinstance(d, StopDecision)
    assert 0.0 <= st.history[0][1] <= 1.0


def test_run_session_offline_report_shape(tiny_cis, disc_spec):
    s = synth_session(disc_spec, n_frames=8, img_size=32)
    report = run_session_offline(tiny_cis, s, s.frames[5].image)
    assert 1 <= len(report.rows) <= 8
    assert [r.frame_index for r in report.rows] == list(range(len(report.rows)))
    if report.stopped:
        stop_rows = [r for r in report.rows if r.decision == "stop"]
        assert len(stop_rows) == 1 and stop_rows[0] is report.rows[-1]
        assert report.stop_index <= len(report.rows) - 1
    else:
        assert all(r.decision == "continue" for r in report.rows)
        assert len(report.rows) == 8


def test_run_session_offline_rejects_empty(tiny_cis):
    from cookgen.sessions import CookingSession

    empty = CookingSession("e", "r", [], duration_T=0.0, annotations={})
    with pytest.raises(ValueError):
        run_session_offline(tiny_cis, empty, np.zeros((32, 32, 3), np.float32))


def test_trace_csv(tmp_path, tiny_cis, disc_spec):
    s = synth_session(disc_spec, n_frames=8, img_size=32)
    report = run_session_offline(tiny_cis, s, s.frames[5].image)
    p = tmp_path / "trace.csv"
    report.to_csv(p)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "frame_index,t_seconds,raw_similarity,smoothed,decision"
    assert len(lines) == len(report.rows) + 1
