"""Windowing, filtering and normalization of extracted pairs."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from avtk.errors import NoFrameInWindow
from avtk.extract import (VideoPairExtractor, center_crop_resize, is_dark,
                          is_silent, middle_frame, subsample, window_audio)
from avtk.media import AudioClip, FilterConfig, FrameBuffer
from conftest import flat_frame, loud_audio, quiet_gap_audio


def fb(value, ts, w=8, h=8):
    return FrameBuffer.from_array(flat_frame(w, h, value), Fraction(ts))


# ---------------------------------------------------------------------------
# window arithmetic

def test_window_audio_counts_whole_seconds():
    assert len(window_audio(loud_audio(16000))) == 1
    assert len(window_audio(loud_audio(16000 * 3))) == 3
    assert len(window_audio(loud_audio(16000 * 3 + 15999))) == 3
    assert len(window_audio(loud_audio(15999))) == 0


def test_window_audio_slices_are_consecutive():
    samples = np.arange(32000, dtype=np.int16)
    w0, w1 = window_audio(samples)
    assert (w0.samples == samples[:16000]).all()
    assert (w1.samples == samples[16000:]).all()


def test_middle_frame_picks_nearest_to_half_second():
    frames = [fb(0, Fraction(k, 10)) for k in range(10)]  # 0.0 .. 0.9
    got = middle_frame(frames, Fraction(0))
    assert got.timestamp == Fraction(5, 10)


def test_middle_frame_tie_prefers_earlier():
    frames = [fb(0, Fraction(1, 4)), fb(0, Fraction(3, 4))]  # both 0.25 away
    got = middle_frame(frames, Fraction(0))
    assert got.timestamp == Fraction(1, 4)


def test_middle_frame_respects_window_offset():
    frames = [fb(0, Fraction(30, 10)), fb(0, Fraction(34, 10)),
              fb(0, Fraction(36, 10))]
    got = middle_frame(frames, Fraction(3))
    assert got.timestamp == Fraction(34, 10)  # nearest to 3.5, ties earlier


def test_middle_frame_empty_window():
    with pytest.raises(NoFrameInWindow):
        middle_frame([], Fraction(0))


# ---------------------------------------------------------------------------
# filters

def test_silence_boundary_is_exact():
    need = int(0.5 * 16000)  # 8000 samples
    assert is_silent(AudioClip(quiet_gap_audio(16000, 1000, need)))
    assert not is_silent(AudioClip(quiet_gap_audio(16000, 1000, need - 1)))


def test_silence_threshold_is_inclusive():
    clip = np.full(16000, 101, np.int16)
    clip[:8000] = 100  # |x| <= 100 counts as quiet
    assert is_silent(AudioClip(clip))
    clip[:8000] = -100
    assert is_silent(AudioClip(clip))


def test_all_zero_clip_is_silent():
    assert is_silent(AudioClip(np.zeros(16000, np.int16)))


def test_dark_mean_is_inclusive():
    assert is_dark(fb(10, 0))
    assert not is_dark(fb(11, 0))


def test_subsample_positions():
    items = list(range(10))
    assert subsample(items, 3) == [0, 3, 6, 9]
    assert subsample(items, 1) == items
    assert subsample([], 3) == []
    assert subsample([7], 3) == [7]


# ---------------------------------------------------------------------------
# normalization

def test_center_crop_resize_landscape():
    arr = np.zeros((40, 100, 3), np.uint8)
    arr[:, 30:70] = 200  # center strip bright
    out = center_crop_resize(FrameBuffer.from_array(arr, Fraction(0)), 16)
    assert out.width == out.height == 16
    # crop keeps columns [30, 70): the x offset is (100-40)//2 = 30
    assert set(out.as_array().flatten()) == {200}


def test_center_crop_resize_portrait_offset():
    arr = np.zeros((101, 41, 3), np.uint8)
    # offset floor((101-41)/2) = 30: rows [30, 71) survive
    arr[30:71] = 123
    out = center_crop_resize(FrameBuffer.from_array(arr, Fraction(0)), 8)
    assert set(out.as_array().flatten()) == {123}


def test_center_crop_resize_square_noop_dims():
    arr = np.full((512, 512, 3), 9, np.uint8)
    f = FrameBuffer.from_array(arr, Fraction(1, 3))
    out = center_crop_resize(f, 512)
    assert out.pixels == f.pixels
    assert out.timestamp == f.timestamp


def test_center_crop_resize_output_size():
    arr = np.random.default_rng(0).integers(0, 256, (30, 50, 3), np.uint8)
    out = center_crop_resize(FrameBuffer.from_array(arr.astype(np.uint8),
                                                    Fraction(0)), 512)
    assert out.width == out.height == 512
    assert len(out.pixels) == 512 * 512 * 3


# ---------------------------------------------------------------------------
# full extractor

def run_extractor(values_and_tags, audio, fps=4, config=None, duration=None):
    """values_and_tags: list of (fragment_tag, pixel_value)."""
    frames = [(tag, fb(val, Fraction(k, fps), 64, 64))
              for k, (tag, val) in enumerate(values_and_tags)]
    blocks = [np.asarray(audio, np.int16)]
    cfg = config or FilterConfig(out_size=16, min_crop_dim=1)
    ex = VideoPairExtractor(iter(frames), iter(blocks), cfg, Fraction(1, fps))
    got = list(ex.pairs())
    return ex, got


def test_single_fragment_basic_flow():
    # 2.5 s at 4 fps: 10 frames, one fragment -> 2 windows, both kept,
    # subsample keeps positions 0 (window 0); with keep_every=3 the
    # second surviving window (position 1) is dropped
    tags = [(0, 128)] * 10
    ex, got = run_extractor(tags, loud_audio(40000))
    assert ex.totals.windows == 2
    assert ex.totals.emitted == 1
    assert ex.totals.subsample_dropped == 1
    assert got[0].fragment_index == 0 and got[0].window_index == 0


def test_keep_every_one_keeps_everything():
    tags = [(0, 128)] * 10
    cfg = FilterConfig(out_size=16, min_crop_dim=1, keep_every=1)
    ex, got = run_extractor(tags, loud_audio(40000), config=cfg)
    assert ex.totals.windows == 2
    assert ex.totals.emitted == 2
    assert [p.window_index for p in got] == [0, 1]


def test_windows_restart_at_fragment_boundary():
    # fragment 0: frames at 0..0.75s (1s after adding frame duration ->
    # 1 window); fragment 1: 1.0..2.75s -> 1.75s... window arithmetic:
    # fragment 1 spans [1.0, 3.0) = 2 windows
    tags = [(0, 100)] * 4 + [(1, 220)] * 8
    cfg = FilterConfig(out_size=16, min_crop_dim=1, keep_every=1)
    ex, got = run_extractor(tags, loud_audio(16000 * 3), config=cfg)
    assert [(p.fragment_index, p.window_index) for p in got] == [
        (0, 0), (1, 0), (1, 1)]
    f0, f1 = ex.fragments
    assert f0.start_time == 0 and f0.end_time == 1
    assert f1.start_time == 1 and f1.end_time == 3


def test_subsample_is_per_fragment():
    # two fragments, each with 2 surviving windows; keep_every=3 keeps
    # survivor 0 of each fragment independently
    tags = [(0, 100)] * 8 + [(1, 220)] * 8
    ex, got = run_extractor(tags, loud_audio(16000 * 4))
    assert [(p.fragment_index, p.window_index) for p in got] == [(0, 0), (1, 0)]
    assert ex.totals.subsample_dropped == 2


def test_tail_under_one_second_ignored():
    tags = [(0, 128)] * 7  # 1.75 s -> 1 window only
    cfg = FilterConfig(out_size=16, min_crop_dim=1, keep_every=1)
    ex, _ = run_extractor(tags, loud_audio(28000), config=cfg)
    assert ex.totals.windows == 1


def test_sub_second_fragment_yields_no_window():
    tags = [(0, 128)] * 3  # 0.75 s
    ex, got = run_extractor(tags, loud_audio(12000))
    assert ex.totals.windows == 0
    assert got == []


def test_silent_window_dropped_and_counted():
    # window 0 quiet for exactly 8000 samples -> dropped; window 1 loud
    audio = np.concatenate([quiet_gap_audio(16000, 4000, 8000),
                            loud_audio(16000)])
    tags = [(0, 128)] * 8
    cfg = FilterConfig(out_size=16, min_crop_dim=1, keep_every=1)
    ex, got = run_extractor(tags, audio, config=cfg)
    assert ex.totals.windows == 2
    assert ex.totals.silence_dropped == 1
    assert ex.totals.emitted == 1
    assert got[0].window_index == 1


def test_quiet_run_one_short_survives():
    audio = np.concatenate([quiet_gap_audio(16000, 4000, 7999),
                            loud_audio(16000)])
    tags = [(0, 128)] * 8
    cfg = FilterConfig(out_size=16, min_crop_dim=1, keep_every=1)
    ex, got = run_extractor(tags, audio, config=cfg)
    assert ex.totals.silence_dropped == 0
    assert ex.totals.emitted == 2


def test_dark_window_dropped_and_counted():
    tags = [(0, 5)] * 4 + [(0, 128)] * 4  # first window's mid frame dark
    cfg = FilterConfig(out_size=16, min_crop_dim=1, keep_every=1)
    ex, got = run_extractor(tags, loud_audio(32000), config=cfg)
    assert ex.totals.dark_dropped == 1
    assert ex.totals.emitted == 1
    assert got[0].window_index == 1


def test_filter_order_silence_before_dark():
    # window both silent and dark: counted as silence only
    tags = [(0, 5)] * 4
    cfg = FilterConfig(out_size=16, min_crop_dim=1, keep_every=1)
    ex, got = run_extractor(tags, np.zeros(16000, np.int16), config=cfg)
    assert ex.totals.silence_dropped == 1
    assert ex.totals.dark_dropped == 0
    assert got == []


def test_counters_conserve():
    rng = np.random.default_rng(11)
    audio = rng.integers(-3000, 3000, 16000 * 6).astype(np.int16)
    tags = ([(0, 5)] * 4 + [(0, 128)] * 8 + [(1, 200)] * 8 + [(2, 30)] * 4)
    ex, _ = run_extractor(tags, audio)
    t = ex.totals
    assert t.balanced()
    assert t.windows == (t.emitted + t.silence_dropped + t.dark_dropped +
                         t.subsample_dropped + t.noframe_dropped +
                         t.audioshort_dropped)
    for frag in ex.fragments:
        assert frag.counters.balanced()


def test_audio_truncation_ends_windows():
    # frames cover 3 s but audio covers only 1.5 s: the second window
    # has no full second of audio and is dropped as short
    tags = [(0, 128)] * 12
    cfg = FilterConfig(out_size=16, min_crop_dim=1, keep_every=1)
    ex, got = run_extractor(tags, loud_audio(24000), config=cfg)
    assert ex.totals.emitted == 1
    assert ex.totals.audioshort_dropped >= 1
    assert [p.window_index for p in got] == [0]


def test_pair_audio_matches_window_span():
    samples = np.arange(32000, dtype=np.int16)
    tags = [(0, 128)] * 8
    cfg = FilterConfig(out_size=16, min_crop_dim=1, keep_every=1)
    _, got = run_extractor(tags, samples, config=cfg)
    assert (got[0].audio.samples == samples[:16000]).all()
    assert (got[1].audio.samples == samples[16000:32000]).all()


def test_emitted_images_are_normalized():
    tags = [(0, 128)] * 4
    cfg = FilterConfig(out_size=32, min_crop_dim=1, keep_every=1)
    _, got = run_extractor(tags, loud_audio(16000), config=cfg)
    assert got[0].image.width == got[0].image.height == 32
