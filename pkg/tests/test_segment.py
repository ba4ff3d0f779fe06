"""Hard-cut segmentation behavior, including the threshold boundary
and fade lookahead."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from avtk.errors import DimensionMismatch
from avtk.media import FrameBuffer
from avtk.segment import frame_msd, iter_fragments, split_segments
from conftest import flat_frame


def frames_of(values, fps=10):
    """Flat frames at the given pixel values, evenly spaced timestamps."""
    return [FrameBuffer.from_array(flat_frame(4, 4, v), Fraction(k, fps))
            for k, v in enumerate(values)]


def tags(values, threshold=90.0, lookahead=0):
    return [idx for idx, _ in iter_fragments(iter(frames_of(values)),
                                             threshold, lookahead)]


def test_black_to_white_splits():
    assert tags([0, 0, 0, 255, 255]) == [0, 0, 0, 1, 1]


def test_jump_of_nine_does_not_split():
    # squared difference 81, below the threshold of 90
    assert tags([100, 109, 100]) == [0, 0, 0]


def test_jump_of_ten_splits():
    # squared difference 100, strictly above 90
    assert tags([100, 110, 100]) == [0, 1, 2]


def test_threshold_is_strict():
    a = frames_of([0, 0])[0]
    rng = np.random.default_rng(1)
    # craft a pair with MSD exactly 90: 90 = mean of squared diffs;
    # with 48 bytes, need sum 4320 = 48 * 90; use diffs of sqrt(90)?
    # integers: 43 diffs of 10 (4300) + 1 diff of...not reachable with
    # squares; use threshold equal to an attainable MSD instead.
    vals = np.zeros(48, np.uint8)
    vals[:12] = 20  # 12 * 400 = 4800, MSD = 100
    b = FrameBuffer(width=4, height=4, pixels=vals.tobytes(),
                    timestamp=Fraction(1, 10))
    assert frame_msd(a, b) == 100.0
    got = [i for i, _ in iter_fragments(iter([a, b]), cut_threshold=100.0)]
    assert got == [0, 0]  # equal to threshold: same fragment
    got = [i for i, _ in iter_fragments(iter([a, b]), cut_threshold=99.0)]
    assert got == [0, 1]


def test_msd_dimension_mismatch():
    a = FrameBuffer.from_array(flat_frame(4, 4, 0), Fraction(0))
    b = FrameBuffer.from_array(flat_frame(4, 5, 0), Fraction(0))
    with pytest.raises(DimensionMismatch):
        frame_msd(a, b)


def test_first_frame_is_fragment_zero():
    assert tags([255]) == [0]


def test_multiple_cuts_count_up():
    assert tags([0, 0, 200, 200, 50, 50]) == [0, 0, 1, 1, 2, 2]


# ---------------------------------------------------------------------------
# fade lookahead

def test_slow_fade_missed_without_lookahead():
    # per-step difference 6 -> MSD 36 each step, never over 90,
    # although the whole ramp moves 0 -> 60
    ramp = list(range(0, 66, 6))
    assert tags(ramp) == [0] * len(ramp)


def test_slow_fade_caught_with_lookahead():
    ramp = list(range(0, 66, 6))
    got = tags(ramp, lookahead=2)
    # with two frames of lookahead the score compares k-1 against
    # k..k+2: max difference 18 -> MSD 324, over the threshold
    assert got[0] == 0
    assert max(got) >= 1


def test_lookahead_zero_matches_plain_scoring():
    rng = np.random.default_rng(3)
    vals = rng.integers(0, 256, size=30).tolist()
    assert tags(vals, lookahead=0) == tags(vals)


def test_lookahead_does_not_resplit_single_cut():
    # one sharp cut; lookahead must still report exactly two fragments
    vals = [10] * 5 + [200] * 5
    for la in (0, 1, 3):
        got = tags(vals, lookahead=la)
        assert got == [0] * 5 + [1] * 5, f"lookahead={la}"


# ---------------------------------------------------------------------------
# split_segments summaries

def test_split_segments_boundaries():
    segs = split_segments(frames_of([0, 0, 255, 255], fps=2), 90.0)
    assert len(segs) == 2
    first, second = segs
    assert first.fragment_index == 0
    assert first.start_frame == 0 and first.end_frame == 2
    assert first.start_time == 0 and first.end_time == Fraction(2, 2)
    assert second.start_frame == 2 and second.end_frame == 4
    assert second.start_time == Fraction(2, 2)
    # end of the last fragment extends one inter-frame gap past the
    # last timestamp
    assert second.end_time == Fraction(4, 2)


def test_split_segments_single_frame():
    segs = split_segments(frames_of([128], fps=4), 90.0)
    assert len(segs) == 1
    assert segs[0].end_time == segs[0].start_time == Fraction(0)


def test_split_segments_explicit_end_time():
    segs = split_segments(frames_of([5, 5], fps=1), 90.0,
                          end_time=Fraction(7, 2))
    assert segs[-1].end_time == Fraction(7, 2)
