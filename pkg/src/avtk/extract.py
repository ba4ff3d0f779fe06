"""Pair extraction: one second audio windows matched with middle frames.

Fragments are tiled with consecutive non-overlapping one second
windows starting at the fragment start; a sub-second tail yields no
window. Each window is paired with the decoded frame nearest the
window midpoint (earlier frame wins ties). Silent windows, dark
frames, and the subsample rule then thin the pairs, and survivors are
center cropped to a square and resized.

The module offers the per-step operations plus VideoPairExtractor, a
streaming form that holds only the current window's best frame and a
bounded audio buffer.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, TypeVar

import numpy as np

from . import _kernels
from .errors import NoFrameInWindow
from .media import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, FilterConfig, FrameBuffer, mean_pixel

T = TypeVar("T")

HALF_SECOND = Fraction(1, 2)


@dataclass(frozen=True)
class PairRecord:
    """One kept observation: normalized frame plus its second of audio."""

    global_id: int
    video_id: str
    fragment_index: int
    window_index: int
    image: FrameBuffer
    audio: AudioClip


def window_audio(samples: np.ndarray, start_time: Fraction = Fraction(0)) -> list[AudioClip]:
    """Cut fragment audio into consecutive one second clips.

    Windows start at the fragment start and do not overlap; a trailing
    remainder shorter than one second is dropped.
    """
    s = np.ascontiguousarray(np.asarray(samples, dtype=np.int16))
    n = s.shape[0] // CLIP_SAMPLES
    return [
        AudioClip(s[i * CLIP_SAMPLES:(i + 1) * CLIP_SAMPLES], start_time=start_time + i)
        for i in range(n)
    ]


def middle_frame(frames: Sequence[FrameBuffer], window_start: Fraction) -> FrameBuffer:
    """The frame nearest the midpoint of [window_start, window_start + 1).

    Only frames inside the window are candidates; ties go to the
    earlier frame. Raises NoFrameInWindow when the window is empty.
    """
    mid = window_start + HALF_SECOND
    best: FrameBuffer | None = None
    best_dist: Fraction | None = None
    for fr in frames:
        if not window_start <= fr.timestamp < window_start + 1:
            continue
        dist = abs(fr.timestamp - mid)
        if best_dist is None or dist < best_dist:
            best = fr
            best_dist = dist
    if best is None:
        raise NoFrameInWindow(f"no frame in [{window_start}, {window_start + 1})")
    return best


def is_silent(clip: AudioClip, silence_amp: int = 100, silence_dur: float = 0.5) -> bool:
    """True when the clip holds a quiet run of at least silence_dur seconds.

    A sample is quiet when |s| <= silence_amp. The run length bound is
    silence_dur * 16000 samples; a run of exactly that length counts.
    """
    need = silence_dur * SAMPLE_RATE
    return _kernels.longest_quiet_run(clip.samples, silence_amp) >= need


def is_dark(frame: FrameBuffer, dark_mean: float = 10.0) -> bool:
    """True when the frame's mean channel value is at or below dark_mean."""
    return mean_pixel(frame) <= dark_mean


def subsample(items: Sequence[T], keep_every: int = 3) -> list[T]:
    """Keep positions 0, keep_every, 2*keep_every, ... of the sequence."""
    if keep_every < 1:
        raise ValueError("keep_every must be at least 1")
    return list(items[::keep_every])


def center_crop_resize(frame: FrameBuffer, out_size: int = 512) -> FrameBuffer:
    """Center crop to a square of the shorter side, then bilinear resize.

    The crop offset along the longer axis is floor((long - short) / 2).
    """
    side = min(frame.width, frame.height)
    x_off = (frame.width - side) // 2
    y_off = (frame.height - side) // 2
    if x_off or y_off or side != frame.width or side != frame.height:
        arr = frame.as_array()[y_off:y_off + side, x_off:x_off + side]
        pixels = arr.tobytes()
    else:
        pixels = frame.pixels
    if side != out_size:
        pixels = _kernels.resize_bilinear(pixels, side, side, out_size, out_size)
    return FrameBuffer(width=out_size, height=out_size, pixels=pixels,
                       timestamp=frame.timestamp)


@dataclass
class WindowCounters:
    """Per-fragment (and per-video, summed) window accounting.

    windows = emitted + silence + dark + subsample + noframe + audioshort
    holds by construction; the last two are zero for well-formed input.
    """

    windows: int = 0
    emitted: int = 0
    silence_dropped: int = 0
    dark_dropped: int = 0
    subsample_dropped: int = 0
    noframe_dropped: int = 0
    audioshort_dropped: int = 0

    def add(self, other: "WindowCounters") -> None:
        self.windows += other.windows
        self.emitted += other.emitted
        self.silence_dropped += other.silence_dropped
        self.dark_dropped += other.dark_dropped
        self.subsample_dropped += other.subsample_dropped
        self.noframe_dropped += other.noframe_dropped
        self.audioshort_dropped += other.audioshort_dropped

    def balanced(self) -> bool:
        return self.windows == (self.emitted + self.silence_dropped
                                + self.dark_dropped + self.subsample_dropped
                                + self.noframe_dropped + self.audioshort_dropped)


@dataclass
class FragmentStats:
    fragment_index: int
    start_time: Fraction
    end_time: Fraction
    counters: WindowCounters = field(default_factory=WindowCounters)


@dataclass(frozen=True)
class ExtractedPair:
    """Extractor output before global ids exist."""

    fragment_index: int
    window_index: int
    image: FrameBuffer
    audio: AudioClip


class AudioCursor:
    """Forward-only sample reader over an iterator of int16 blocks."""

    def __init__(self, blocks: Iterable[np.ndarray]):
        self._it = iter(blocks)
        self._chunks: deque[tuple[int, np.ndarray]] = deque()
        self._next_abs = 0
        self._floor = 0
        self._eof = False

    def _pull(self) -> None:
        try:
            blk = next(self._it)
        except StopIteration:
            self._eof = True
            return
        arr = np.asarray(blk, dtype=np.int16)
        if arr.size:
            self._chunks.append((self._next_abs, arr))
            self._next_abs += arr.size

    def read(self, start: int, stop: int) -> np.ndarray | None:
        """Samples [start, stop), or None when the stream ends first.

        Reads must not rewind: start may not precede an earlier start.
        """
        if start < self._floor:
            raise ValueError("audio cursor cannot rewind")
        if stop <= start:
            raise ValueError("empty read")
        self._floor = start
        while self._next_abs < stop and not self._eof:
            self._pull()
        if self._next_abs < stop:
            return None
        while self._chunks and self._chunks[0][0] + self._chunks[0][1].size <= start:
            self._chunks.popleft()
        parts = []
        for abs_start, arr in self._chunks:
            if abs_start >= stop:
                break
            lo = max(start - abs_start, 0)
            hi = min(stop - abs_start, arr.size)
            parts.append(arr[lo:hi])
        out = np.concatenate(parts) if len(parts) != 1 else parts[0].copy()
        return out


class VideoPairExtractor:
    """Streaming window/pair extraction over one video's decoded streams.

    Frames arrive already border-cropped and tagged with fragment
    indices (see segment.iter_fragments); audio arrives as raw int16
    blocks. pairs() yields surviving ExtractedPairs in order and fills
    in fragment statistics as a side effect.
    """

    def __init__(self, tagged_frames: Iterable[tuple[int, FrameBuffer]],
                 audio_blocks: Iterable[np.ndarray],
                 config: FilterConfig,
                 frame_duration: Fraction):
        self._frames = iter(tagged_frames)
        self._audio = AudioCursor(audio_blocks)
        self._cfg = config
        self._frame_duration = frame_duration
        self.fragments: list[FragmentStats] = []
        self.totals = WindowCounters()
        self._last_ts: Fraction | None = None

        # live fragment state
        self._frag: FragmentStats | None = None
        self._sample0 = 0
        self._win = 0
        self._best: FrameBuffer | None = None
        self._best_dist: Fraction | None = None
        self._survivors = 0
        self._audio_dead = False

    def pairs(self) -> Iterator[ExtractedPair]:
        for frag_idx, fr in self._frames:
            if self._frag is None or frag_idx != self._frag.fragment_index:
                yield from self._close_fragment(fr.timestamp)
                self._open_fragment(frag_idx, fr.timestamp)
            else:
                yield from self._advance_to(fr.timestamp)
            self._consider(fr)
            self._last_ts = fr.timestamp
        if self._frag is not None:
            assert self._last_ts is not None
            yield from self._close_fragment(self._last_ts + self._frame_duration)

    def _open_fragment(self, index: int, start: Fraction) -> None:
        self._frag = FragmentStats(fragment_index=index, start_time=start, end_time=start)
        self.fragments.append(self._frag)
        # sample index where this fragment's audio begins
        self._sample0 = int(start * SAMPLE_RATE)
        self._win = 0
        self._best = None
        self._best_dist = None
        self._survivors = 0

    def _win_start(self) -> Fraction:
        assert self._frag is not None
        return self._frag.start_time + self._win

    def _advance_to(self, ts: Fraction) -> Iterator[ExtractedPair]:
        """Finalize windows that end at or before the new frame time."""
        while self._frag is not None and ts >= self._win_start() + 1:
            yield from self._finalize_window()

    def _close_fragment(self, at: Fraction) -> Iterator[ExtractedPair]:
        if self._frag is None:
            return
        while self._win_start() + 1 <= at:
            yield from self._finalize_window()
        self._frag.end_time = at
        self._frag = None

    def _consider(self, fr: FrameBuffer) -> None:
        ws = self._win_start()
        if not ws <= fr.timestamp < ws + 1:
            # sub-second tail frames keep arriving after the last full
            # window; they can never pair with anything
            return
        dist = abs(fr.timestamp - (ws + HALF_SECOND))
        if self._best_dist is None or dist < self._best_dist:
            self._best = fr
            self._best_dist = dist

    def _finalize_window(self) -> Iterator[ExtractedPair]:
        assert self._frag is not None
        cfg = self._cfg
        frag = self._frag
        counters = frag.counters
        counters.windows += 1
        self.totals.windows += 1
        win = self._win
        best = self._best
        self._win += 1
        self._best = None
        self._best_dist = None

        if best is None:
            counters.noframe_dropped += 1
            self.totals.noframe_dropped += 1
            return

        if self._audio_dead:
            counters.audioshort_dropped += 1
            self.totals.audioshort_dropped += 1
            return
        start = self._sample0 + win * CLIP_SAMPLES
        samples = self._audio.read(start, start + CLIP_SAMPLES)
        if samples is None:
            self._audio_dead = True
            counters.audioshort_dropped += 1
            self.totals.audioshort_dropped += 1
            return
        clip = AudioClip(samples, start_time=frag.start_time + win)

        if is_silent(clip, cfg.silence_amp, cfg.silence_dur):
            counters.silence_dropped += 1
            self.totals.silence_dropped += 1
            return
        if is_dark(best, cfg.dark_mean):
            counters.dark_dropped += 1
            self.totals.dark_dropped += 1
            return
        position = self._survivors
        self._survivors += 1
        if position % cfg.keep_every != 0:
            counters.subsample_dropped += 1
            self.totals.subsample_dropped += 1
            return
        counters.emitted += 1
        self.totals.emitted += 1
        yield ExtractedPair(
            fragment_index=frag.fragment_index,
            window_index=win,
            image=center_crop_resize(best, cfg.out_size),
            audio=clip,
        )
