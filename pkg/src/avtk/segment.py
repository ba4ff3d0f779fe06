"""Hard cut detection.

Consecutive frames are compared by mean squared difference over all
channel bytes; a new fragment starts wherever the MSD is strictly above
the cut threshold. An optional lookahead widens the comparison so slow
fades can still trip the threshold: with lookahead N, frame k-1 is
compared against frames k..k+N, and when the maximum of those MSDs is
over the threshold the new fragment starts at the frame achieving it
(first such frame on ties). A sharp cut therefore still yields exactly
one boundary, placed at the cut, regardless of lookahead. Lookahead 0
is the plain consecutive-frame rule.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from . import _kernels
from .errors import DimensionMismatch
from .media import FrameBuffer


@dataclass(frozen=True)
class SegmentBoundary:
    """One fragment of a video: frame index range and time span.

    end_frame/end_time are exclusive; end_time of the last fragment is
    the end of the video.
    """

    fragment_index: int
    start_frame: int
    end_frame: int
    start_time: Fraction
    end_time: Fraction


def frame_msd(a: FrameBuffer, b: FrameBuffer) -> float:
    """Mean squared difference between two frames, over every channel byte.

    Range [0, 65025]; 0 means identical. Frames must share dimensions.
    """
    if a.width != b.width or a.height != b.height:
        raise DimensionMismatch(
            f"cannot compare {a.width}x{a.height} against {b.width}x{b.height}"
        )
    return _kernels.frame_msd(a.pixels, b.pixels)


def iter_fragments(frames: Iterable[FrameBuffer], cut_threshold: float = 90.0,
                   lookahead: int = 0) -> Iterator[tuple[int, FrameBuffer]]:
    """Stream frames annotated with their fragment index.

    Yields (fragment_index, frame) in input order. With lookahead > 0
    up to lookahead+1 frames are buffered; otherwise only the previous
    frame is kept.
    """
    if lookahead < 0:
        raise ValueError("lookahead must be non-negative")
    it = iter(frames)
    try:
        prev = next(it)
    except StopIteration:
        return
    fragment = 0
    yield fragment, prev

    if lookahead == 0:
        for fr in it:
            if frame_msd(prev, fr) > cut_threshold:
                fragment += 1
            yield fragment, fr
            prev = fr
        return

    # pending holds frames not yet assigned to a fragment; the cut test
    # needs up to lookahead frames past the first pending one.
    pending: deque[FrameBuffer] = deque()
    exhausted = False
    while True:
        while not exhausted and len(pending) < lookahead + 1:
            try:
                pending.append(next(it))
            except StopIteration:
                exhausted = True
        if not pending:
            return
        scores = [frame_msd(prev, pending[i]) for i in range(len(pending))]
        peak = max(scores)
        if peak > cut_threshold:
            # frames before the peak close out the current fragment;
            # the peak frame opens the next one
            j = scores.index(peak)
            for _ in range(j):
                fr = pending.popleft()
                yield fragment, fr
            fragment += 1
        fr = pending.popleft()
        yield fragment, fr
        prev = fr


def split_segments(frames: Sequence[FrameBuffer], cut_threshold: float = 90.0,
                   lookahead: int = 0,
                   end_time: Fraction | None = None) -> list[SegmentBoundary]:
    """Partition a frame sequence into fragments at hard cuts.

    end_time bounds the last fragment; when omitted it is inferred as
    the last frame's timestamp plus the first inter-frame gap (zero for
    a single frame), which equals frame_count/fps for uniform rates.
    """
    frames = list(frames)
    if not frames:
        return []
    if end_time is None:
        if len(frames) >= 2:
            end_time = frames[-1].timestamp + (frames[1].timestamp - frames[0].timestamp)
        else:
            end_time = frames[0].timestamp

    boundaries: list[SegmentBoundary] = []
    start = 0
    current = 0
    for idx, (frag, _fr) in enumerate(iter_fragments(frames, cut_threshold, lookahead)):
        if frag != current:
            boundaries.append(SegmentBoundary(
                fragment_index=current,
                start_frame=start,
                end_frame=idx,
                start_time=frames[start].timestamp,
                end_time=frames[idx].timestamp,
            ))
            start = idx
            current = frag
    boundaries.append(SegmentBoundary(
        fragment_index=current,
        start_frame=start,
        end_frame=len(frames),
        start_time=frames[start].timestamp,
        end_time=end_time,
    ))
    return boundaries
