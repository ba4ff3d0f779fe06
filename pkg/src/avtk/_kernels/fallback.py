"""Pure numpy implementations of the hot kernels.

Every function here must produce bit-identical results to the compiled
twins in _core.pyx; tests/test_kernels.py enforces that with randomized
cross-checks. Integer accumulations use exact 64-bit sums, float work
is float64 with the same operand order as the C code.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _as_u8(buf) -> np.ndarray:
    arr = np.frombuffer(buf, dtype=np.uint8) if isinstance(buf, (bytes, bytearray, memoryview)) else np.asarray(buf, dtype=np.uint8)
    return arr.reshape(-1)


def mean_pixel(pixels) -> float:
    """Mean of all channel bytes. Exact integer sum, one float divide."""
    arr = _as_u8(pixels)
    if arr.size == 0:
        raise ValueError("empty pixel buffer")
    total = int(arr.sum(dtype=np.uint64))
    return total / arr.size


def frame_msd(a, b) -> float:
    """Mean squared difference over all channel bytes of two equal-size buffers."""
    x = _as_u8(a)
    y = _as_u8(b)
    if x.size != y.size:
        raise ValueError(f"buffer sizes differ: {x.size} vs {y.size}")
    if x.size == 0:
        raise ValueError("empty pixel buffer")
    d = x.astype(np.int32) - y.astype(np.int32)
    total = int((d * d).sum(dtype=np.uint64))
    return total / x.size


def bright_bounds(pixels, width: int, height: int, threshold: int):
    """Bounding box of pixels with any channel strictly above threshold.

    Returns (x0, y0, x1, y1) inclusive, or None when no pixel qualifies.
    """
    arr = _as_u8(pixels).reshape(height, width, 3)
    mask = (arr > threshold).any(axis=2)
    rows = mask.any(axis=1)
    if not rows.any():
        return None
    cols = mask.any(axis=0)
    ys = np.flatnonzero(rows)
    xs = np.flatnonzero(cols)
    return int(xs[0]), int(ys[0]), int(xs[-1]), int(ys[-1])


def longest_quiet_run(samples: np.ndarray, amp: int) -> int:
    """Length of the longest run of samples with |s| <= amp."""
    s = np.asarray(samples, dtype=np.int16)
    quiet = np.abs(s.astype(np.int32)) <= amp
    if s.size == 0:
        return 0
    edges = np.diff(np.concatenate(([False], quiet, [False])).astype(np.int8))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    if starts.size == 0:
        return 0
    return int((ends - starts).max())


def resize_bilinear(pixels, src_w: int, src_h: int, dst_w: int, dst_h: int) -> bytes:
    """Bilinear RGB24 resize with half-pixel-centered sampling.

    Source coordinate for destination index d is (d + 0.5) * scale - 0.5,
    clamped into the source; identity when scales are 1. Output channel
    values are floor(v + 0.5) clamped to [0, 255].
    """
    if src_w <= 0 or src_h <= 0 or dst_w <= 0 or dst_h <= 0:
        raise ValueError("dimensions must be positive")
    arr = _as_u8(pixels).reshape(src_h, src_w, 3)

    sx = (np.arange(dst_w, dtype=np.float64) + 0.5) * (src_w / dst_w) - 0.5
    sy = (np.arange(dst_h, dtype=np.float64) + 0.5) * (src_h / dst_h) - 0.5
    np.clip(sx, 0.0, src_w - 1, out=sx)
    np.clip(sy, 0.0, src_h - 1, out=sy)

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)

    p00 = arr[np.ix_(y0, x0)].astype(np.float64)
    p01 = arr[np.ix_(y0, x1)].astype(np.float64)
    p10 = arr[np.ix_(y1, x0)].astype(np.float64)
    p11 = arr[np.ix_(y1, x1)].astype(np.float64)

    fxc = fx[np.newaxis, :, np.newaxis]
    fyc = fy[:, np.newaxis, np.newaxis]
    top = (1.0 - fxc) * p00 + fxc * p01
    bot = (1.0 - fxc) * p10 + fxc * p11
    val = (1.0 - fyc) * top + fyc * bot

    out = np.floor(val + 0.5)
    np.clip(out, 0.0, 255.0, out=out)
    return out.astype(np.uint8).tobytes()


def amp_hist_update(counts: np.ndarray, samples: np.ndarray, shift: int) -> None:
    """Add one clip to an amplitude/time count matrix in place.

    counts is (amp_bins, clip_len) int64, row = (s + 32768) >> shift.
    """
    s = np.asarray(samples, dtype=np.int16)
    if counts.shape[1] != s.size:
        raise ValueError("clip length does not match matrix width")
    rows = (s.astype(np.int32) + 32768) >> shift
    counts[rows, np.arange(s.size)] += 1
