"""Core media value types shared by every pipeline stage.

Frames are interchange-format RGB24: one bytes object, row-major,
top-left origin, three bytes per pixel. Audio is mono 16 kHz signed
16-bit PCM held as numpy arrays. Timestamps are fractions.Fraction
seconds so frame and window arithmetic stays exact (30000/1001 rates
never accumulate drift).
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from fractions import Fraction

import numpy as np

from . import _kernels

SAMPLE_RATE = 16000
#: samples in one observation window (exactly one second)
CLIP_SAMPLES = 16000


@dataclass(frozen=True)
class FrameBuffer:
    """A single decoded video frame.

    pixels holds width*height*3 bytes of RGB24. The buffer is immutable;
    as_array returns a read-only numpy view, not a copy.
    """

    width: int
    height: int
    pixels: bytes
    timestamp: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"bad frame dimensions {self.width}x{self.height}")
        expected = self.width * self.height * 3
        if len(self.pixels) != expected:
            raise ValueError(
                f"pixel buffer holds {len(self.pixels)} bytes, "
                f"{self.width}x{self.height} RGB24 needs {expected}"
            )
        if self.timestamp < 0:
            raise ValueError("negative timestamp")

    def as_array(self) -> np.ndarray:
        """Read-only (height, width, 3) uint8 view of the pixel data."""
        arr = np.frombuffer(self.pixels, dtype=np.uint8)
        return arr.reshape(self.height, self.width, 3)

    @classmethod
    def from_array(cls, arr: np.ndarray, timestamp: Fraction = Fraction(0)) -> "FrameBuffer":
        """Build a frame from a (height, width, 3) uint8 array."""
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
        h, w = arr.shape[:2]
        return cls(width=w, height=h, pixels=np.ascontiguousarray(arr).tobytes(),
                   timestamp=timestamp)


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Exactly one second of mono 16 kHz 16-bit audio."""

    samples: np.ndarray
    start_time: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.int16)
        if arr.ndim != 1 or arr.shape[0] != CLIP_SAMPLES:
            raise ValueError(f"clip must hold exactly {CLIP_SAMPLES} samples, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr)
        # freeze a view so the caller's own array keeps its flags
        frozen = arr.view()
        frozen.setflags(write=False)
        object.__setattr__(self, "samples", frozen)
        if self.start_time < 0:
            raise ValueError("negative start time")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AudioClip):
            return NotImplemented
        return self.start_time == other.start_time and np.array_equal(
            self.samples, other.samples
        )

    def __hash__(self) -> int:
        return hash((self.start_time, self.samples.tobytes()))


@dataclass(frozen=True)
class FilterConfig:
    """Knobs for the filtering and normalization stages.

    Defaults are the production values; every field has a matching CLI
    flag. border_threshold and silence_amp are raw 8-bit / 16-bit
    amplitudes, durations are seconds.
    """

    border_threshold: int = 15
    cut_threshold: float = 90.0
    silence_amp: int = 100
    silence_dur: float = 0.5
    dark_mean: float = 10.0
    keep_every: int = 3
    out_size: int = 512
    min_crop_dim: int = 64

    def __post_init__(self) -> None:
        if not 0 <= self.border_threshold <= 255:
            raise ValueError("border_threshold must be an 8-bit level")
        if self.cut_threshold < 0:
            raise ValueError("cut_threshold must be non-negative")
        if not 0 <= self.silence_amp <= 32767:
            raise ValueError("silence_amp must be a 16-bit magnitude")
        if self.silence_dur <= 0:
            raise ValueError("silence_dur must be positive")
        if self.dark_mean < 0:
            raise ValueError("dark_mean must be non-negative")
        if self.keep_every < 1:
            raise ValueError("keep_every must be at least 1")
        if self.out_size < 1:
            raise ValueError("out_size must be positive")
        if self.min_crop_dim < 1:
            raise ValueError("min_crop_dim must be positive")

    def replace(self, **kw) -> "FilterConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(kw)
        return FilterConfig(**vals)


def mean_pixel(frame: FrameBuffer) -> float:
    """Mean over every channel byte of the frame, in [0, 255]."""
    return _kernels.mean_pixel(frame.pixels)
