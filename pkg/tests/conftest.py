"""Shared fixture builders.

Everything here is deterministic: fixed seeds, integer-exact signals,
raw .avr containers written through avtk.rawvideo so tests never need
a system decoder.
"""

from __future__ import annotations

import textwrap
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from avtk.rawvideo import write_raw

SAMPLE_RATE = 16000


# ---------------------------------------------------------------------------
# signal builders

def loud_audio(n_samples: int, amp: int = 2000) -> np.ndarray:
    """Alternating +/-amp samples: never quiet anywhere, fully integer."""
    out = np.full(n_samples, amp, np.int16)
    out[1::2] = -amp
    return out


def sine_audio(n_samples: int, freq: float = 440.0, amp: float = 3000.0) -> np.ndarray:
    t = np.arange(n_samples, dtype=np.float64)
    return np.round(amp * np.sin(2 * np.pi * freq * t / SAMPLE_RATE)).astype(np.int16)


def quiet_gap_audio(n_samples: int, gap_start: int, gap_len: int,
                    amp: int = 2000) -> np.ndarray:
    """Loud everywhere except an exact run of gap_len zero samples."""
    out = loud_audio(n_samples, amp)
    out[gap_start:gap_start + gap_len] = 0
    return out


# ---------------------------------------------------------------------------
# frame builders

def flat_frame(width: int, height: int, value: int) -> np.ndarray:
    return np.full((height, width, 3), value, np.uint8)


def textured_frames(n: int, width: int, height: int, base: int = 100,
                    seed: int = 0, wiggle: int = 3) -> list[np.ndarray]:
    """Frames whose consecutive mean squared difference stays tiny.

    One static random texture plus a +/-wiggle per-frame offset keeps the
    difference per byte at most 2*wiggle, so MSD <= (2*wiggle)^2 and no
    hard-cut detector at the default threshold can fire.
    """
    rng = np.random.default_rng(seed)
    base_img = rng.integers(base - 20, base + 20, size=(height, width, 3),
                            endpoint=True, dtype=np.int16)
    frames = []
    for k in range(n):
        off = wiggle if k % 2 else -wiggle
        frames.append(np.clip(base_img + off, 16, 255).astype(np.uint8))
    return frames


def bordered_frame(width: int, height: int, borders: tuple[int, int, int, int],
                   seed: int = 0, dark_max: int = 15) -> np.ndarray:
    """Random bright interior surrounded by a dark planted border.

    borders is (left, top, right, bottom) in pixels. Border pixels get
    random values in [0, dark_max]; the interior random values in
    [dark_max + 1, 255] so every interior pixel is bright.
    """
    left, top, right, bottom = borders
    rng = np.random.default_rng(seed)
    f = rng.integers(0, dark_max, size=(height, width, 3),
                     endpoint=True, dtype=np.uint8)
    iw, ih = width - left - right, height - top - bottom
    inner = rng.integers(dark_max + 1, 255, size=(ih, iw, 3),
                         endpoint=True, dtype=np.uint8)
    f[top:height - bottom, left:width - right] = inner
    return f


def mel_center_frequencies(n_bins: int = 32, f_max: float = 8000.0) -> list[int]:
    """Integer frequencies at the center of each mel bin.

    Integer Hz keeps each tone periodic over a one-second clip, so the
    Hann-windowed spectrum stays within +/-1 Hz of the tone and each
    tone's power lands in exactly one mel bin.
    """
    import math

    def mel(f):
        return 2595.0 * math.log10(1.0 + f / 700.0)

    top = mel(f_max)
    freqs = []
    for b in range(n_bins):
        center = (b + 0.5) * top / n_bins
        f = round(700.0 * (10.0 ** (center / 2595.0) - 1.0))
        freqs.append(int(f))
    return freqs


def equal_bin_power_audio(n_bins: int = 32, amp: float = 500.0) -> np.ndarray:
    """One tone per mel bin, all the same amplitude -> equal bin powers."""
    t = np.arange(SAMPLE_RATE, dtype=np.float64)
    total = np.zeros(SAMPLE_RATE)
    for f in mel_center_frequencies(n_bins):
        total += amp * np.sin(2 * np.pi * f * t / SAMPLE_RATE)
    assert np.abs(total).max() < 32767
    return np.round(total).astype(np.int16)


# ---------------------------------------------------------------------------
# container builders

def make_avr(path: Path, frames, audio, fps=30) -> Path:
    write_raw(path, frames, Fraction(fps), np.asarray(audio, np.int16))
    return path


def single_scene_avr(path: Path, duration: float = 10.7, fps: int = 30,
                     width: int = 320, height: int = 240,
                     audio: np.ndarray | None = None) -> Path:
    """One fragment, no border, never silent, never dark."""
    n_frames = round(duration * fps)
    frames = textured_frames(n_frames, width, height)
    if audio is None:
        audio = loud_audio(int(duration * SAMPLE_RATE))
    return make_avr(path, frames, audio, fps)


@pytest.fixture
def scene_10_7s(tmp_path: Path) -> Path:
    return single_scene_avr(tmp_path / "scene.avr")


# ---------------------------------------------------------------------------
# caption plugin scripts

PLUGIN_SOURCES = {
    # deterministic well-behaved plugin: caption length respects the
    # word bounds passed through the environment
    "good": """
        import os, sys, hashlib
        words = int(os.environ.get("AVT_MIN_TOKENS", "10"))
        for line in sys.stdin:
            if not line.startswith("CAPTION "):
                continue
            path = line[8:].rstrip("\\n")
            tag = hashlib.sha256(open(path, "rb").read()).hexdigest()[:6]
            body = " ".join(f"word{i}" for i in range(words - 1))
            print(f"OK {tag} {body}", flush=True)
        """,
    # refuses every request
    "erring": """
        import sys
        for line in sys.stdin:
            print("ERR no caption for you", flush=True)
        """,
    # protocol violation: two lines per request
    "twoline": """
        import sys
        for line in sys.stdin:
            print("OK fine caption here", flush=True)
            print("and an extra line", flush=True)
        """,
    # answers the first request then dies
    "crashing": """
        import sys
        sys.stdin.readline()
        sys.exit(9)
        """,
    # never answers
    "hanging": """
        import sys, time
        sys.stdin.readline()
        time.sleep(600)
        """,
    # garbage instead of OK/ERR
    "malformed": """
        import sys
        for line in sys.stdin:
            print("WAT is this", flush=True)
        """,
    # empty caption after OK
    "empty": """
        import sys
        for line in sys.stdin:
            print("OK ", flush=True)
        """,
}


@pytest.fixture
def plugin_factory(tmp_path: Path):
    """Returns make(name) -> command line string for a test plugin."""

    def make(name: str) -> str:
        script = tmp_path / f"plugin_{name}.py"
        script.write_text(textwrap.dedent(PLUGIN_SOURCES[name]).strip() + "\n",
                          encoding="utf-8")
        return f"python3 {script}"

    return make
