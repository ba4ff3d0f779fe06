"""Bundled raw A/V container: round trips, probe output, decode
streaming, and failure injection."""

from __future__ import annotations

import json
import os
import subprocess
import threading
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from avtk.rawvideo import RawContainer, iter_frames, read_audio, write_raw
from conftest import flat_frame, loud_audio, make_avr


def small_avr(tmp_path, n_frames=6, fps=3, w=8, h=6, n_samples=32000):
    frames = [flat_frame(w, h, 10 * k) for k in range(n_frames)]
    return make_avr(tmp_path / "clip.avr", frames, loud_audio(n_samples), fps)


def test_round_trip_frames_and_audio(tmp_path):
    rng = np.random.default_rng(0)
    frames = [rng.integers(0, 256, (6, 8, 3), dtype=np.uint8) for _ in range(4)]
    audio = rng.integers(-2**15, 2**15, 7000).astype(np.int16)
    path = make_avr(tmp_path / "rt.avr", frames, audio, fps=2)

    c = RawContainer(path)
    assert c.width == 8 and c.height == 6
    assert c.fps == Fraction(2)
    assert c.frame_count == 4
    assert c.sample_count == 7000

    got = list(iter_frames(path))
    assert len(got) == 4
    for orig, fr in zip(frames, got):
        assert (fr == orig).all()
    assert (read_audio(path) == audio).all()


def test_duration_is_frame_count_over_fps(tmp_path):
    path = small_avr(tmp_path, n_frames=3, fps=3, n_samples=16000)
    assert RawContainer(path).duration == Fraction(1)


def test_fractional_fps(tmp_path):
    frames = [flat_frame(4, 4, 0)] * 2
    path = make_avr(tmp_path / "ntsc.avr", frames, loud_audio(100),
                    fps=Fraction(30000, 1001))
    c = RawContainer(path)
    assert c.fps == Fraction(30000, 1001)
    probe = c.probe_json()
    video = [s for s in probe["streams"] if s["codec_type"] == "video"][0]
    assert video["r_frame_rate"] == "30000/1001"


def test_probe_shape(tmp_path):
    path = small_avr(tmp_path, n_frames=6, fps=3, n_samples=32000)
    probe = RawContainer(path).probe_json()
    kinds = sorted(s["codec_type"] for s in probe["streams"])
    assert kinds == ["audio", "video"]
    video = [s for s in probe["streams"] if s["codec_type"] == "video"][0]
    audio = [s for s in probe["streams"] if s["codec_type"] == "audio"][0]
    assert video["width"] == 8 and video["height"] == 6
    assert video["nb_frames"] == "6"
    assert audio["sample_rate"] == "16000"
    assert probe["format"]["duration"] == "2.000000"


def test_video_only_and_audio_only(tmp_path):
    vpath = tmp_path / "v.avr"
    write_raw(vpath, [flat_frame(4, 4, 1)], Fraction(1), np.zeros(0, np.int16),
              sample_rate=0)
    c = RawContainer(vpath)
    assert c.has_video and not c.has_audio

    apath = tmp_path / "a.avr"
    write_raw(apath, [], Fraction(1), loud_audio(100))
    c = RawContainer(apath)
    assert not c.has_video and c.has_audio


def test_bad_magic_rejected(tmp_path):
    p = tmp_path / "bad.avr"
    p.write_bytes(b"NOTAVRAW" + b"\x00" * 60)
    with pytest.raises(ValueError):
        RawContainer(p)


def test_truncated_file_rejected(tmp_path):
    path = small_avr(tmp_path)
    data = path.read_bytes()
    short = tmp_path / "short.avr"
    short.write_bytes(data[:len(data) - 100])
    with pytest.raises(ValueError):
        RawContainer(short)


# ---------------------------------------------------------------------------
# CLI

def run_cli(*args):
    return subprocess.run(["avtk-rawdec", *map(str, args)],
                          capture_output=True, text=True, timeout=60)


def test_cli_probe_prints_json(tmp_path):
    path = small_avr(tmp_path)
    res = run_cli("probe", path)
    assert res.returncode == 0
    probe = json.loads(res.stdout)
    assert {s["codec_type"] for s in probe["streams"]} == {"video", "audio"}


def test_cli_probe_missing_file(tmp_path):
    res = run_cli("probe", tmp_path / "nope.avr")
    assert res.returncode == 1
    assert res.stderr


def decode_via_fifos(path, tmp_path, *extra):
    """Run the decode subcommand against two fifos, like the pipeline does."""
    vfifo = tmp_path / "v.fifo"
    afifo = tmp_path / "a.fifo"
    os.mkfifo(vfifo)
    os.mkfifo(afifo)
    proc = subprocess.Popen(
        ["avtk-rawdec", "decode", str(path),
         "--video-out", str(vfifo), "--audio-out", str(afifo), *extra],
        stdout=subprocess.DEVNULL, stderr=subprocess.PIPE)
    chunks = {}

    def reader(p, key):
        with open(p, "rb") as fh:
            chunks[key] = fh.read()

    # daemon threads: a decoder that never opens its fifo must not
    # wedge the test process at interpreter exit
    tv = threading.Thread(target=reader, args=(vfifo, "v"), daemon=True)
    ta = threading.Thread(target=reader, args=(afifo, "a"), daemon=True)
    tv.start()
    ta.start()
    tv.join(timeout=60)
    ta.join(timeout=60)
    assert not tv.is_alive() and not ta.is_alive(), "fifo readers stuck"
    proc.wait(timeout=60)
    return proc.returncode, chunks


def test_cli_decode_streams_everything(tmp_path):
    rng = np.random.default_rng(1)
    frames = [rng.integers(0, 256, (4, 6, 3), dtype=np.uint8) for _ in range(5)]
    audio = rng.integers(-1000, 1000, 40000).astype(np.int16)
    path = make_avr(tmp_path / "d.avr", frames, audio, fps=5)

    rc, chunks = decode_via_fifos(path, tmp_path)
    assert rc == 0
    assert chunks["v"] == b"".join(f.tobytes() for f in frames)
    assert chunks["a"] == audio.tobytes()


def test_cli_decode_fail_injection(tmp_path):
    path = small_avr(tmp_path, n_frames=6)
    rc, chunks = decode_via_fifos(path, tmp_path, "--fail-after-frames", "2")
    assert rc == 3
    assert len(chunks["v"]) == 2 * 8 * 6 * 3
