"""Reference decoder for a minimal raw A/V container (.avr).

The toolkit talks to decoders through command templates (see
avtk.ingest); production setups point those at ffmpeg. This module
provides a dependency-free stand-in: a trivial container holding
uncompressed RGB24 frames plus mono 16 kHz s16le audio, a writer API
for building fixtures, and the avtk-rawdec CLI implementing the probe
and decode halves of the decoder contract.

Layout, all little-endian, after the 8 byte magic:
    u32 width, height, fps_num, fps_den, frame_count, sample_rate
    u64 sample_count
    frame_count * width*height*3 bytes RGB24
    sample_count * 2 bytes s16le
width == 0 means the file carries no video stream; sample_rate == 0
means no audio stream. Decode interleaves writes in presentation
order, frame i followed by the samples up to time (i+1)/fps, so both
fifo readers make progress together.
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from fractions import Fraction
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

MAGIC = b"AVRAW01\n"
_HEADER = struct.Struct("<IIIIIIQ")

SAMPLE_RATE = 16000


def write_raw(path, frames: Sequence, fps, samples=None, sample_rate: int = SAMPLE_RATE) -> None:
    """Write an .avr container.

    frames: sequence of (h, w, 3) uint8 arrays (or FrameBuffers), all
    the same size; may be empty to model a file with no video stream.
    samples: int16 array, or None for a file with no audio stream.
    fps: Fraction, int, or (num, den) tuple.
    """
    if isinstance(fps, tuple):
        fps = Fraction(*fps)
    fps = Fraction(fps)
    arrs = []
    for fr in frames:
        arr = fr.as_array() if hasattr(fr, "as_array") else np.asarray(fr, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
            raise ValueError("frames must be (h, w, 3) uint8")
        arrs.append(np.ascontiguousarray(arr))
    if arrs:
        h, w = arrs[0].shape[:2]
        for arr in arrs:
            if arr.shape[:2] != (h, w):
                raise ValueError("all frames must share dimensions")
    else:
        h = w = 0
    if samples is None:
        sample_rate = 0
        audio = np.empty(0, dtype=np.int16)
    else:
        audio = np.ascontiguousarray(np.asarray(samples, dtype=np.int16))
        if audio.ndim != 1:
            raise ValueError("samples must be a 1-D int16 array")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(w, h, fps.numerator, fps.denominator,
                              len(arrs), sample_rate, audio.size))
        for arr in arrs:
            fh.write(arr.tobytes())
        fh.write(audio.tobytes())


class RawContainer:
    """Parsed .avr header with lazy access to the payload."""

    def __init__(self, path):
        self.path = Path(path)
        with open(self.path, "rb") as fh:
            magic = fh.read(len(MAGIC))
            if magic != MAGIC:
                raise ValueError(f"{self.path}: not a raw A/V container")
            raw = fh.read(_HEADER.size)
            if len(raw) != _HEADER.size:
                raise ValueError(f"{self.path}: truncated header")
            (self.width, self.height, fps_num, fps_den,
             self.frame_count, self.sample_rate, self.sample_count) = _HEADER.unpack(raw)
        if fps_den == 0:
            fps_den = 1
        self.fps = Fraction(fps_num, fps_den) if fps_num else Fraction(0)
        self._data_start = len(MAGIC) + _HEADER.size
        self._frame_bytes = self.width * self.height * 3
        expected = self._data_start + self.frame_count * self._frame_bytes + 2 * self.sample_count
        actual = self.path.stat().st_size
        if actual < expected:
            raise ValueError(f"{self.path}: payload truncated ({actual} < {expected} bytes)")

    @property
    def has_video(self) -> bool:
        return self.width > 0

    @property
    def has_audio(self) -> bool:
        return self.sample_rate > 0

    @property
    def duration(self) -> float:
        if self.has_video and self.fps:
            return float(self.frame_count / self.fps)
        if self.has_audio:
            return self.sample_count / self.sample_rate
        return 0.0

    def probe_json(self) -> dict:
        """ffprobe-shaped stream/format description."""
        streams = []
        if self.has_video:
            streams.append({
                "index": len(streams),
                "codec_type": "video",
                "codec_name": "rawvideo",
                "pix_fmt": "rgb24",
                "width": self.width,
                "height": self.height,
                "r_frame_rate": f"{self.fps.numerator}/{self.fps.denominator}",
                "avg_frame_rate": f"{self.fps.numerator}/{self.fps.denominator}",
                "nb_frames": str(self.frame_count),
            })
        if self.has_audio:
            streams.append({
                "index": len(streams),
                "codec_type": "audio",
                "codec_name": "pcm_s16le",
                "sample_rate": str(self.sample_rate),
                "channels": 1,
                "nb_samples": str(self.sample_count),
            })
        return {
            "streams": streams,
            "format": {
                "filename": str(self.path),
                "format_name": "avraw",
                "duration": f"{self.duration:.6f}",
            },
        }

    def decode(self, video_out: BinaryIO, audio_out: BinaryIO,
               fail_after_frames: int | None = None) -> None:
        """Stream frames and audio in presentation order.

        fail_after_frames aborts mid-stream with a nonzero exit, a
        testing aid for exercising crash handling downstream.
        """
        with open(self.path, "rb") as fh:
            fh.seek(self._data_start)
            audio_start = self._data_start + self.frame_count * self._frame_bytes
            written_samples = 0

            def push_audio(until: int) -> None:
                nonlocal written_samples
                until = min(until, self.sample_count)
                if until <= written_samples:
                    return
                pos = fh.tell()
                fh.seek(audio_start + 2 * written_samples)
                audio_out.write(fh.read(2 * (until - written_samples)))
                fh.seek(pos)
                written_samples = until

            for i in range(self.frame_count):
                if fail_after_frames is not None and i >= fail_after_frames:
                    raise BrokenPipeError("injected decoder failure")
                video_out.write(fh.read(self._frame_bytes))
                if self.has_audio and self.fps:
                    # samples with t < (i+1)/fps, exact integer arithmetic
                    until = (self.sample_rate * (i + 1) * self.fps.denominator) // self.fps.numerator
                    push_audio(until)
            if self.has_audio:
                push_audio(self.sample_count)


def iter_frames(path) -> Iterable[np.ndarray]:
    """Yield (h, w, 3) uint8 arrays straight from the container."""
    rc = RawContainer(path)
    with open(rc.path, "rb") as fh:
        fh.seek(rc._data_start)
        for _ in range(rc.frame_count):
            buf = fh.read(rc._frame_bytes)
            yield np.frombuffer(buf, dtype=np.uint8).reshape(rc.height, rc.width, 3)


def read_audio(path) -> np.ndarray:
    rc = RawContainer(path)
    with open(rc.path, "rb") as fh:
        fh.seek(rc._data_start + rc.frame_count * rc._frame_bytes)
        return np.frombuffer(fh.read(2 * rc.sample_count), dtype="<i2")


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="avtk-rawdec",
        description="Probe or decode raw A/V containers (.avr).",
    )
    sub = parser.add_subparsers(dest="mode", required=True)

    p_probe = sub.add_parser("probe", help="print stream metadata as JSON")
    p_probe.add_argument("input")

    p_dec = sub.add_parser("decode", help="write RGB24 frames and s16le audio")
    p_dec.add_argument("input")
    p_dec.add_argument("--video-out", required=True)
    p_dec.add_argument("--audio-out", required=True)
    p_dec.add_argument("--fail-after-frames", type=int, default=None,
                       help="testing aid: abort after N frames")

    args = parser.parse_args(argv)
    try:
        rc = RawContainer(args.input)
    except (OSError, ValueError) as exc:
        print(f"avtk-rawdec: {exc}", file=sys.stderr)
        return 1

    if args.mode == "probe":
        json.dump(rc.probe_json(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0

    try:
        # open order matters with fifos: the stream reader opens both
        # ends from separate threads, so either order works there, but
        # we must not hold one open() while a lone reader waits on the
        # other; opening video first matches the reader's layout.
        with open(args.video_out, "wb") as vout, open(args.audio_out, "wb") as aout:
            rc.decode(vout, aout, fail_after_frames=args.fail_after_frames)
    except BrokenPipeError:
        return 3
    except OSError as exc:
        print(f"avtk-rawdec: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
