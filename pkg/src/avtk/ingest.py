"""Decoder subprocess handling.

Decoding is delegated to an external process described by two command
templates with {input}, {video_out} and {audio_out} placeholders. The
probe template must print ffprobe-shaped JSON on stdout; the stream
template must write headerless RGB24 frames to {video_out} and mono
16 kHz s16le samples to {audio_out}. Both outputs are named pipes
created here and drained by reader threads with bounded queues, so the
decoder needs no toolkit-specific knowledge and the pipeline never
touches compressed bytes.

FFMPEG_SPEC is the production default; RAWDEC_SPEC drives the bundled
.avr reference decoder and is what the test-suite uses.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import shlex
import shutil
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DecoderCrash, UnreadableMedia
from .media import FrameBuffer

log = logging.getLogger(__name__)

_SENTINEL = None
_AUDIO_BLOCK_BYTES = 2 * 16000  # one second per queue item


@dataclass(frozen=True)
class DecoderSpec:
    """Command templates for the probe and stream halves of a decoder."""

    probe_template: str
    stream_template: str

    def probe_command(self, input_path) -> list[str]:
        return _render(self.probe_template, {"{input}": str(input_path)})

    def stream_command(self, input_path, video_out, audio_out) -> list[str]:
        return _render(self.stream_template, {
            "{input}": str(input_path),
            "{video_out}": str(video_out),
            "{audio_out}": str(audio_out),
        })


FFMPEG_SPEC = DecoderSpec(
    probe_template=(
        "ffprobe -v error -print_format json -show_streams -show_format {input}"
    ),
    stream_template=(
        "ffmpeg -v error -nostdin -i {input}"
        " -map 0:v:0 -f rawvideo -pix_fmt rgb24 -y {video_out}"
        " -map 0:a:0 -f s16le -ac 1 -ar 16000 -y {audio_out}"
    ),
)

RAWDEC_SPEC = DecoderSpec(
    probe_template="avtk-rawdec probe {input}",
    stream_template=(
        "avtk-rawdec decode {input} --video-out {video_out} --audio-out {audio_out}"
    ),
)


def _render(template: str, substitutions: dict[str, str]) -> list[str]:
    """Split a template shell-style and fill in the placeholders.

    Substitution happens after splitting, so paths with spaces never
    need quoting and nothing is ever passed through a shell.
    """
    out = []
    for token in shlex.split(template):
        for key, value in substitutions.items():
            if key in token:
                token = token.replace(key, value)
        out.append(token)
    return out


def spec_for(path, decoder: str = "auto") -> DecoderSpec:
    """Pick a decoder spec: explicit name, or by file extension."""
    if decoder == "ffmpeg":
        return FFMPEG_SPEC
    if decoder == "rawdec":
        return RAWDEC_SPEC
    if decoder != "auto":
        raise ValueError(f"unknown decoder {decoder!r}")
    return RAWDEC_SPEC if Path(path).suffix.lower() == ".avr" else FFMPEG_SPEC


@dataclass(frozen=True)
class VideoMeta:
    """Probe result for one input file."""

    path: Path
    video_id: str
    width: int
    height: int
    fps: Fraction
    frame_count: int | None
    duration: float | None
    audio_sample_rate: int

    @property
    def frame_duration(self) -> Fraction:
        return 1 / self.fps


def probe(path, spec: DecoderSpec, timeout: float = 60.0) -> VideoMeta:
    """Run the probe command and validate that both streams exist.

    Raises UnreadableMedia for unreadable files and for files missing
    either the video or the audio stream; such inputs are skipped.
    """
    path = Path(path)
    cmd = spec.probe_command(path)
    try:
        res = subprocess.run(cmd, capture_output=True, timeout=timeout)
    except FileNotFoundError as exc:
        raise UnreadableMedia(f"{path}: probe executable not found: {exc}")
    except subprocess.TimeoutExpired:
        raise UnreadableMedia(f"{path}: probe timed out")
    if res.returncode != 0:
        detail = res.stderr.decode("utf-8", "replace").strip().splitlines()
        raise UnreadableMedia(f"{path}: probe failed: {detail[-1] if detail else 'no detail'}")
    try:
        info = json.loads(res.stdout.decode("utf-8", "replace"))
    except ValueError:
        raise UnreadableMedia(f"{path}: probe produced unparseable output")

    streams = info.get("streams") or []
    video = next((s for s in streams if s.get("codec_type") == "video"), None)
    audio = next((s for s in streams if s.get("codec_type") == "audio"), None)
    if video is None:
        raise UnreadableMedia(f"{path}: no video stream")
    if audio is None:
        raise UnreadableMedia(f"{path}: no audio stream")

    fps = _parse_rate(video.get("r_frame_rate")) or _parse_rate(video.get("avg_frame_rate"))
    if fps is None or fps <= 0:
        raise UnreadableMedia(f"{path}: no usable frame rate")
    width = int(video.get("width") or 0)
    height = int(video.get("height") or 0)
    if width <= 0 or height <= 0:
        raise UnreadableMedia(f"{path}: bad frame dimensions {width}x{height}")

    frame_count = None
    if video.get("nb_frames") is not None:
        try:
            frame_count = int(video["nb_frames"])
        except (TypeError, ValueError):
            frame_count = None
    duration = None
    fmt = info.get("format") or {}
    if fmt.get("duration") is not None:
        try:
            duration = float(fmt["duration"])
        except (TypeError, ValueError):
            duration = None

    return VideoMeta(
        path=path,
        video_id=path.stem,
        width=width,
        height=height,
        fps=fps,
        frame_count=frame_count,
        duration=duration,
        audio_sample_rate=int(audio.get("sample_rate") or 0),
    )


def _parse_rate(text) -> Fraction | None:
    if not text:
        return None
    try:
        rate = Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        return None
    return rate if rate > 0 else None


class _PipeReader(threading.Thread):
    """Drains one fifo into a bounded queue, sentinel-terminated."""

    def __init__(self, fifo_path, item_bytes: int, out: queue.Queue, name: str):
        super().__init__(name=name, daemon=True)
        self.fifo_path = str(fifo_path)
        self.item_bytes = item_bytes
        self.out = out
        self.partial_tail = 0

    def run(self) -> None:
        try:
            # open blocks until the decoder opens its write end
            with open(self.fifo_path, "rb") as fh:
                self._pump(fh)
        finally:
            self.out.put(_SENTINEL)

    def _pump(self, fh) -> None:
        raise NotImplementedError


class _FrameReader(_PipeReader):
    """Frame items must arrive whole; a ragged tail is dropped."""

    def _pump(self, fh) -> None:
        while True:
            chunks = []
            need = self.item_bytes
            while need:
                chunk = fh.read(need)
                if not chunk:
                    got = self.item_bytes - need
                    if got:
                        self.partial_tail = got
                    return
                chunks.append(chunk)
                need -= len(chunk)
            self.out.put(b"".join(chunks))


class _AudioReader(_PipeReader):
    """Audio arrives in arbitrary chunk sizes; items are whatever was
    read, trimmed to whole 16-bit samples."""

    def _pump(self, fh) -> None:
        leftover = b""
        while True:
            chunk = fh.read(self.item_bytes)
            if not chunk:
                if leftover:
                    self.partial_tail = len(leftover)
                return
            chunk = leftover + chunk
            usable = len(chunk) - (len(chunk) % 2)
            leftover = chunk[usable:]
            if usable:
                self.out.put(chunk[:usable])


class DecodedStreams:
    """Live decoder subprocess with frame and audio iterators.

    Use as a context manager. frames() and audio_blocks() may be
    consumed from the same thread; both are backed by reader threads so
    neither starves the other. On exit the decoder must have exited
    cleanly unless close(expect_partial=True) was used (the middle
    frame pass tears down early on purpose).
    """

    def __init__(self, path, spec: DecoderSpec, meta: VideoMeta):
        self.meta = meta
        self._tmpdir = tempfile.mkdtemp(prefix="avtk-dec-")
        video_fifo = os.path.join(self._tmpdir, "video.rgb24")
        audio_fifo = os.path.join(self._tmpdir, "audio.s16le")
        os.mkfifo(video_fifo)
        os.mkfifo(audio_fifo)

        frame_bytes = meta.width * meta.height * 3
        self._frame_q: queue.Queue = queue.Queue(maxsize=8)
        self._audio_q: queue.Queue = queue.Queue(maxsize=64)
        self._vreader = _FrameReader(video_fifo, frame_bytes, self._frame_q, "avtk-video-read")
        self._areader = _AudioReader(audio_fifo, _AUDIO_BLOCK_BYTES, self._audio_q, "avtk-audio-read")

        cmd = spec.stream_command(path, video_fifo, audio_fifo)
        log.debug("starting decoder: %s", shlex.join(cmd))
        try:
            self._proc = subprocess.Popen(
                cmd, stdin=subprocess.DEVNULL,
                stdout=subprocess.DEVNULL, stderr=subprocess.PIPE,
            )
        except FileNotFoundError as exc:
            shutil.rmtree(self._tmpdir, ignore_errors=True)
            raise DecoderCrash(f"{path}: decoder executable not found: {exc}")
        self._stderr_chunks: list[bytes] = []
        self._stderr_thread = threading.Thread(
            target=self._drain_stderr, name="avtk-decoder-stderr", daemon=True)
        self._stderr_thread.start()
        self._vreader.start()
        self._areader.start()
        self._fifos = (video_fifo, audio_fifo)
        self._closed = False
        self._terminated = False
        self._path = path

    def _drain_stderr(self) -> None:
        assert self._proc.stderr is not None
        while True:
            chunk = self._proc.stderr.read(4096)
            if not chunk:
                break
            self._stderr_chunks.append(chunk)
            # keep only the tail for error messages
            while sum(len(c) for c in self._stderr_chunks) > 16384:
                self._stderr_chunks.pop(0)

    def frames(self) -> Iterator[FrameBuffer]:
        """Decoded frames in order; timestamp of frame k is k / fps."""
        meta = self.meta
        k = 0
        for buf in self._drain(self._frame_q, self._vreader):
            yield FrameBuffer(width=meta.width, height=meta.height,
                              pixels=buf, timestamp=Fraction(k) / meta.fps)
            k += 1

    def audio_blocks(self) -> Iterator[np.ndarray]:
        for buf in self._drain(self._audio_q, self._areader):
            yield np.frombuffer(buf, dtype="<i2")

    def _drain(self, q: queue.Queue, reader: _PipeReader) -> Iterator[bytes]:
        while True:
            try:
                item = q.get(timeout=0.5)
            except queue.Empty:
                # decoder may have died before opening its fifo; unstick
                # the reader so it can observe EOF
                if self._proc.poll() is not None and reader.is_alive():
                    self._unblock_fifo(reader.fifo_path)
                continue
            if item is _SENTINEL:
                return
            yield item

    @staticmethod
    def _unblock_fifo(fifo_path: str) -> None:
        try:
            fd = os.open(fifo_path, os.O_WRONLY | os.O_NONBLOCK)
            os.close(fd)
        except OSError:
            pass

    @property
    def partial_tails(self) -> tuple[int, int]:
        """Bytes discarded from ragged stream ends (video, audio)."""
        return (self._vreader.partial_tail, self._areader.partial_tail)

    def close(self, expect_partial: bool = False) -> None:
        """Stop the decoder and reclaim resources.

        With expect_partial the subprocess is torn down without blame;
        otherwise a nonzero decoder exit raises DecoderCrash.
        """
        if self._closed:
            return
        self._closed = True
        if expect_partial and self._proc.poll() is None:
            self._terminated = True
            self._proc.terminate()
        # make sure blocked reader threads can reach EOF
        for fifo in self._fifos:
            self._unblock_fifo(fifo)
        try:
            self._proc.wait(timeout=30)
        except subprocess.TimeoutExpired:
            self._terminated = True
            self._proc.kill()
            self._proc.wait()
        for reader, q in ((self._vreader, self._frame_q), (self._areader, self._audio_q)):
            while reader.is_alive():
                # readers stall when their queue is full during teardown
                try:
                    q.get_nowait()
                except queue.Empty:
                    pass
                reader.join(timeout=0.05)
        self._stderr_thread.join(timeout=5)
        shutil.rmtree(self._tmpdir, ignore_errors=True)
        rc = self._proc.returncode
        if not self._terminated and rc != 0:
            tail = b"".join(self._stderr_chunks).decode("utf-8", "replace").strip()
            tail = tail[-500:] if tail else "no diagnostic output"
            raise DecoderCrash(f"{self._path}: decoder exited with {rc}: {tail}")

    def __enter__(self) -> "DecodedStreams":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        # when the consumer bailed early, the decoder being killed or
        # EPIPEd is expected, not a crash
        self.close(expect_partial=exc_type is not None)


def open_streams(path, spec: DecoderSpec, meta: VideoMeta) -> DecodedStreams:
    return DecodedStreams(path, spec, meta)


def count_frames(path, spec: DecoderSpec, meta: VideoMeta) -> int:
    """Decode the whole video counting frames; used when the probe
    cannot report a frame count."""
    n = 0
    with open_streams(path, spec, meta) as dec:
        for _ in dec.frames():
            n += 1
        for _ in dec.audio_blocks():
            pass
    return n


def read_middle_frame(path, spec: DecoderSpec, meta: VideoMeta) -> FrameBuffer:
    """Decode up to the middle frame (index frame_count // 2) and stop.

    The decoder is torn down as soon as the target frame arrives;
    the tail of the video is never decoded.
    """
    count = meta.frame_count
    if count is None:
        count = count_frames(path, spec, meta)
    if count <= 0:
        raise UnreadableMedia(f"{path}: no frames")
    target = count // 2
    got: FrameBuffer | None = None
    with open_streams(path, spec, meta) as dec:
        for i, frame in enumerate(dec.frames()):
            got = frame
            if i >= target:
                break
        dec.close(expect_partial=True)
    if got is None:
        raise UnreadableMedia(f"{path}: decoder produced no frames")
    return got
