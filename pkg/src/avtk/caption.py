"""Caption generation for extracted pairs.

Two captioner kinds exist. "mock" produces a deterministic synthetic
caption from the image bytes and pair id, enough to exercise every
downstream stage byte-reproducibly. "external" speaks a line protocol
to a plugin subprocess:

    toolkit -> plugin:  CAPTION <absolute image path>\n
    plugin  -> toolkit: OK <caption>\n      on success
                        ERR <message>\n     on failure

One response line per request and nothing else on stdout; stderr is
free for logging. Generation settings are passed in the environment as
AVT_MIN_TOKENS, AVT_MAX_TOKENS and AVT_BEAMS. A failed or invalid
response is retried once; a second failure drops the pair and the drop
is recorded, never silently ignored.
"""

from __future__ import annotations

import hashlib
import logging
import os
import selectors
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from queue import Empty, Queue
from typing import Iterable, Sequence

from .errors import CaptionerFailure
from .extract import PairRecord
from .media import FrameBuffer

log = logging.getLogger(__name__)

REQUEST_PREFIX = "CAPTION "
OK_PREFIX = "OK "
ERR_PREFIX = "ERR "

ENV_MIN_TOKENS = "AVT_MIN_TOKENS"
ENV_MAX_TOKENS = "AVT_MAX_TOKENS"
ENV_BEAMS = "AVT_BEAMS"


@dataclass(frozen=True)
class CaptionerSpec:
    """Which captioner to run and with what settings.

    kind is "mock" or "external"; command is the plugin launch command
    for the external kind (split shell-style, launched once per
    worker). Token bounds and beam count are forwarded to the plugin
    environment; word bounds are enforced on whatever comes back.
    """

    kind: str = "mock"
    command: str = ""
    min_tokens: int = 10
    max_tokens: int = 20
    beams: int = 2
    min_words: int = 1
    max_words: int = 20
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "external"):
            raise ValueError(f"unknown captioner kind {self.kind!r}")
        if self.kind == "external" and not self.command.strip():
            raise ValueError("external captioner needs a command")
        if self.min_tokens < 1 or self.max_tokens < self.min_tokens:
            raise ValueError("bad token bounds")
        if self.beams < 1:
            raise ValueError("beams must be at least 1")
        if self.min_words < 1 or self.max_words < self.min_words:
            raise ValueError("bad word bounds")

    def plugin_env(self) -> dict[str, str]:
        return {
            ENV_MIN_TOKENS: str(self.min_tokens),
            ENV_MAX_TOKENS: str(self.max_tokens),
            ENV_BEAMS: str(self.beams),
        }


@dataclass(frozen=True)
class CaptionedRecord:
    """A pair with its accepted caption."""

    pair: PairRecord
    text: str


def validate_caption(text: str, min_words: int = 1, max_words: int = 20) -> str | None:
    """Check caption constraints; returns a violation reason or None.

    Captions must be non-empty single-line text with a whitespace word
    count inside [min_words, max_words]. Never raises.
    """
    if not isinstance(text, str) or not text.strip():
        return "empty caption"
    if "\n" in text or "\r" in text:
        return "caption spans multiple lines"
    words = len(text.split())
    if words < min_words:
        return f"caption has {words} words, minimum is {min_words}"
    if words > max_words:
        return f"caption has {words} words, maximum is {max_words}"
    return None


def mock_caption(image_bytes: bytes, global_id: int) -> str:
    """Deterministic caption from the stored image bytes and pair id."""
    digest = hashlib.sha256(image_bytes).hexdigest()[:8]
    return f"synthetic caption for pair {global_id} hash {digest}"


class MockCaptioner:
    """In-process captioner with the same call surface as PluginClient."""

    def caption(self, image_path: str | Path) -> str:
        path = Path(image_path)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise CaptionerFailure(f"cannot read {path}: {exc}")
        try:
            global_id = int(path.stem)
        except ValueError:
            raise CaptionerFailure(f"image name {path.name} does not carry a pair id")
        return mock_caption(data, global_id)

    def close(self) -> None:
        pass


class PluginClient:
    """One external captioner subprocess speaking the line protocol.

    The client is strict: exactly one response line per request, no
    stray stdout bytes between requests, a response within the timeout.
    Any violation poisons the client; the caller respawns it.
    """

    def __init__(self, command: str | Sequence[str], spec: CaptionerSpec):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        env = dict(os.environ)
        env.update(spec.plugin_env())
        self._timeout = spec.timeout
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                env=env,
            )
        except (OSError, ValueError) as exc:
            raise CaptionerFailure(f"cannot launch captioner {argv!r}: {exc}")
        self._buf = b""
        self._sel = selectors.DefaultSelector()
        self._sel.register(self._proc.stdout, selectors.EVENT_READ)
        os.set_blocking(self._proc.stdout.fileno(), False)
        self._dead = False

    @property
    def alive(self) -> bool:
        return not self._dead and self._proc.poll() is None

    def caption(self, image_path: str | Path) -> str:
        if not self.alive:
            raise CaptionerFailure("captioner process is not running")
        if self._buf:
            self._die()
            raise CaptionerFailure("captioner wrote output outside a request")
        path = str(Path(image_path).absolute())
        try:
            assert self._proc.stdin is not None
            self._proc.stdin.write((REQUEST_PREFIX + path + "\n").encode("utf-8"))
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            self._die()
            raise CaptionerFailure(f"cannot write to captioner: {exc}")
        line = self._read_line()
        # allow the plugin a beat to flush anything extra, then treat
        # leftover bytes as a protocol violation (two lines per request)
        if not self._buf:
            time.sleep(0.02)
            self._poll_into_buf(0)
        if self._buf:
            self._die()
            raise CaptionerFailure(f"captioner sent more than one response line: {line!r} then {self._buf!r}")
        return self._parse(line)

    def _parse(self, line: str) -> str:
        if line.startswith(OK_PREFIX):
            return line[len(OK_PREFIX):]
        if line.startswith(ERR_PREFIX):
            raise CaptionerFailure(f"captioner error: {line[len(ERR_PREFIX):]}")
        self._die()
        raise CaptionerFailure(f"malformed captioner response: {line!r}")

    def _read_line(self) -> str:
        deadline = time.monotonic() + self._timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._die()
                raise CaptionerFailure(f"captioner response timed out after {self._timeout:.0f}s")
            got = self._poll_into_buf(min(remaining, 0.25))
            if not got and self._proc.poll() is not None and b"\n" not in self._buf:
                self._die()
                raise CaptionerFailure(
                    f"captioner exited with {self._proc.returncode} mid-request")
        raw, self._buf = self._buf.split(b"\n", 1)
        return raw.decode("utf-8", "replace").rstrip("\r")

    def _poll_into_buf(self, timeout: float) -> bool:
        events = self._sel.select(timeout)
        got = False
        for _key, _mask in events:
            chunk = self._proc.stdout.read(65536)
            if chunk:
                self._buf += chunk
                got = True
        return got

    def _die(self) -> None:
        self._dead = True
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._sel.close()
        self._dead = True


def _make_client(spec: CaptionerSpec):
    if spec.kind == "mock":
        return MockCaptioner()
    return PluginClient(spec.command, spec)


def caption_paths(tasks: Iterable[tuple[int, Path]], spec: CaptionerSpec,
                  workers: int = 1) -> tuple[dict[int, str], dict[int, tuple[str, str]]]:
    """Caption a batch of staged images.

    tasks yields (global_id, image_path). Returns (captions, drops),
    both keyed by id; a drop carries (category, detail) where category
    is "captioner_error" or "invalid_caption". Each image gets one
    retry on a fresh client before its pair drops.
    """
    tasks = list(tasks)
    captions: dict[int, str] = {}
    drops: dict[int, tuple[str, str]] = {}
    if not tasks:
        return captions, drops
    if spec.kind == "mock" or workers <= 1:
        client = _make_client(spec)
        try:
            for gid, path in tasks:
                client = _caption_one(client, gid, path, spec, captions, drops,
                                      respawn=lambda: _make_client(spec))
        finally:
            client.close()
        return captions, drops

    q: Queue = Queue()
    for item in tasks:
        q.put(item)
    lock = threading.Lock()

    def worker() -> None:
        client = _make_client(spec)
        try:
            while True:
                try:
                    gid, path = q.get_nowait()
                except Empty:
                    return
                client = _caption_one(client, gid, path, spec, captions, drops,
                                      respawn=lambda: _make_client(spec), lock=lock)
        finally:
            client.close()

    threads = [threading.Thread(target=worker, name=f"avtk-caption-{i}", daemon=True)
               for i in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return captions, drops


def _caption_one(client, gid: int, path: Path, spec: CaptionerSpec,
                 captions: dict[int, str], drops: dict[int, str],
                 respawn, lock: threading.Lock | None = None):
    """Attempt, retry once on a fresh client, then drop."""
    last_drop = ("captioner_error", "unknown failure")
    for attempt in range(2):
        if not getattr(client, "alive", True):
            client.close()
            client = respawn()
        try:
            text = client.caption(path)
        except CaptionerFailure as exc:
            last_drop = ("captioner_error", str(exc))
            log.warning("caption attempt %d for pair %d failed: %s", attempt + 1, gid, exc)
            continue
        reason = validate_caption(text, spec.min_words, spec.max_words)
        if reason is None:
            if lock:
                with lock:
                    captions[gid] = text
            else:
                captions[gid] = text
            return client
        last_drop = ("invalid_caption", reason)
        log.warning("caption attempt %d for pair %d rejected: %s", attempt + 1, gid, reason)
    if lock:
        with lock:
            drops[gid] = last_drop
    else:
        drops[gid] = last_drop
    return client


def caption_pair(pair: PairRecord, spec: CaptionerSpec,
                 image_bytes: bytes | None = None) -> CaptionedRecord:
    """Caption a single in-memory pair.

    For the mock kind the caption hashes the pair's stored image bytes;
    pass them when the caller has the staged file, otherwise the frame
    is JPEG-encoded here with the default quality. Raises
    CaptionerFailure after the retry is exhausted.
    """
    from .pack import encode_image

    if image_bytes is None:
        image_bytes = encode_image(pair.image)
    if spec.kind == "mock":
        text = mock_caption(image_bytes, pair.global_id)
        reason = validate_caption(text, spec.min_words, spec.max_words)
        if reason is not None:
            raise CaptionerFailure(reason)
        return CaptionedRecord(pair=pair, text=text)

    import tempfile

    with tempfile.TemporaryDirectory(prefix="avtk-cap-") as td:
        img = Path(td) / f"{pair.global_id}.jpg"
        img.write_bytes(image_bytes)
        captions, drops = caption_paths([(pair.global_id, img)], spec, workers=1)
    if pair.global_id in captions:
        return CaptionedRecord(pair=pair, text=captions[pair.global_id])
    category, detail = drops[pair.global_id]
    raise CaptionerFailure(f"{category}: {detail}")
