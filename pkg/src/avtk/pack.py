"""Serialization: WAV and image codecs, CSV/zip shards, manifest.

Every output is byte-reproducible. WAV files use one canonical 44 byte
header (RIFF, fmt , data; mono 16 kHz 16-bit PCM) so a one second clip
is always exactly 32,044 bytes. Zip members carry a fixed timestamp.
The shard manifest is a stable, line-oriented key=value text file.
"""

from __future__ import annotations

import csv
import io
import struct
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from PIL import Image

from .caption import CaptionedRecord
from .errors import MalformedWav, WrongFormat
from .media import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, FrameBuffer

WAV_HEADER_BYTES = 44
WAV_FILE_BYTES = WAV_HEADER_BYTES + 2 * CLIP_SAMPLES  # 32044

#: zip member timestamp; fixed so archives are byte-stable across runs
ZIP_DATE_TIME = (1980, 1, 1, 0, 0, 0)

DEFAULT_ROWS_PER_CSV = 2500
DEFAULT_CSVS_PER_ZIP = 4
DEFAULT_JPEG_QUALITY = 90

_WAV_HEADER = struct.Struct("<4sI4s4sIHHIIHH4sI")


def encode_wav(clip: AudioClip) -> bytes:
    """Serialize a clip as a canonical mono 16 kHz 16-bit PCM WAV."""
    data = clip.samples.astype("<i2").tobytes()
    header = _WAV_HEADER.pack(
        b"RIFF", 36 + len(data), b"WAVE",
        b"fmt ", 16,
        1,                      # PCM
        1,                      # mono
        SAMPLE_RATE,
        SAMPLE_RATE * 2,        # byte rate
        2,                      # block align
        16,                     # bits per sample
        b"data", len(data),
    )
    return header + data


def decode_wav(blob: bytes) -> AudioClip:
    """Parse a WAV produced by encode_wav, strictly.

    MalformedWav when the bytes are not a parseable RIFF/WAVE file;
    WrongFormat when they parse but are not mono 16 kHz 16-bit PCM of
    exactly one second.
    """
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedWav("not a RIFF/WAVE stream")
    riff_size = struct.unpack_from("<I", blob, 4)[0]
    if riff_size + 8 > len(blob):
        raise MalformedWav("RIFF size exceeds available bytes")

    fmt = None
    data = None
    off = 12
    while off + 8 <= len(blob):
        tag = blob[off:off + 4]
        size = struct.unpack_from("<I", blob, off + 4)[0]
        body = blob[off + 8:off + 8 + size]
        if len(body) < size:
            raise MalformedWav(f"chunk {tag!r} truncated")
        if tag == b"fmt ":
            fmt = body
        elif tag == b"data":
            data = body
        # chunks are word aligned
        off += 8 + size + (size % 2)
    if fmt is None or data is None:
        raise MalformedWav("missing fmt or data chunk")
    if len(fmt) < 16:
        raise MalformedWav("fmt chunk too short")
    audio_format, channels, rate, _byte_rate, _align, bits = struct.unpack_from("<HHIIHH", fmt)
    if audio_format != 1:
        raise WrongFormat(f"need PCM, got format tag {audio_format}")
    if channels != 1:
        raise WrongFormat(f"need mono, got {channels} channels")
    if rate != SAMPLE_RATE:
        raise WrongFormat(f"need {SAMPLE_RATE} Hz, got {rate}")
    if bits != 16:
        raise WrongFormat(f"need 16-bit samples, got {bits}")
    if len(data) != 2 * CLIP_SAMPLES:
        raise WrongFormat(
            f"need exactly {CLIP_SAMPLES} samples, got {len(data) / 2:g}")
    samples = np.frombuffer(data, dtype="<i2")
    return AudioClip(samples)


def encode_image(frame: FrameBuffer, quality: int = DEFAULT_JPEG_QUALITY,
                 image_format: str = "jpeg") -> bytes:
    """Encode a frame as JPEG (lossy, default) or PNG (lossless)."""
    img = Image.frombytes("RGB", (frame.width, frame.height), frame.pixels)
    buf = io.BytesIO()
    if image_format == "jpeg":
        img.save(buf, format="JPEG", quality=quality)
    elif image_format == "png":
        img.save(buf, format="PNG")
    else:
        raise ValueError(f"unsupported image format {image_format!r}")
    return buf.getvalue()


def decode_image(blob: bytes) -> FrameBuffer:
    img = Image.open(io.BytesIO(blob))
    img = img.convert("RGB")
    return FrameBuffer(width=img.width, height=img.height, pixels=img.tobytes())


def image_extension(image_format: str) -> str:
    return {"jpeg": ".jpg", "png": ".png"}[image_format]


@dataclass(frozen=True)
class CsvShardInfo:
    file: str
    first_id: int
    last_id: int
    rows: int
    zip_file: str


@dataclass(frozen=True)
class ZipShardInfo:
    file: str
    csv_count: int
    image_count: int


@dataclass
class ShardManifest:
    """What a pack run produced, written next to the shards.

    CSV shards cover disjoint ascending id ranges; when nothing was
    dropped upstream the packed ids are gap-free, and the ranges must
    then also be contiguous (shard k+1 starts right after shard k).
    """

    total_pairs: int = 0
    rows_per_csv: int = DEFAULT_ROWS_PER_CSV
    csvs_per_zip: int = DEFAULT_CSVS_PER_ZIP
    dropped: dict[str, int] = field(default_factory=dict)
    config: dict[str, str] = field(default_factory=dict)
    csv_shards: list[CsvShardInfo] = field(default_factory=list)
    zip_shards: list[ZipShardInfo] = field(default_factory=list)

    def validate(self) -> None:
        if self.total_pairs != sum(s.rows for s in self.csv_shards):
            raise ValueError("total_pairs does not match shard row counts")
        gap_free = sum(self.dropped.values()) == 0
        prev_last: int | None = None
        for s in self.csv_shards:
            if s.rows <= 0:
                raise ValueError(f"{s.file}: empty shard listed")
            if s.last_id - s.first_id + 1 < s.rows:
                raise ValueError(f"{s.file}: more rows than the id range can hold")
            if prev_last is not None and s.first_id <= prev_last:
                raise ValueError(f"{s.file}: id ranges must be disjoint and ascending")
            if gap_free:
                if s.last_id - s.first_id + 1 != s.rows:
                    raise ValueError(f"{s.file}: id range does not match row count")
                if prev_last is not None and s.first_id != prev_last + 1:
                    raise ValueError(f"{s.file}: id ranges must be contiguous")
            prev_last = s.last_id


def write_csv_shards(records: Iterable[CaptionedRecord], out_dir,
                     rows_per_csv: int = DEFAULT_ROWS_PER_CSV,
                     csvs_per_zip: int = DEFAULT_CSVS_PER_ZIP,
                     jpeg_quality: int = DEFAULT_JPEG_QUALITY,
                     image_format: str = "jpeg",
                     image_source: Callable[[int], bytes] | None = None,
                     audio_as_path: bool = False,
                     dropped: dict[str, int] | None = None,
                     config: dict[str, str] | None = None) -> ShardManifest:
    """Write records into CSV shards grouped into zips with their images.

    records must arrive in strictly ascending global id order. Each CSV
    holds at most rows_per_csv rows with columns id, text, audio; audio
    is the 16,000 samples as one space separated integer string, or,
    with audio_as_path, the name of a WAV member stored in the zip
    beside the images. Each zip holds up to csvs_per_zip CSVs plus the
    media belonging to their rows. image_source, when given, supplies
    stored image bytes by id so already-encoded files are packed
    verbatim; otherwise the in-memory frame is encoded here. A write
    failure removes the partial csv or zip before propagating.
    """
    if rows_per_csv < 1 or csvs_per_zip < 1:
        raise ValueError("shard sizes must be positive")
    out = Path(out_dir)
    (out / "csv").mkdir(parents=True, exist_ok=True)
    (out / "zip").mkdir(parents=True, exist_ok=True)

    manifest = ShardManifest(rows_per_csv=rows_per_csv, csvs_per_zip=csvs_per_zip,
                             dropped=dict(dropped or {}), config=dict(config or {}))
    ext = image_extension(image_format)

    chunk: list[CaptionedRecord] = []
    csv_index = 0
    zip_buf: list[tuple[str, bytes, list[tuple[str, bytes]]]] = []

    def flush_zip() -> None:
        nonlocal zip_buf
        if not zip_buf:
            return
        zip_name = f"shard_{len(manifest.zip_shards):05d}.zip"
        zip_path = out / "zip" / zip_name
        media_count = 0
        try:
            with zipfile.ZipFile(zip_path, "w", zipfile.ZIP_DEFLATED) as zf:
                for csv_name, csv_bytes, _media in zip_buf:
                    zf.writestr(zipfile.ZipInfo(csv_name, ZIP_DATE_TIME), csv_bytes)
                for _csv_name, _csv_bytes, media in zip_buf:
                    for member_name, member_bytes in media:
                        zf.writestr(zipfile.ZipInfo(member_name, ZIP_DATE_TIME), member_bytes)
                        media_count += 1
        except OSError:
            zip_path.unlink(missing_ok=True)
            raise
        manifest.zip_shards.append(ZipShardInfo(
            file=f"zip/{zip_name}", csv_count=len(zip_buf), image_count=media_count))
        zip_buf = []

    def flush_csv() -> None:
        nonlocal chunk, csv_index
        if not chunk:
            return
        csv_name = f"pairs_{csv_index:05d}.csv"
        zip_name = f"shard_{len(manifest.zip_shards):05d}.zip"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "text", "audio"])
        media: list[tuple[str, bytes]] = []
        for rec in chunk:
            gid = rec.pair.global_id
            if audio_as_path:
                audio_field = f"{gid}.wav"
                media.append((audio_field, encode_wav(rec.pair.audio)))
            else:
                audio_field = " ".join(map(str, rec.pair.audio.samples.tolist()))
            writer.writerow([gid, rec.text, audio_field])
            if image_source is not None:
                img_bytes = image_source(gid)
            else:
                img_bytes = encode_image(rec.pair.image, jpeg_quality, image_format)
            media.append((f"{gid}{ext}", img_bytes))
        csv_bytes = buf.getvalue().encode("utf-8")
        csv_path = out / "csv" / csv_name
        try:
            csv_path.write_bytes(csv_bytes)
        except OSError:
            csv_path.unlink(missing_ok=True)
            raise
        manifest.csv_shards.append(CsvShardInfo(
            file=f"csv/{csv_name}",
            first_id=chunk[0].pair.global_id,
            last_id=chunk[-1].pair.global_id,
            rows=len(chunk),
            zip_file=f"zip/{zip_name}",
        ))
        zip_buf.append((csv_name, csv_bytes, media))
        chunk = []
        csv_index += 1
        if len(zip_buf) == csvs_per_zip:
            flush_zip()

    prev: int | None = None
    for rec in records:
        gid = rec.pair.global_id
        if prev is not None and gid <= prev:
            raise ValueError(f"records out of order: id {gid} after {prev}")
        prev = gid
        chunk.append(rec)
        manifest.total_pairs += 1
        if len(chunk) == rows_per_csv:
            flush_csv()
    flush_csv()
    flush_zip()
    manifest.validate()
    return manifest


def iter_shard_rows(zip_path) -> Iterable[tuple[int, str, np.ndarray]]:
    """Read (id, text, samples) rows back out of one zip shard.

    Handles both audio layouts: inline integer strings, and WAV member
    references written by the audio-as-path mode.
    """
    with zipfile.ZipFile(zip_path) as zf:
        names = sorted(n for n in zf.namelist() if n.endswith(".csv"))
        for name in names:
            with zf.open(name) as fh:
                text_fh = io.TextIOWrapper(fh, encoding="utf-8", newline="")
                reader = csv.reader(text_fh)
                header = next(reader)
                if header != ["id", "text", "audio"]:
                    raise ValueError(f"{zip_path}:{name}: unexpected columns {header}")
                for row in reader:
                    gid = int(row[0])
                    if row[2].endswith(".wav"):
                        samples = decode_wav(zf.read(row[2])).samples
                    else:
                        samples = np.array(row[2].split(" "), dtype=np.int16)
                    yield gid, row[1], samples


def read_shard_image(zip_path, member: str) -> bytes:
    with zipfile.ZipFile(zip_path) as zf:
        return zf.read(member)


MANIFEST_NAME = "manifest.txt"
_MANIFEST_HEADER = "# avtk shard manifest v1"


def write_manifest(manifest: ShardManifest, path) -> None:
    """Render the manifest as stable key=value text."""
    manifest.validate()
    lines = [_MANIFEST_HEADER]
    lines.append(f"total_pairs = {manifest.total_pairs}")
    lines.append(f"rows_per_csv = {manifest.rows_per_csv}")
    lines.append(f"csvs_per_zip = {manifest.csvs_per_zip}")
    for key in sorted(manifest.dropped):
        lines.append(f"dropped.{key} = {manifest.dropped[key]}")
    for key in sorted(manifest.config):
        lines.append(f"config.{key} = {manifest.config[key]}")
    lines.append("[csv]")
    for s in manifest.csv_shards:
        lines.append(
            f"file={s.file} first_id={s.first_id} last_id={s.last_id} "
            f"rows={s.rows} zip={s.zip_file}")
    lines.append("[zip]")
    for z in manifest.zip_shards:
        lines.append(f"file={z.file} csvs={z.csv_count} images={z.image_count}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_manifest(path) -> ShardManifest:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _MANIFEST_HEADER:
        raise ValueError(f"{path}: not a shard manifest")
    manifest = ShardManifest()
    section = ""
    for line in lines[1:]:
        if line in ("[csv]", "[zip]"):
            section = line[1:-1]
            continue
        if not section:
            key, _, value = line.partition(" = ")
            if key == "total_pairs":
                manifest.total_pairs = int(value)
            elif key == "rows_per_csv":
                manifest.rows_per_csv = int(value)
            elif key == "csvs_per_zip":
                manifest.csvs_per_zip = int(value)
            elif key.startswith("dropped."):
                manifest.dropped[key[len("dropped."):]] = int(value)
            elif key.startswith("config."):
                manifest.config[key[len("config."):]] = value
            else:
                raise ValueError(f"{path}: unknown manifest key {key!r}")
            continue
        fields = dict(part.split("=", 1) for part in line.split(" "))
        if section == "csv":
            manifest.csv_shards.append(CsvShardInfo(
                file=fields["file"], first_id=int(fields["first_id"]),
                last_id=int(fields["last_id"]), rows=int(fields["rows"]),
                zip_file=fields["zip"]))
        else:
            manifest.zip_shards.append(ZipShardInfo(
                file=fields["file"], csv_count=int(fields["csvs"]),
                image_count=int(fields["images"])))
    manifest.validate()
    return manifest
