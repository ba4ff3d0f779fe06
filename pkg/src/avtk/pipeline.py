"""Stage orchestration: extract, caption, pack, stats.

Stages communicate through a plain directory layout under the output
root and can be rerun independently:

    pairs/<id>.jpg|.wav + pairs/index.csv     extract
    extract_summary.txt
    captions/captions.csv + captions/drops.csv
    shards/csv/*.csv + shards/zip/*.zip + shards/manifest.txt
    reports/*.txt|.pgm

Global pair ids are assigned in one serial pass after all videos
finish, ordered by (video id, fragment, window), so worker scheduling
can never influence the store.
"""

from __future__ import annotations

import csv
import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import analytics, border, caption, extract, ingest, pack, segment
from .config import RunConfig
from .errors import (AllDropped, DecoderCrash, EmptyCorpus, FrameAllDark,
                     NoInput, StageFailure, UnreadableMedia)
from .extract import FragmentStats, WindowCounters
from .media import AudioClip

log = logging.getLogger(__name__)

VIDEO_SUFFIXES = (".avr", ".mp4", ".mkv", ".mov", ".avi", ".webm", ".mpg", ".mpeg")


# ---------------------------------------------------------------------------
# input discovery

def find_inputs(paths: Iterable[str]) -> list[Path]:
    """Expand files and directories into a sorted list of video files."""
    found: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            found.extend(sorted(q for q in p.rglob("*")
                                if q.is_file() and q.suffix.lower() in VIDEO_SUFFIXES))
        elif p.is_file():
            found.append(p)
        else:
            raise NoInput(f"input {p} does not exist")
    if not found:
        raise NoInput("no video files found")
    return found


def assign_video_ids(paths: list[Path]) -> list[tuple[str, Path]]:
    """Stable (video_id, path) pairs; duplicate stems get ~N suffixes."""
    seen: dict[str, int] = {}
    out: list[tuple[str, Path]] = []
    for p in paths:
        stem = p.stem
        n = seen.get(stem, 0)
        seen[stem] = n + 1
        out.append((stem if n == 0 else f"{stem}~{n}", p))
    return out


# ---------------------------------------------------------------------------
# extract

@dataclass
class VideoResult:
    video_id: str
    path: Path
    fragments: list[FragmentStats] = field(default_factory=list)
    counters: WindowCounters = field(default_factory=WindowCounters)
    staged: list[tuple[int, int]] = field(default_factory=list)  # (fragment, window)
    skipped_reason: str = ""


@dataclass
class ExtractSummary:
    videos_total: int = 0
    videos_processed: int = 0
    videos_skipped: int = 0
    pairs_emitted: int = 0
    counters: WindowCounters = field(default_factory=WindowCounters)
    videos: list[VideoResult] = field(default_factory=list)


def _image_ext(config: RunConfig) -> str:
    return pack.image_extension(config.image_format)


def _process_video(video_id: str, path: Path, config: RunConfig,
                   stage_dir: Path) -> VideoResult:
    """Decode, crop, segment, window and filter one video into stage_dir."""
    result = VideoResult(video_id=video_id, path=path)
    filters = config.filter_config()
    spec = config.decoder_spec_for(path)

    meta = ingest.probe(path, spec)
    mid = ingest.read_middle_frame(path, spec, meta)
    box = border.compute_crop_box(mid, filters.border_threshold, filters.min_crop_dim)

    vdir = stage_dir / video_id
    vdir.mkdir(parents=True, exist_ok=True)
    ext = _image_ext(config)

    with ingest.open_streams(path, spec, meta) as dec:
        cropped = (border.apply_crop(fr, box) for fr in dec.frames())
        tagged = segment.iter_fragments(cropped, filters.cut_threshold,
                                        config.fade_lookahead)
        extractor = extract.VideoPairExtractor(
            tagged, dec.audio_blocks(), filters, meta.frame_duration)
        for pair in extractor.pairs():
            name = f"{pair.fragment_index:06d}_{pair.window_index:08d}"
            image_bytes = pack.encode_image(pair.image, config.jpeg_quality,
                                            config.image_format)
            (vdir / f"{name}{ext}").write_bytes(image_bytes)
            (vdir / f"{name}.wav").write_bytes(pack.encode_wav(pair.audio))
            result.staged.append((pair.fragment_index, pair.window_index))
    result.fragments = extractor.fragments
    result.counters = extractor.totals
    return result


def run_extract(config: RunConfig) -> ExtractSummary:
    """Populate the pair store from the configured inputs.

    Videos failing probe, crop, or decode are logged and skipped; the
    stage fails only when nothing succeeds.
    """
    out = Path(config.out)
    inputs = find_inputs(config.inputs)
    ids = assign_video_ids(inputs)
    stage_dir = out / "tmp.extract"
    if stage_dir.exists():
        shutil.rmtree(stage_dir)
    stage_dir.mkdir(parents=True)
    pairs_dir = out / "pairs"
    if pairs_dir.exists():
        shutil.rmtree(pairs_dir)

    summary = ExtractSummary(videos_total=len(ids))

    def work(item: tuple[str, Path]) -> VideoResult:
        video_id, path = item
        try:
            return _process_video(video_id, path, config, stage_dir)
        except (UnreadableMedia, FrameAllDark, DecoderCrash) as exc:
            log.warning("skipping %s: %s", path, exc)
            res = VideoResult(video_id=video_id, path=path)
            res.skipped_reason = f"{type(exc).__name__}: {exc}"
            return res

    workers = max(1, config.workers)
    if workers == 1 or len(ids) == 1:
        results = [work(item) for item in ids]
    else:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="avtk-video") as pool:
            results = list(pool.map(work, ids))

    # serial pass: global ids in (video_id, fragment, window) order
    results.sort(key=lambda r: r.video_id)
    pairs_dir.mkdir(parents=True)
    ext = _image_ext(config)
    index_rows: list[tuple[int, str, int, int, str]] = []
    gid = 0
    for res in results:
        summary.videos.append(res)
        if res.skipped_reason:
            summary.videos_skipped += 1
            continue
        summary.videos_processed += 1
        summary.counters.add(res.counters)
        vdir = stage_dir / res.video_id
        for frag, win in sorted(res.staged):
            name = f"{frag:06d}_{win:08d}"
            (vdir / f"{name}{ext}").rename(pairs_dir / f"{gid}{ext}")
            (vdir / f"{name}.wav").rename(pairs_dir / f"{gid}.wav")
            start = next(f.start_time for f in res.fragments if f.fragment_index == frag) + win
            index_rows.append((gid, res.video_id, frag, win, str(start)))
            gid += 1
    summary.pairs_emitted = gid
    shutil.rmtree(stage_dir)

    with open(pairs_dir / "index.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "video_id", "fragment_index", "window_index", "start_time"])
        writer.writerows(index_rows)
    _write_extract_summary(summary, out / "extract_summary.txt")

    if summary.videos_processed == 0:
        raise NoInput("no video could be processed")
    return summary


def _write_extract_summary(summary: ExtractSummary, path: Path) -> None:
    c = summary.counters
    lines = ["# extraction summary v1"]
    lines.append(f"videos_total = {summary.videos_total}")
    lines.append(f"videos_processed = {summary.videos_processed}")
    lines.append(f"videos_skipped = {summary.videos_skipped}")
    lines.append(f"pairs_emitted = {summary.pairs_emitted}")
    for key in ("windows", "emitted", "silence_dropped", "dark_dropped",
                "subsample_dropped", "noframe_dropped", "audioshort_dropped"):
        lines.append(f"{key} = {getattr(c, key)}")
    lines.append("[video]")
    for res in sorted(summary.videos, key=lambda r: r.video_id):
        if res.skipped_reason:
            reason = " ".join(res.skipped_reason.split())
            lines.append(f"id={res.video_id} skipped={reason}")
            continue
        c = res.counters
        lines.append(
            f"id={res.video_id} fragments={len(res.fragments)} windows={c.windows} "
            f"emitted={c.emitted} silence_dropped={c.silence_dropped} "
            f"dark_dropped={c.dark_dropped} subsample_dropped={c.subsample_dropped} "
            f"noframe_dropped={c.noframe_dropped} audioshort_dropped={c.audioshort_dropped}")
    lines.append("[fragment]")
    for res in sorted(summary.videos, key=lambda r: r.video_id):
        for frag in res.fragments:
            c = frag.counters
            lines.append(
                f"video={res.video_id} fragment={frag.fragment_index} "
                f"start={frag.start_time} end={frag.end_time} windows={c.windows} "
                f"emitted={c.emitted} silence_dropped={c.silence_dropped} "
                f"dark_dropped={c.dark_dropped} subsample_dropped={c.subsample_dropped} "
                f"noframe_dropped={c.noframe_dropped} audioshort_dropped={c.audioshort_dropped}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# store access

def load_index(out: Path) -> list[tuple[int, str, int, int, str]]:
    index = out / "pairs" / "index.csv"
    if not index.is_file():
        raise NoInput(f"pair store index {index} not found; run extract first")
    rows = []
    with open(index, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "video_id", "fragment_index", "window_index", "start_time"]:
            raise StageFailure(f"{index}: unexpected columns {header}")
        for row in reader:
            rows.append((int(row[0]), row[1], int(row[2]), int(row[3]), row[4]))
    return rows


def store_clips(out: Path) -> Iterator[AudioClip]:
    """Clips from the pair store, ascending id order."""
    for gid, *_ in load_index(out):
        blob = (out / "pairs" / f"{gid}.wav").read_bytes()
        yield pack.decode_wav(blob)


def load_captions(out: Path) -> dict[int, str]:
    path = out / "captions" / "captions.csv"
    if not path.is_file():
        raise NoInput(f"caption table {path} not found; run caption first")
    captions: dict[int, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "text"]:
            raise StageFailure(f"{path}: unexpected columns {header}")
        for row in reader:
            captions[int(row[0])] = row[1]
    return captions


# ---------------------------------------------------------------------------
# caption

def run_caption(config: RunConfig) -> dict[int, str]:
    """Caption every stored pair; write the caption table and drop log."""
    out = Path(config.out)
    index = load_index(out)
    spec = config.captioner_spec()
    ext = _image_ext(config)
    tasks = [(gid, out / "pairs" / f"{gid}{ext}") for gid, *_ in index]
    captions, drops = caption.caption_paths(tasks, spec, workers=max(1, config.workers))

    cap_dir = out / "captions"
    cap_dir.mkdir(parents=True, exist_ok=True)
    with open(cap_dir / "captions.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "text"])
        for gid in sorted(captions):
            writer.writerow([gid, captions[gid]])
    with open(cap_dir / "drops.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "category", "detail"])
        for gid in sorted(drops):
            category, detail = drops[gid]
            writer.writerow([gid, category, " ".join(detail.split())])

    if index and not captions:
        raise AllDropped(f"captioner produced no captions for {len(index)} pairs")
    return captions


# ---------------------------------------------------------------------------
# pack

def run_pack(config: RunConfig) -> pack.ShardManifest:
    """Pack captioned pairs into CSV/zip shards plus manifest."""
    out = Path(config.out)
    index = load_index(out)
    captions = load_captions(out)
    ext = _image_ext(config)

    dropped: dict[str, int] = {}
    logged_drops: set[int] = set()
    drops_path = out / "captions" / "drops.csv"
    if drops_path.is_file():
        with open(drops_path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            for row in reader:
                logged_drops.add(int(row[0]))
                dropped[row[1]] = dropped.get(row[1], 0) + 1
    uncaptioned = sum(1 for gid, *_ in index
                      if gid not in captions and gid not in logged_drops)
    if uncaptioned:
        dropped["uncaptioned"] = uncaptioned

    def records() -> Iterator[caption.CaptionedRecord]:
        for gid, video_id, frag, win, _start in index:
            if gid not in captions:
                continue
            image = pack.decode_image((out / "pairs" / f"{gid}{ext}").read_bytes())
            clip = pack.decode_wav((out / "pairs" / f"{gid}.wav").read_bytes())
            pair = extract.PairRecord(global_id=gid, video_id=video_id,
                                      fragment_index=frag, window_index=win,
                                      image=image, audio=clip)
            yield caption.CaptionedRecord(pair=pair, text=captions[gid])

    shard_dir = out / "shards"
    manifest = pack.write_csv_shards(
        records(), shard_dir,
        rows_per_csv=config.rows_per_csv,
        csvs_per_zip=config.csvs_per_zip,
        jpeg_quality=config.jpeg_quality,
        image_format=config.image_format,
        image_source=lambda gid: (out / "pairs" / f"{gid}{ext}").read_bytes(),
        audio_as_path=config.audio_as_path,
        dropped=dropped,
        config=config.echo(),
    )
    pack.write_manifest(manifest, shard_dir / pack.MANIFEST_NAME)
    return manifest


# ---------------------------------------------------------------------------
# stats

def _resolve_source(config: RunConfig) -> str:
    out = Path(config.out)
    if config.source in ("store", "shards"):
        return config.source
    if (out / "shards" / pack.MANIFEST_NAME).is_file():
        return "shards"
    return "store"


def _iter_rows(config: RunConfig) -> Iterator[tuple[int, str, np.ndarray]]:
    """(id, caption, samples) from the chosen data source."""
    out = Path(config.out)
    if _resolve_source(config) == "shards":
        manifest = pack.parse_manifest(out / "shards" / pack.MANIFEST_NAME)
        for z in manifest.zip_shards:
            yield from pack.iter_shard_rows(out / "shards" / z.file)
        return
    captions = load_captions(out)
    for gid, *_ in load_index(out):
        if gid not in captions:
            continue
        clip = pack.decode_wav((out / "pairs" / f"{gid}.wav").read_bytes())
        yield gid, captions[gid], clip.samples


def _stoplist(config: RunConfig) -> frozenset[str]:
    if not config.stoplist:
        return analytics.load_default_stoplist()
    words = Path(config.stoplist).read_text(encoding="utf-8").splitlines()
    return frozenset(w.strip() for w in words if w.strip() and not w.startswith("#"))


def run_stats(config: RunConfig, which: str) -> Path:
    """Compute one report over the packed shards or the pair store.

    Returns the path of the primary report file written.
    """
    out = Path(config.out)
    reports = out / "reports"
    reports.mkdir(parents=True, exist_ok=True)

    if which == "words":
        acc = analytics.WordStatsAccumulator()
        for _gid, text, _samples in _iter_rows(config):
            acc.add(text)
        report = acc.finalize(_stoplist(config), config.top_k)
        path = reports / "word_stats.txt"
        _write_word_report(report, path)
        return path

    if which == "amplitude":
        matrix = analytics.AmplitudeMatrix(config.amp_bins)
        for _gid, _text, samples in _iter_rows(config):
            matrix.add_clip(AudioClip(samples))
        if matrix.n_clips == 0:
            raise EmptyCorpus("no clips to aggregate")
        pgm = reports / "amplitude_matrix.pgm"
        pgm.write_bytes(analytics.render_matrix(matrix))
        summary = reports / "amplitude_summary.txt"
        sums = matrix.column_sums()
        lines = ["# amplitude matrix v1",
                 f"clips = {matrix.n_clips}",
                 f"amp_bins = {matrix.amp_bins}",
                 f"max_count = {matrix.max_count}",
                 f"column_sum_min = {int(sums.min())}",
                 f"column_sum_max = {int(sums.max())}",
                 f"occupied_bins = {len(matrix.occupied_bins())}"]
        summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return pgm

    if which == "adi":
        binning = analytics.MelBinning(n_bins=config.adi_bins)
        acc = analytics.GroupedPowerAccumulator(binning)
        for _gid, _text, samples in _iter_rows(config):
            acc.add(AudioClip(samples))
        report = acc.finalize()
        path = reports / "adi_report.txt"
        _write_adi_report(report, path)
        return path

    raise ValueError(f"unknown stats kind {which!r}")


def _write_word_report(report: analytics.WordStatsReport, path: Path) -> None:
    lines = ["# word statistics v1"]
    lines.append(f"captions = {report.captions}")
    lines.append(f"word_count_mean = {report.word_count_mean!r}")
    lines.append(f"word_count_std = {report.word_count_std!r}")
    lines.append(f"distinct_words = {report.distinct_words}")
    lines.append(f"distinct_after_stoplist = {report.distinct_after_stoplist}")
    lines.append("[top]")
    for rank, (word, pct) in enumerate(report.top, 1):
        lines.append(f"rank={rank} word={word} presence_pct={pct!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_adi_report(report: analytics.AdiReport, path: Path) -> None:
    binning = report.binning
    lines = ["# acoustic diversity v1"]
    lines.append(f"clips = {report.n_clips}")
    lines.append(f"bins = {binning.n_bins}")
    lines.append(f"adi_nats = {report.adi_value!r}")
    lines.append(f"adi_max_nats = {float(np.log(binning.n_bins))!r}")
    lines.append(f"classification = {report.classification}")
    lines.append("[bins]")
    for b in range(binning.n_bins):
        lo, hi = binning.hz_range(b)
        lines.append(
            f"bin={b} hz_lo={lo} hz_hi={hi} power={report.bin_power[b]!r} "
            f"probability={report.probabilities[b]!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
