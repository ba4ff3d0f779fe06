"""Command line entry point.

Four subcommands mirror the pipeline stages:

    avtk extract  VIDEO... --out DIR   decode, filter, store pairs
    avtk caption  --out DIR            caption stored pairs
    avtk pack     --out DIR            shard captioned pairs
    avtk stats    KIND --out DIR       words | amplitude | adi reports

Exit codes: 0 success, 1 usage error, 2 no usable input, 3 stage
failure.  A flat key=value config file may supply any flag's value;
explicit flags always win.
"""

from __future__ import annotations

import dataclasses
import logging
import sys
from typing import Sequence

import argparse

from .config import RunConfig, apply_flat, load_config_file
from .errors import AvtkError, EmptyCorpus, NoInput
from .pipeline import run_caption, run_extract, run_pack, run_stats

__all__ = ["main", "run_extract", "run_caption", "run_pack", "run_stats",
           "RunConfig"]


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract reserves 2 for
    empty input, so route usage errors to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _preload_config(argv: Sequence[str]) -> RunConfig:
    """Apply --config FILE (if present) onto the built-in defaults."""
    cfg = RunConfig()
    path = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif arg.startswith("--config="):
            path = arg.split("=", 1)[1]
    if path:
        cfg = apply_flat(cfg, load_config_file(path))
    return cfg


def _add_common(p: argparse.ArgumentParser, cfg: RunConfig) -> None:
    p.add_argument("--out", default=cfg.out or None, required=not cfg.out,
                   help="output directory (pair store, shards, reports)")
    p.add_argument("--config", metavar="FILE",
                   help="flat key=value config file; flags override it")
    p.add_argument("--workers", type=int, default=cfg.workers,
                   help="parallel workers (default: cpu count)")
    p.add_argument("--verbose", action="store_true",
                   help="debug logging to stderr")


def build_parser(cfg: RunConfig) -> _Parser:
    parser = _Parser(prog="avtk", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    ex = sub.add_parser("extract", help="decode videos into the pair store",
                        description="Decode, segment, filter and store "
                        "audio-image pairs.")
    ex.add_argument("inputs", nargs="*", default=list(cfg.inputs),
                    metavar="VIDEO", help="video files or directories")
    _add_common(ex, cfg)
    ex.add_argument("--border-threshold", type=int, default=cfg.border_threshold,
                    help="channel value a pixel must exceed to count as bright")
    ex.add_argument("--cut-threshold", type=float, default=cfg.cut_threshold,
                    help="mean squared frame difference that starts a new fragment")
    ex.add_argument("--silence-amp", type=int, default=cfg.silence_amp,
                    help="absolute sample value at or below which audio is quiet")
    ex.add_argument("--silence-dur", type=float, default=cfg.silence_dur,
                    help="seconds of continuous quiet that discard a window")
    ex.add_argument("--dark-mean", type=float, default=cfg.dark_mean,
                    help="mean pixel value at or below which a frame is dark")
    ex.add_argument("--keep-every", type=int, default=cfg.keep_every,
                    help="keep every k-th surviving window per fragment")
    ex.add_argument("--size", type=int, default=cfg.size,
                    help="output image side length")
    ex.add_argument("--min-crop-dim", type=int, default=cfg.min_crop_dim,
                    help="smallest usable crop box side")
    ex.add_argument("--fade-lookahead", type=int, default=cfg.fade_lookahead,
                    help="frames of lookahead when scoring cuts (0 = adjacent only)")
    ex.add_argument("--decoder", default=cfg.decoder,
                    choices=["auto", "ffmpeg", "rawdec"],
                    help="decoder backend (auto picks by file extension)")
    ex.add_argument("--probe-template", default=cfg.probe_template,
                    help="custom probe command template ({input})")
    ex.add_argument("--stream-template", default=cfg.stream_template,
                    help="custom decode template ({input} {video_out} {audio_out})")
    ex.add_argument("--jpeg-quality", type=int, default=cfg.jpeg_quality,
                    help="stored image quality")
    ex.add_argument("--image-format", default=cfg.image_format,
                    choices=["jpeg", "png"], help="stored image codec")

    cap = sub.add_parser("caption", help="caption stored pairs")
    _add_common(cap, cfg)
    cap.add_argument("--captioner", default=cfg.captioner,
                     help="'mock' or a plugin command line")
    cap.add_argument("--min-tokens", type=int, default=cfg.min_tokens,
                     help="decoder token floor passed to the plugin")
    cap.add_argument("--max-tokens", type=int, default=cfg.max_tokens,
                     help="decoder token ceiling passed to the plugin")
    cap.add_argument("--beams", type=int, default=cfg.beams,
                     help="beam count passed to the plugin")
    cap.add_argument("--min-words", type=int, default=cfg.min_words,
                     help="captions shorter than this are dropped")
    cap.add_argument("--max-words", type=int, default=cfg.max_words,
                     help="captions longer than this are dropped")
    cap.add_argument("--caption-timeout", type=float, default=cfg.caption_timeout,
                     help="seconds to wait for one caption")
    cap.add_argument("--image-format", default=cfg.image_format,
                     choices=["jpeg", "png"], help="stored image codec")

    pk = sub.add_parser("pack", help="shard captioned pairs into csv + zip")
    _add_common(pk, cfg)
    pk.add_argument("--rows-per-csv", type=int, default=cfg.rows_per_csv,
                    help="pairs per csv shard")
    pk.add_argument("--csvs-per-zip", type=int, default=cfg.csvs_per_zip,
                    help="csv shards per zip")
    pk.add_argument("--jpeg-quality", type=int, default=cfg.jpeg_quality,
                    help="shard image quality")
    pk.add_argument("--image-format", default=cfg.image_format,
                    choices=["jpeg", "png"], help="shard image codec")
    pk.add_argument("--audio-as-path", action="store_true",
                    default=cfg.audio_as_path,
                    help="store wav members and reference them from the csv")

    st = sub.add_parser("stats", help="aggregate reports over the corpus")
    st.add_argument("kind", choices=["words", "amplitude", "adi"],
                    help="which report to compute")
    _add_common(st, cfg)
    st.add_argument("--amp-bins", type=int, default=cfg.amp_bins,
                    help="amplitude histogram rows")
    st.add_argument("--adi-bins", type=int, default=cfg.adi_bins,
                    help="mel bins for the diversity index")
    st.add_argument("--top-k", type=int, default=cfg.top_k,
                    help="words listed in the frequency table")
    st.add_argument("--stoplist", default=cfg.stoplist,
                    help="stoplist file (default: bundled list)")
    st.add_argument("--source", default=cfg.source,
                    choices=["auto", "store", "shards"],
                    help="read from the pair store or the packed shards")
    return parser


def _config_from_args(cfg: RunConfig, ns: argparse.Namespace) -> RunConfig:
    updates = {}
    for f in dataclasses.fields(RunConfig):
        if hasattr(ns, f.name):
            updates[f.name] = getattr(ns, f.name)
    if "inputs" in updates:
        updates["inputs"] = tuple(updates["inputs"])
    return dataclasses.replace(cfg, **updates)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = _preload_config(argv)
    except (OSError, ValueError) as exc:
        print(f"avtk: config error: {exc}", file=sys.stderr)
        return 1
    parser = build_parser(cfg)
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if ns.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    cfg = _config_from_args(cfg, ns)

    try:
        if ns.command == "extract":
            if not cfg.inputs:
                parser.error("extract needs at least one video argument")
            summary = run_extract(cfg)
            print(f"extract: {summary.pairs_emitted} pairs from "
                  f"{summary.videos_processed}/{summary.videos_total} videos")
        elif ns.command == "caption":
            captions = run_caption(cfg)
            print(f"caption: {len(captions)} captions written")
        elif ns.command == "pack":
            manifest = run_pack(cfg)
            print(f"pack: {manifest.total_pairs} pairs in "
                  f"{len(manifest.csv_shards)} csv / {len(manifest.zip_shards)} zip shards")
        elif ns.command == "stats":
            path = run_stats(cfg, ns.kind)
            print(f"stats: wrote {path}")
        return 0
    except (NoInput, EmptyCorpus) as exc:
        print(f"avtk: {exc}", file=sys.stderr)
        return 2
    except AvtkError as exc:
        print(f"avtk: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        logging.getLogger(__name__).exception("unhandled failure")
        print(f"avtk: internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
