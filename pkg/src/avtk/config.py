"""Run configuration and the flat key=value config file.

Every CLI flag has a config twin under the same name (dashes become
underscores); flags win over file values, file values win over
defaults. RunConfig round-trips through the file losslessly, and the
behavior-affecting subset is echoed into the shard manifest (file
locations are excluded there so identical runs into different output
directories stay byte-identical).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .caption import CaptionerSpec
from .ingest import FFMPEG_SPEC, RAWDEC_SPEC, DecoderSpec
from .media import FilterConfig

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    """Everything one pipeline invocation needs.

    seed is reserved: the pipeline is deterministic and never draws
    random numbers, but the knob stays so configs remain stable if a
    stochastic stage ever appears.
    """

    inputs: tuple[str, ...] = ()
    out: str = ""

    border_threshold: int = 15
    cut_threshold: float = 90.0
    silence_amp: int = 100
    silence_dur: float = 0.5
    dark_mean: float = 10.0
    keep_every: int = 3
    size: int = 512
    min_crop_dim: int = 64
    fade_lookahead: int = 0

    decoder: str = "auto"
    probe_template: str = ""
    stream_template: str = ""

    captioner: str = "mock"
    min_tokens: int = 10
    max_tokens: int = 20
    beams: int = 2
    min_words: int = 1
    max_words: int = 20
    caption_timeout: float = 120.0

    rows_per_csv: int = 2500
    csvs_per_zip: int = 4
    jpeg_quality: int = 90
    image_format: str = "jpeg"
    audio_as_path: bool = False

    amp_bins: int = 256
    adi_bins: int = 32
    top_k: int = 60
    stoplist: str = ""
    source: str = "auto"

    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    seed: int = 0

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            border_threshold=self.border_threshold,
            cut_threshold=self.cut_threshold,
            silence_amp=self.silence_amp,
            silence_dur=self.silence_dur,
            dark_mean=self.dark_mean,
            keep_every=self.keep_every,
            out_size=self.size,
            min_crop_dim=self.min_crop_dim,
        )

    def decoder_spec_for(self, path) -> DecoderSpec:
        if self.probe_template or self.stream_template:
            if not (self.probe_template and self.stream_template):
                raise ValueError("probe_template and stream_template must be set together")
            return DecoderSpec(probe_template=self.probe_template,
                               stream_template=self.stream_template)
        if self.decoder == "ffmpeg":
            return FFMPEG_SPEC
        if self.decoder == "rawdec":
            return RAWDEC_SPEC
        if self.decoder == "auto":
            return RAWDEC_SPEC if Path(path).suffix.lower() == ".avr" else FFMPEG_SPEC
        raise ValueError(f"unknown decoder {self.decoder!r}")

    def captioner_spec(self) -> CaptionerSpec:
        kind = "mock" if self.captioner == "mock" else "external"
        return CaptionerSpec(
            kind=kind,
            command="" if kind == "mock" else self.captioner,
            min_tokens=self.min_tokens,
            max_tokens=self.max_tokens,
            beams=self.beams,
            min_words=self.min_words,
            max_words=self.max_words,
            timeout=self.caption_timeout,
        )

    def to_flat(self) -> dict[str, str]:
        """Flat text mapping, config-file and echo representation."""
        out: dict[str, str] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "inputs":
                continue
            if isinstance(value, bool):
                out[f.name] = "true" if value else "false"
            else:
                out[f.name] = str(value)
        return out

    def echo(self) -> dict[str, str]:
        """to_flat minus filesystem locations, for the shard manifest."""
        flat = self.to_flat()
        for key in ("out", "stoplist"):
            flat.pop(key, None)
        return flat


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def apply_flat(config: RunConfig, flat: dict[str, str | list[str]]) -> RunConfig:
    """Set fields from flat text values, with type coercion.

    Mutates and returns config.
    """
    for key, raw in flat.items():
        if key == "input":
            assert isinstance(raw, list)
            config.inputs = tuple(raw)
            continue
        if key not in _FIELD_TYPES or key == "inputs":
            raise ValueError(f"unknown config key {key!r}")
        assert isinstance(raw, str)
        current = getattr(config, key)
        if isinstance(current, bool):
            setattr(config, key, _parse_bool(raw))
        elif isinstance(current, int):
            setattr(config, key, int(raw))
        elif isinstance(current, float):
            setattr(config, key, float(raw))
        else:
            setattr(config, key, raw)
    return config


def load_config_file(path) -> dict[str, str | list[str]]:
    """Parse a flat key=value file; `input` may repeat."""
    flat: dict[str, str | list[str]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "input":
            flat.setdefault("input", [])
            assert isinstance(flat["input"], list)
            flat["input"].append(value)
        else:
            flat[key] = value
    return flat


def save_config_file(config: RunConfig, path) -> None:
    lines = ["# avtk run configuration"]
    for item in config.inputs:
        lines.append(f"input = {item}")
    for key, value in config.to_flat().items():
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
