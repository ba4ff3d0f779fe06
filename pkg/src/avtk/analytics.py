"""Dataset statistics: caption vocabulary, amplitude counts, spectral diversity.

Three summaries over a corpus of observations:

* word_stats: per-caption word count mean/std plus presence
  percentages, with function words removed by a stoplist.
* AmplitudeMatrix: how often each quantized sample amplitude occurs at
  each of the 16,000 clip timestamps, rendered as a grayscale PGM.
* adi: acoustic diversity. Each clip is Hann windowed, transformed with
  a 16,000 point DFT (1 Hz bins), the squared magnitudes grouped into
  32 mel-spaced frequency bins over [0, 8000] Hz, summed over the
  corpus, normalized, and scored with the Shannon entropy in nats. The
  attainable range [0, ln 32] splits into tertiles Low/Medium/High.

All accumulators merge exactly: counts are integers and cross-clip
power is summed as Fractions, so splitting a corpus, merging, and the
single pass agree bit for bit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import AllSilent, EmptyCorpus, NotNormalized, OutOfRange
from .media import CLIP_SAMPLES, AudioClip

DEFAULT_AMP_BINS = 256
DEFAULT_ADI_BINS = 32
DEFAULT_TOP_K = 60

_SAMPLE_LEVELS = 65536


# ---------------------------------------------------------------------------
# caption vocabulary

# A word is a digit run, or a letter followed by letters/digits, so
# "512x512" tokenizes as [512, x512] and punctuation always separates.
_TOKEN = re.compile(r"[0-9]+|[^\W\d_][^\W_]*")


def tokenize(text: str) -> list[str]:
    """Lowercase words of a caption; punctuation and symbols separate."""
    return _TOKEN.findall(text.lower())


def load_default_stoplist() -> frozenset[str]:
    """Bundled stoplist: prepositions, pronouns, conjunctions, determiners."""
    data = resources.files("avtk").joinpath("data/stopwords.txt").read_text("utf-8")
    words = {ln.strip() for ln in data.splitlines()}
    return frozenset(w for w in words if w and not w.startswith("#"))


@dataclass(frozen=True)
class WordStatsReport:
    captions: int
    word_count_mean: float
    word_count_std: float
    distinct_words: int
    distinct_after_stoplist: int
    top: tuple[tuple[str, float], ...]  # (word, presence %), descending


class WordStatsAccumulator:
    """Mergeable caption statistics; everything integer until finalize."""

    def __init__(self) -> None:
        self.n = 0
        self.sum_counts = 0
        self.sum_sq_counts = 0
        self.presence: dict[str, int] = {}
        self.vocabulary: set[str] = set()

    def add(self, caption: str) -> None:
        words = tokenize(caption)
        self.n += 1
        self.sum_counts += len(words)
        self.sum_sq_counts += len(words) ** 2
        seen = set(words)
        self.vocabulary.update(seen)
        for w in seen:
            self.presence[w] = self.presence.get(w, 0) + 1

    def merge(self, other: "WordStatsAccumulator") -> None:
        self.n += other.n
        self.sum_counts += other.sum_counts
        self.sum_sq_counts += other.sum_sq_counts
        self.vocabulary.update(other.vocabulary)
        for w, c in other.presence.items():
            self.presence[w] = self.presence.get(w, 0) + c

    def finalize(self, stoplist: frozenset[str] | set[str] | None = None,
                 top_k: int = DEFAULT_TOP_K) -> WordStatsReport:
        if self.n == 0:
            raise EmptyCorpus("no captions to summarize")
        stop = frozenset(stoplist) if stoplist is not None else frozenset()
        mean = self.sum_counts / self.n
        # population variance via E[x^2] - E[x]^2 on exact integer sums
        var = self.sum_sq_counts / self.n - mean * mean
        std = math.sqrt(var) if var > 0 else 0.0
        kept = {w: c for w, c in self.presence.items() if w not in stop}
        ranked = sorted(kept.items(), key=lambda item: (-item[1], item[0]))
        top = tuple((w, 100.0 * c / self.n) for w, c in ranked[:top_k])
        return WordStatsReport(
            captions=self.n,
            word_count_mean=mean,
            word_count_std=std,
            distinct_words=len(self.vocabulary),
            distinct_after_stoplist=len(set(self.vocabulary) - stop),
            top=top,
        )


def word_stats(captions: Iterable[str], stoplist: frozenset[str] | set[str] | None = None,
               top_k: int = DEFAULT_TOP_K) -> WordStatsReport:
    """Word statistics over a caption corpus.

    Mean and standard deviation (population) are over raw per-caption
    word counts, before any stoplist removal; presence counts a word at
    most once per caption. Raises EmptyCorpus for zero captions.
    """
    acc = WordStatsAccumulator()
    for c in captions:
        acc.add(c)
    return acc.finalize(stoplist, top_k)


# ---------------------------------------------------------------------------
# amplitude matrix

class AmplitudeMatrix:
    """Occurrence counts of quantized amplitudes per clip timestamp.

    amp_bins equal intervals quantize [-32768, 32767]; amp_bins must
    divide 65,536. The dense array backs common sizes; the exact
    65,536-bin mode stores rows sparsely (a dense int64 matrix would
    be 8 GB).
    """

    _DENSE_LIMIT = 4096

    def __init__(self, amp_bins: int = DEFAULT_AMP_BINS):
        if amp_bins < 1 or _SAMPLE_LEVELS % amp_bins != 0:
            raise ValueError(f"amp_bins must divide {_SAMPLE_LEVELS}, got {amp_bins}")
        self.amp_bins = amp_bins
        self.n_clips = 0
        # quantization keeps equal integer widths: shift by log2(width)
        self._shift = (_SAMPLE_LEVELS // amp_bins).bit_length() - 1
        self._dense: np.ndarray | None = None
        self._rows: dict[int, np.ndarray] | None = None
        if amp_bins <= self._DENSE_LIMIT:
            self._dense = np.zeros((amp_bins, CLIP_SAMPLES), dtype=np.int64)
        else:
            self._rows = {}

    def bin_of(self, sample: int) -> int:
        """Quantization bin of one sample value."""
        if not -32768 <= sample <= 32767:
            raise ValueError(f"sample {sample} outside int16 range")
        return (sample + 32768) >> self._shift

    def add_clip(self, clip: AudioClip) -> None:
        self.n_clips += 1
        if self._dense is not None:
            _kernels.amp_hist_update(self._dense, clip.samples, self._shift)
            return
        assert self._rows is not None
        rows = (clip.samples.astype(np.int32) + 32768) >> self._shift
        for r in np.unique(rows):
            row = self._rows.get(int(r))
            if row is None:
                row = self._rows.setdefault(int(r), np.zeros(CLIP_SAMPLES, dtype=np.int64))
            row[rows == r] += 1

    def merge(self, other: "AmplitudeMatrix") -> None:
        if other.amp_bins != self.amp_bins:
            raise ValueError("cannot merge matrices with different amp_bins")
        self.n_clips += other.n_clips
        if self._dense is not None:
            assert other._dense is not None
            self._dense += other._dense
        else:
            assert self._rows is not None and other._rows is not None
            for r, row in other._rows.items():
                mine = self._rows.get(r)
                if mine is None:
                    self._rows[r] = row.copy()
                else:
                    mine += row

    def row(self, amp_bin: int) -> np.ndarray:
        if not 0 <= amp_bin < self.amp_bins:
            raise IndexError(f"bin {amp_bin} outside 0..{self.amp_bins - 1}")
        if self._dense is not None:
            return self._dense[amp_bin]
        assert self._rows is not None
        found = self._rows.get(amp_bin)
        return found if found is not None else np.zeros(CLIP_SAMPLES, dtype=np.int64)

    def __getitem__(self, key: tuple[int, int]) -> int:
        amp_bin, t = key
        return int(self.row(amp_bin)[t])

    @property
    def max_count(self) -> int:
        if self._dense is not None:
            return int(self._dense.max()) if self._dense.size else 0
        assert self._rows is not None
        return max((int(r.max()) for r in self._rows.values()), default=0)

    def column_sums(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense.sum(axis=0)
        assert self._rows is not None
        total = np.zeros(CLIP_SAMPLES, dtype=np.int64)
        for r in self._rows.values():
            total += r
        return total

    def occupied_bins(self) -> list[int]:
        """Bins holding at least one count, ascending."""
        if self._dense is not None:
            return [int(b) for b in np.flatnonzero(self._dense.any(axis=1))]
        assert self._rows is not None
        return sorted(b for b, r in self._rows.items() if r.any())


def amplitude_matrix(clips: Iterable[AudioClip], amp_bins: int = DEFAULT_AMP_BINS) -> AmplitudeMatrix:
    """Count quantized amplitude occurrences per timestamp over clips."""
    matrix = AmplitudeMatrix(amp_bins)
    for clip in clips:
        matrix.add_clip(clip)
    return matrix


def render_matrix(matrix: AmplitudeMatrix) -> bytes:
    """Render counts as a binary PGM, 16,000 wide, amp_bins tall.

    Zero count maps to white (255), the maximum count to black (0),
    linearly in between with half-up rounding. The top image row is the
    highest amplitude bin, so positive amplitudes sit on top as in a
    waveform display. An empty matrix renders all white.
    """
    header = f"P5\n{CLIP_SAMPLES} {matrix.amp_bins}\n255\n".encode("ascii")
    out = bytearray(header)
    peak = matrix.max_count
    if peak == 0:
        out.extend(b"\xff" * (matrix.amp_bins * CLIP_SAMPLES))
        return bytes(out)
    for amp_bin in range(matrix.amp_bins - 1, -1, -1):
        row = matrix.row(amp_bin)
        vals = np.floor(255.0 * (1.0 - row / peak) + 0.5)
        out.extend(vals.astype(np.uint8).tobytes())
    return bytes(out)


# ---------------------------------------------------------------------------
# acoustic diversity

def hann(n: int) -> np.ndarray:
    """Hann window w[k] = 0.5*(1 - cos(2*pi*k/(n-1))), k = 0..n-1.

    Evaluated in numpy's centered form, which keeps the window exactly
    symmetric (the naive left-to-right evaluation drifts by one ulp
    between mirrored samples).
    """
    if n < 2:
        raise ValueError("window needs at least two points")
    return np.hanning(n)


_HANN_CLIP = hann(CLIP_SAMPLES)


def power_spectrum(clip: AudioClip) -> np.ndarray:
    """Squared DFT magnitudes of the Hann windowed clip, f = 0..8000 Hz.

    The transform length is exactly 16,000 samples with no padding, so
    bin f is exactly f Hz; 8,001 values cover DC through Nyquist.
    """
    x = clip.samples.astype(np.float64) * _HANN_CLIP
    spectrum = np.fft.rfft(x)
    return spectrum.real ** 2 + spectrum.imag ** 2


def mel(f: float) -> float:
    """Mel value of a frequency: 2595*log10(1 + f/700)."""
    return 2595.0 * math.log10(1.0 + f / 700.0)


@dataclass(frozen=True)
class MelBinning:
    """Partition of [0, f_max] Hz into bins evenly spaced in mel."""

    n_bins: int = DEFAULT_ADI_BINS
    f_max: int = 8000

    def __post_init__(self) -> None:
        if self.n_bins < 2:
            raise ValueError("need at least two bins")
        if self.f_max < self.n_bins:
            raise ValueError("f_max too small for the bin count")

    def bin_of(self, f: float) -> int:
        """Bin index for a frequency; the top edge clamps into the last bin."""
        if f < 0 or f > self.f_max:
            raise OutOfRange(f"frequency {f} outside [0, {self.f_max}]")
        return min(self.n_bins - 1, int(self.n_bins * mel(f) / mel(self.f_max)))

    @cached_property
    def edges(self) -> tuple[float, ...]:
        """n_bins + 1 mel values, evenly spaced from mel(0) to mel(f_max)."""
        top = mel(self.f_max)
        return tuple(i * top / self.n_bins for i in range(self.n_bins + 1))

    @cached_property
    def freq_bins(self) -> np.ndarray:
        """Bin index of every integer frequency 0..f_max.

        Built from the scalar rule so grouping can never disagree with
        bin_of at an edge.
        """
        return np.array([self.bin_of(f) for f in range(self.f_max + 1)], dtype=np.int64)

    def hz_range(self, b: int) -> tuple[int, int]:
        """Inclusive integer Hz range mapped to bin b."""
        hits = np.flatnonzero(self.freq_bins == b)
        if hits.size == 0:
            return (0, -1)
        return int(hits[0]), int(hits[-1])


def mel_bin_of(f: float, binning: MelBinning | None = None) -> int:
    """Mel bin of a frequency under the default 32-bin [0, 8000] layout."""
    return (binning or MelBinning()).bin_of(f)


def grouped_power(clip: AudioClip, binning: MelBinning | None = None) -> np.ndarray:
    """Per-mel-bin summed spectral power of one clip (float64)."""
    binning = binning or MelBinning()
    ps = power_spectrum(clip)
    if ps.shape[0] != binning.f_max + 1:
        raise ValueError("binning does not cover the spectrum")
    return np.bincount(binning.freq_bins, weights=ps, minlength=binning.n_bins)


def shannon(p: Sequence[float] | np.ndarray) -> float:
    """Shannon entropy in nats; 0*ln(0) counts as zero.

    Raises NotNormalized unless p is non-negative and sums to 1 within
    1e-9.
    """
    total = 0.0
    h = 0.0
    for v in p:
        v = float(v)
        if v < 0:
            raise NotNormalized(f"negative probability {v}")
        total += v
        if v > 0:
            h -= v * math.log(v)
    if abs(total - 1.0) > 1e-9:
        raise NotNormalized(f"probabilities sum to {total!r}")
    return h


@dataclass(frozen=True)
class AdiReport:
    """Acoustic diversity of a clip corpus."""

    n_clips: int
    bin_power: tuple[float, ...]
    probabilities: tuple[float, ...]
    adi_value: float
    classification: str
    binning: MelBinning = field(default_factory=MelBinning, compare=False)


class GroupedPowerAccumulator:
    """Mergeable cross-clip sum of per-mel-bin spectral power.

    Per-clip spectra are float64; the cross-clip sums are Fractions
    (exact), so merging disjoint subsets equals a single pass exactly,
    regardless of clip order.
    """

    def __init__(self, binning: MelBinning | None = None):
        self.binning = binning or MelBinning()
        self.n_clips = 0
        self.bins: list[Fraction] = [Fraction(0)] * self.binning.n_bins

    def add(self, clip: AudioClip) -> None:
        grouped = grouped_power(clip, self.binning)
        for i, v in enumerate(grouped.tolist()):
            if v:
                self.bins[i] += Fraction(v)
        self.n_clips += 1

    def merge(self, other: "GroupedPowerAccumulator") -> None:
        if other.binning != self.binning:
            raise ValueError("cannot merge accumulators with different binnings")
        self.n_clips += other.n_clips
        for i, v in enumerate(other.bins):
            self.bins[i] += v

    def finalize(self) -> AdiReport:
        if self.n_clips == 0:
            raise EmptyCorpus("no clips to summarize")
        total = sum(self.bins)
        if total == 0:
            raise AllSilent("total spectral power is zero")
        probabilities = tuple(float(b / total) for b in self.bins)
        h = shannon(probabilities)
        return AdiReport(
            n_clips=self.n_clips,
            bin_power=tuple(float(b) for b in self.bins),
            probabilities=probabilities,
            adi_value=h,
            classification=classify_adi(h, self.binning.n_bins),
            binning=self.binning,
        )


def adi(clips: Iterable[AudioClip], binning: MelBinning | None = None) -> AdiReport:
    """Acoustic Diversity Index of a corpus of clips.

    Raises EmptyCorpus for zero clips and AllSilent when no clip
    carries any spectral power.
    """
    acc = GroupedPowerAccumulator(binning)
    for clip in clips:
        acc.add(clip)
    return acc.finalize()


#: numeric slack for entropy landing a few ulps outside [0, ln(bins)]
_ADI_EPS = 1e-9


def classify_adi(h: float, n_bins: int = DEFAULT_ADI_BINS) -> str:
    """Tertile label for a diversity value.

    The attainable range [0, ln n_bins] splits into three equal parts:
    Low on [0, ln/3], Medium on (ln/3, 2*ln/3), High on [2*ln/3, ln].
    """
    top = math.log(n_bins)
    if h < -_ADI_EPS or h > top + _ADI_EPS:
        raise OutOfRange(f"diversity {h} outside [0, {top}]")
    h = min(max(h, 0.0), top)
    if h <= top / 3:
        return "Low"
    if h < 2 * top / 3:
        return "Medium"
    return "High"
