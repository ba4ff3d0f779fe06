"""Exception types raised across the toolkit.

Everything inherits from AvtkError so CLI entry points can map failures
to exit codes in one place.
"""


class AvtkError(Exception):
    """Base class for all toolkit errors."""


class UnreadableMedia(AvtkError):
    """Probe failed: file unreadable, or a required stream is absent."""


class DecoderCrash(AvtkError):
    """Decoder subprocess exited abnormally mid-stream."""


class FrameAllDark(AvtkError):
    """No usable content region: every pixel at or below the border
    threshold, or the bright region is smaller than the minimum crop."""


class BoxOutOfBounds(AvtkError):
    """Crop box does not fit inside the frame it is applied to."""


class DimensionMismatch(AvtkError):
    """Two frames compared pixel-wise do not share dimensions."""


class NoFrameInWindow(AvtkError):
    """A one second window contains no decoded frame."""


class CaptionerFailure(AvtkError):
    """Captioner returned an error, violated the wire protocol, or died."""


class MalformedWav(AvtkError):
    """Byte stream is not a parseable RIFF/WAVE file."""


class WrongFormat(AvtkError):
    """Parseable WAV, but not mono 16 kHz 16-bit PCM of exactly one second."""


class EmptyCorpus(AvtkError):
    """An analytics pass was asked to summarize zero observations."""


class AllSilent(AvtkError):
    """Acoustic diversity is undefined: total spectral power is zero."""


class NotNormalized(AvtkError):
    """Entropy input is not a probability distribution."""


class OutOfRange(AvtkError):
    """Value falls outside the attainable range for the statistic."""


class AllDropped(AvtkError):
    """Captioning dropped every pair; nothing to carry forward."""


class NoInput(AvtkError):
    """No usable input files were found."""


class StageFailure(AvtkError):
    """A pipeline stage could not produce its artifact."""
