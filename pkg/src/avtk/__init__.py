"""avtk: turn videos into aligned audio/image/caption observations.

The pipeline decodes videos through an external decoder process, crops
dark borders, splits on hard cuts, windows the audio into exact one
second clips paired with the middle frame of each window, filters
silent and dark pairs, subsamples, normalizes frames to a square size,
captions them, and packs everything into CSV/zip shards. A small
analytics suite summarizes caption vocabulary, sample amplitudes over
clip time, and spectral diversity of the audio.
"""

__version__ = "0.1.0"
