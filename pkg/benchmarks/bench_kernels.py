"""Timing comparison of the compiled kernel core vs the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 50 --frame 1280x720

Each kernel runs on the same inputs under both backends; outputs are
checked for bit equality before timing, so the numbers always describe
two implementations of the same function. If the compiled module is not
built only the fallback column is shown.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from avtk._kernels import available_backends  # noqa: E402


def parse_size(text: str) -> tuple[int, int]:
    w, _, h = text.partition("x")
    return int(w), int(h)


def best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_cases(frame_size: tuple[int, int], seed: int):
    w, h = frame_size
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, h * w * 3, dtype=np.uint8).tobytes()
    b = rng.integers(0, 256, h * w * 3, dtype=np.uint8).tobytes()
    samples = rng.integers(-32768, 32768, 16000).astype(np.int16)
    quietish = (samples // 300).astype(np.int16)

    def hist_case(mod):
        counts = np.zeros((256, 16000), dtype=np.int64)
        mod.amp_hist_update(counts, samples, 8)
        return counts.tobytes()

    return [
        (f"mean_pixel          {w}x{h}",
         lambda mod: mod.mean_pixel(a)),
        (f"frame_msd           {w}x{h}",
         lambda mod: mod.frame_msd(a, b)),
        (f"bright_bounds       {w}x{h}",
         lambda mod: mod.bright_bounds(a, w, h, 15)),
        ("longest_quiet_run   16000 samples",
         lambda mod: mod.longest_quiet_run(quietish, 100)),
        (f"resize_bilinear     {w}x{h} -> 512x512",
         lambda mod: mod.resize_bilinear(a, w, h, 512, 512)),
        ("amp_hist_update     256x16000",
         hist_case),
    ]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20,
                    help="timed runs per kernel; best run is reported")
    ap.add_argument("--frame", type=parse_size, default=(640, 480),
                    metavar="WxH", help="synthetic frame size")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    backends = available_backends()
    names = [n for n in ("python", "c") if n in backends]
    if "c" not in backends:
        print("note: compiled module not built, timing the fallback only",
              file=sys.stderr)

    cases = build_cases(args.frame, args.seed)
    for label, fn in cases:
        results = {n: fn(backends[n]) for n in names}
        if len(names) == 2 and results["python"] != results["c"]:
            raise SystemExit(f"backend outputs differ for {label}")

    width = max(len(label) for label, _ in cases)
    header = f"{'kernel'.ljust(width)}  " + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for label, fn in cases:
        times = {n: best_of(lambda n=n: fn(backends[n]), args.repeats)
                 for n in names}
        row = label.ljust(width) + "  "
        row += "".join(f"{times[n] * 1e3:>10.3f}ms" for n in names)
        if len(names) == 2:
            row += f"{times['python'] / times['c']:>9.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
