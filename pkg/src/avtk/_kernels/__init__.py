"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback
is always available. AVTK_KERNELS overrides: "c" requires the compiled
module (ImportError otherwise), "py" forces the fallback, "auto" or
unset picks compiled-if-available. Both backends are bit-identical, so
the choice only affects speed.
"""

from __future__ import annotations

import os

from . import fallback as _fallback

__all__ = [
    "BACKEND",
    "mean_pixel",
    "frame_msd",
    "bright_bounds",
    "longest_quiet_run",
    "resize_bilinear",
    "amp_hist_update",
    "available_backends",
    "get_backend",
]

_choice = os.environ.get("AVTK_KERNELS", "auto").strip().lower() or "auto"
if _choice not in ("auto", "c", "py", "python"):
    raise ImportError(f"AVTK_KERNELS must be auto, c, or py, not {_choice!r}")

_impl = None
if _choice in ("auto", "c"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "c":
            raise ImportError(
                "AVTK_KERNELS=c but the compiled kernel module is not built"
            )
if _impl is None:
    _impl = _fallback

BACKEND: str = _impl.BACKEND_NAME

mean_pixel = _impl.mean_pixel
frame_msd = _impl.frame_msd
bright_bounds = _impl.bright_bounds
longest_quiet_run = _impl.longest_quiet_run
resize_bilinear = _impl.resize_bilinear
amp_hist_update = _impl.amp_hist_update


def available_backends() -> dict[str, object]:
    """Importable backend modules keyed by name, for tests and benchmarks."""
    out: dict[str, object] = {"python": _fallback}
    try:
        from . import _core
        out["c"] = _core
    except ImportError:
        pass
    return out


def get_backend(name: str):
    mods = available_backends()
    if name not in mods:
        raise KeyError(f"kernel backend {name!r} is not available")
    return mods[name]
