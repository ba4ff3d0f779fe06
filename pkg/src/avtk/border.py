"""Dark border detection and removal.

A border line is an edge row or column with no pixel above the
threshold in any channel; such lines are peeled until every edge keeps
at least one bright pixel. Peeling only ever removes lines that are
dark inside the current box, and the box always contains every bright
pixel, so the fixpoint is exactly the bounding box of bright pixels.
compute_crop_box finds that box in one scan instead of iterating.

The box is computed once per video, on the middle frame, and applied
to every frame of that video.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import _kernels
from .errors import BoxOutOfBounds, FrameAllDark
from .media import FrameBuffer


@dataclass(frozen=True)
class CropBox:
    """Axis-aligned crop region, origin top-left, in pixels."""

    x: int
    y: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0:
            raise ValueError("crop origin must be non-negative")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("crop size must be positive")

    def fits(self, frame: FrameBuffer) -> bool:
        return self.x + self.width <= frame.width and self.y + self.height <= frame.height


def compute_crop_box(frame: FrameBuffer, threshold: int = 15,
                     min_crop_dim: int = 64) -> CropBox:
    """Bounding box of content brighter than the border threshold.

    A pixel counts as content when any channel is strictly above
    threshold. Raises FrameAllDark when nothing qualifies or the
    surviving region is narrower than min_crop_dim on either side.
    """
    bounds = _kernels.bright_bounds(frame.pixels, frame.width, frame.height, threshold)
    if bounds is None:
        raise FrameAllDark(
            f"no pixel above level {threshold} in {frame.width}x{frame.height} frame"
        )
    x0, y0, x1, y1 = bounds
    box = CropBox(x=x0, y=y0, width=x1 - x0 + 1, height=y1 - y0 + 1)
    if box.width < min_crop_dim or box.height < min_crop_dim:
        raise FrameAllDark(
            f"content region {box.width}x{box.height} is below the "
            f"{min_crop_dim} pixel minimum"
        )
    return box


def apply_crop(frame: FrameBuffer, box: CropBox) -> FrameBuffer:
    """Cut the box out of the frame, keeping its timestamp."""
    if not box.fits(frame):
        raise BoxOutOfBounds(
            f"box {box} does not fit in {frame.width}x{frame.height} frame"
        )
    if box.x == 0 and box.y == 0 and box.width == frame.width and box.height == frame.height:
        return frame
    arr = frame.as_array()[box.y:box.y + box.height, box.x:box.x + box.width]
    return FrameBuffer(
        width=box.width,
        height=box.height,
        pixels=arr.tobytes(),
        timestamp=frame.timestamp,
    )
