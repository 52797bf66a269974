"""
Run-length encoded binary masks.

Masks are stored as alternating background/foreground run lengths over the
pixels in column-major order (top to bottom, then left to right), always
starting with a background run. This is the uncompressed-counts layout
used by common segmentation mask formats, so `to_dict` output can be read
by those tools directly.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from ..errors import DimensionError, FormatError


@dataclass(frozen=True)
class BinaryMask:
    """One frame's binary segmentation at full resolution."""

    width: int
    height: int
    runs: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DimensionError(
                f"Mask dimensions must be positive, got {self.width}x{self.height}"
            )
        runs = tuple(int(r) for r in self.runs) or (self.width * self.height,)
        object.__setattr__(self, "runs", runs)
        _check_canonical(runs, self.width * self.height)

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(width, height, (width * height,))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(width, height, (0, width * height))

    @property
    def shape(self) -> tuple[int, int]:
        """Dense array shape, (height, width)."""
        return (self.height, self.width)

    @cached_property
    def intervals(self) -> tuple[tuple[int, int], ...]:
        """Foreground runs as half-open [start, end) offsets in column-major order."""
        spans = []
        pos = 0
        for i, run in enumerate(self.runs):
            if i % 2 == 1:
                spans.append((pos, pos + run))
            pos += run
        return tuple(spans)

    @cached_property
    def area(self) -> int:
        return sum(self.runs[1::2])

    def is_empty(self) -> bool:
        return self.area == 0

    def to_dict(self) -> dict[str, Any]:
        return {"size": [self.height, self.width], "counts": list(self.runs)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BinaryMask":
        try:
            height, width = (int(v) for v in data["size"])
            counts = [int(c) for c in data["counts"]]
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"Malformed RLE mask object: {e}") from e
        if any(c < 0 for c in counts):
            raise FormatError("RLE counts must be non-negative")
        return cls(width, height, tuple(counts))


def _check_canonical(runs: tuple[int, ...], total: int) -> None:
    if sum(runs) != total:
        raise DimensionError(f"RLE runs sum to {sum(runs)}, expected {total}")
    if any(r < 0 for r in runs):
        raise DimensionError("RLE runs must be non-negative")
    if any(r == 0 for r in runs[1:]):
        raise DimensionError("RLE runs are not canonical: zero-length interior run")


def encode(grid: np.ndarray) -> BinaryMask:
    """Encode a dense (height, width) binary grid."""
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.shape[0] == 0 or grid.shape[1] == 0:
        raise DimensionError(f"Cannot encode grid of shape {grid.shape}")
    height, width = grid.shape
    flat = grid.astype(bool).ravel(order="F")
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return BinaryMask(width, height, tuple(runs))


def decode(mask: BinaryMask) -> np.ndarray:
    """Dense (height, width) boolean grid of a mask."""
    values = (np.arange(len(mask.runs)) % 2).astype(bool)
    flat = np.repeat(values, mask.runs)
    return flat.reshape(mask.shape, order="F")


def _require_same_dims(a: BinaryMask, b: BinaryMask) -> None:
    if a.shape != b.shape:
        raise DimensionError(
            f"Mask dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def frame_intersection_area(a: BinaryMask, b: BinaryMask) -> int:
    """Overlap in pixels, merged run-by-run without densifying."""
    _require_same_dims(a, b)
    spans_a, spans_b = a.intervals, b.intervals
    i = j = 0
    total = 0
    while i < len(spans_a) and j < len(spans_b):
        start_a, end_a = spans_a[i]
        start_b, end_b = spans_b[j]
        overlap = min(end_a, end_b) - max(start_a, start_b)
        if overlap > 0:
            total += overlap
        if end_a < end_b:
            i += 1
        else:
            j += 1
    return total


def frame_union_area(a: BinaryMask, b: BinaryMask) -> int:
    return a.area + b.area - frame_intersection_area(a, b)


def frame_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Per-frame IoU; two empty masks count as a perfect match."""
    inter = frame_intersection_area(a, b)
    union = a.area + b.area - inter
    if union == 0:
        return 1.0
    return inter / union


def translate(mask: BinaryMask, dx: int, dy: int) -> BinaryMask:
    """Shift a mask by (dx, dy) pixels, dropping whatever leaves the frame."""
    if mask.is_empty() or (dx == 0 and dy == 0):
        return mask
    grid = decode(mask)
    shifted = np.zeros_like(grid)
    h, w = grid.shape
    if abs(dx) >= w or abs(dy) >= h:
        return BinaryMask.empty(w, h)
    src_y = slice(max(0, -dy), h - max(0, dy))
    dst_y = slice(max(0, dy), h - max(0, -dy))
    src_x = slice(max(0, -dx), w - max(0, dx))
    dst_x = slice(max(0, dx), w - max(0, -dx))
    shifted[dst_y, dst_x] = grid[src_y, src_x]
    return encode(shifted)
