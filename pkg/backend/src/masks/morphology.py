"""
Resampling and boundary operations on binary masks.

Area averaging maps every full-resolution pixel to exactly one cell of the
coarse grid by pixel-center containment, so grids that do not divide the
image size evenly still conserve the mask area.
"""

import numpy as np
from scipy import ndimage

from ..errors import DimensionError, InputError
from .rle import BinaryMask, decode, encode

# 4-connected cross used to find boundary pixels
_CROSS = ndimage.generate_binary_structure(2, 1)


def cell_index(width: int, height: int, w: int, h: int) -> np.ndarray:
    """Flat cell index (row-major over the w x h grid) for every pixel."""
    if w <= 0 or h <= 0:
        raise DimensionError(f"Grid dimensions must be positive, got {w}x{h}")
    if w > width or h > height:
        raise DimensionError(
            f"Grid {w}x{h} is finer than the {width}x{height} mask it resamples"
        )
    # floor((x + 0.5) * w / W) in exact integer arithmetic
    cx = ((2 * np.arange(width) + 1) * w) // (2 * width)
    cy = ((2 * np.arange(height) + 1) * h) // (2 * height)
    return cy[:, None] * w + cx[None, :]


def area_average(values: np.ndarray, w: int, h: int) -> np.ndarray:
    """
    Average a dense (H, W) or (H, W, C) array onto a (h, w[, C]) grid.

    Args:
        values: Per-pixel values at full resolution
        w: Grid width in cells
        h: Grid height in cells

    Returns:
        Cell means; every cell receives at least one pixel when w <= W and h <= H
    """
    values = np.asarray(values, dtype=np.float64)
    height, width = values.shape[:2]
    index = cell_index(width, height, w, h).ravel()
    counts = cell_pixel_counts(width, height, w, h).ravel().astype(np.float64)

    if values.ndim == 2:
        sums = np.bincount(index, weights=values.ravel(), minlength=w * h)
        return (sums / counts).reshape(h, w)

    channels = values.shape[2]
    flat = values.reshape(-1, channels)
    sums = np.zeros((w * h, channels))
    np.add.at(sums, index, flat)
    return (sums / counts[:, None]).reshape(h, w, channels)


def cell_pixel_counts(width: int, height: int, w: int, h: int) -> np.ndarray:
    """Number of full-resolution pixels assigned to each (h, w) cell."""
    index = cell_index(width, height, w, h).ravel()
    return np.bincount(index, minlength=w * h).reshape(h, w)


def downsample_to_grid(mask: BinaryMask, w: int, h: int) -> np.ndarray:
    """Fraction of each coarse cell covered by the mask, shape (h, w)."""
    if mask.is_empty():
        # still validates the grid against the mask size
        cell_index(mask.width, mask.height, w, h)
        return np.zeros((h, w))
    return area_average(decode(mask), w, h)


def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def dilate(mask: BinaryMask, radius: int) -> BinaryMask:
    """Grow a mask by `radius` pixels in Chebyshev distance."""
    if radius < 0:
        raise InputError(f"Dilation radius must be non-negative, got {radius}")
    if radius == 0 or mask.is_empty():
        return mask
    grown = ndimage.binary_dilation(decode(mask), structure=_square(radius))
    return encode(grown)


def boundary_mask(mask: BinaryMask, radius: int = 0) -> BinaryMask:
    """
    Foreground pixels within `radius` (Chebyshev) of the mask boundary.

    A boundary pixel is a foreground pixel with a 4-neighbour in the
    background or outside the image.
    """
    if radius < 0:
        raise InputError(f"Boundary radius must be non-negative, got {radius}")
    if mask.is_empty():
        return mask
    grid = decode(mask)
    interior = ndimage.binary_erosion(grid, structure=_CROSS, border_value=0)
    edge = grid & ~interior
    if radius > 0:
        edge = ndimage.binary_dilation(edge, structure=_square(radius)) & grid
    return encode(edge)
