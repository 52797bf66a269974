import numpy as np
import pytest

from ..errors import DimensionError
from .morphology import (
    area_average,
    boundary_mask,
    cell_pixel_counts,
    dilate,
    downsample_to_grid,
)
from .rle import BinaryMask, decode, encode


class TestDownsample:
    """Test area-averaging onto a coarse grid."""

    def test_full_mask(self):
        """Test a full mask gives weight 1.0 everywhere."""
        weights = downsample_to_grid(BinaryMask.full(7, 5), 3, 2)

        np.testing.assert_array_equal(weights, np.ones((2, 3)))

    def test_empty_mask(self):
        """Test an empty mask gives weight 0.0 everywhere."""
        weights = downsample_to_grid(BinaryMask.empty(8, 8), 4, 4)

        np.testing.assert_array_equal(weights, np.zeros((4, 4)))

    def test_top_left_quadrant(self):
        """Test a 2x2 foreground corner in a 4x4 mask."""
        grid = np.zeros((4, 4), dtype=bool)
        grid[:2, :2] = True
        weights = downsample_to_grid(encode(grid), 2, 2)

        np.testing.assert_array_equal(weights, [[1.0, 0.0], [0.0, 0.0]])

    def test_area_conservation_non_divisible(self):
        """Test sum(weight * pixels per cell) equals the mask area."""
        rng = np.random.default_rng(3)
        for _ in range(40):
            height, width = rng.integers(2, 30, size=2)
            h = int(rng.integers(1, height + 1))
            w = int(rng.integers(1, width + 1))
            grid = rng.random((height, width)) < 0.5
            weights = downsample_to_grid(encode(grid), w, h)
            counts = cell_pixel_counts(width, height, w, h)

            assert counts.min() >= 1
            assert abs(float(np.sum(weights * counts)) - grid.sum()) <= 1e-9
            assert weights.min() >= 0.0 and weights.max() <= 1.0

    def test_zero_grid_rejected(self):
        """Test zero-sized grids raise a dimension error."""
        with pytest.raises(DimensionError):
            downsample_to_grid(BinaryMask.full(4, 4), 0, 2)

    def test_grid_finer_than_mask_rejected(self):
        """Test w > W is rejected."""
        with pytest.raises(DimensionError):
            downsample_to_grid(BinaryMask.full(4, 4), 5, 2)

    def test_multichannel_average(self):
        """Test channel-wise averaging of a 2x2 block."""
        values = np.zeros((2, 2, 2))
        values[0, 0] = [1.0, 4.0]
        out = area_average(values, 1, 1)

        np.testing.assert_allclose(out[0, 0], [0.25, 1.0])


class TestBoundary:
    """Test boundary extraction and dilation."""

    def test_single_pixel(self):
        """Test a lone pixel is its own boundary."""
        assert boundary_mask(BinaryMask.full(1, 1), 0) == BinaryMask.full(1, 1)

    def test_empty(self):
        """Test an empty mask has an empty boundary."""
        assert boundary_mask(BinaryMask.empty(5, 5), 2).is_empty()

    def test_square_perimeter(self):
        """Test a 3x3 square in a 5x5 grid against a brute-force scan."""
        grid = np.zeros((5, 5), dtype=bool)
        grid[1:4, 1:4] = True
        edge = decode(boundary_mask(encode(grid), 0))

        expected = np.zeros_like(grid)
        for y in range(5):
            for x in range(5):
                if not grid[y, x]:
                    continue
                for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    ny, nx = y + dy, x + dx
                    if not (0 <= ny < 5 and 0 <= nx < 5) or not grid[ny, nx]:
                        expected[y, x] = True

        np.testing.assert_array_equal(edge, expected)
        assert edge.sum() == 8

    def test_image_edge_counts_as_background(self):
        """Test foreground touching the image border is boundary."""
        edge = boundary_mask(BinaryMask.full(4, 4), 0)

        assert edge.area == 12

    def test_radius_monotone(self):
        """Test larger radius gives a superset of the boundary."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            grid = rng.random((16, 16)) < 0.6
            mask = encode(grid)
            previous = decode(boundary_mask(mask, 0))
            for radius in (1, 2, 3):
                current = decode(boundary_mask(mask, radius))
                assert not np.any(previous & ~current)
                assert not np.any(current & ~grid)
                previous = current

    def test_dilate_single_pixel(self):
        """Test Chebyshev dilation of one pixel."""
        grid = np.zeros((7, 7), dtype=bool)
        grid[3, 3] = True
        grown = decode(dilate(encode(grid), 2))

        assert grown.sum() == 25
        assert grown[1, 1] and grown[5, 5]
        assert not grown[0, 3]
