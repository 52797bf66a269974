import json

import numpy as np
import pytest

from ..errors import DimensionError, FormatError
from .rle import (
    BinaryMask,
    decode,
    encode,
    frame_intersection_area,
    frame_iou,
    frame_union_area,
    translate,
)


def grid_from_pixels(pixels, shape=(3, 3)):
    grid = np.zeros(shape, dtype=bool)
    for row, col in pixels:
        grid[row, col] = True
    return grid


class TestEncodeDecode:
    """Test RLE encoding against dense grids."""

    def test_all_zeros(self):
        """Test empty 4x4 grid encodes to a single background run."""
        mask = encode(np.zeros((4, 4), dtype=bool))

        assert mask.runs == (16,)
        assert mask.area == 0

    def test_all_ones(self):
        """Test full 4x4 grid starts with a zero-length background run."""
        mask = encode(np.ones((4, 4), dtype=bool))

        assert mask.runs == (0, 16)
        assert mask.area == 16

    def test_column_major_order(self):
        """Test runs walk down each column before moving right."""
        grid = np.array([[1, 0], [1, 0], [0, 1]], dtype=bool)
        mask = encode(grid)

        # column 0: 1,1,0  column 1: 0,0,1
        assert mask.runs == (0, 2, 3, 1)
        assert mask.width == 2
        assert mask.height == 3

    def test_round_trip_random_grids(self):
        """Test decode(encode(g)) == g for random grids."""
        rng = np.random.default_rng(7)
        for _ in range(50):
            h, w = rng.integers(1, 12, size=2)
            grid = rng.random((h, w)) < 0.4
            np.testing.assert_array_equal(decode(encode(grid)), grid)

    def test_zero_sized_grid_rejected(self):
        """Test zero-sized grids raise a dimension error."""
        with pytest.raises(DimensionError):
            encode(np.zeros((0, 4), dtype=bool))

    def test_non_canonical_runs_rejected(self):
        """Test interior zero runs and wrong totals are rejected."""
        with pytest.raises(DimensionError):
            BinaryMask(2, 2, (1, 0, 3))
        with pytest.raises(DimensionError):
            BinaryMask(2, 2, (1, 2))

    def test_default_runs_is_empty_mask(self):
        """Test a mask built without runs is all background."""
        mask = BinaryMask(3, 2)

        assert mask.runs == (6,)
        assert mask == BinaryMask.empty(3, 2)


class TestSetOperations:
    """Test run-merging intersection and union."""

    def test_identity(self):
        """Test a mask against itself."""
        grid = np.zeros((4, 4), dtype=bool)
        grid[0, :3] = True
        grid[2, 1:] = True
        grid[3, 0] = True
        mask = encode(grid)

        assert mask.area == 7
        assert frame_intersection_area(mask, mask) == 7
        assert frame_union_area(mask, mask) == 7

    def test_disjoint(self):
        """Test disjoint masks with areas 3 and 4."""
        a = np.zeros((4, 4), dtype=bool)
        b = np.zeros((4, 4), dtype=bool)
        a[0, :3] = True
        b[3, :4] = True

        assert frame_intersection_area(encode(a), encode(b)) == 0
        assert frame_union_area(encode(a), encode(b)) == 7

    def test_small_overlap(self):
        """Test the two-pixel masks sharing one pixel."""
        a = encode(grid_from_pixels([(0, 0), (0, 1)]))
        b = encode(grid_from_pixels([(0, 1), (0, 2)]))

        assert frame_intersection_area(a, b) == 1
        assert frame_union_area(a, b) == 3

    def test_matches_dense_oracle(self):
        """Test intersection/union against dense pixel counting."""
        rng = np.random.default_rng(11)
        for _ in range(300):
            h, w = rng.integers(1, 33, size=2)
            ga = rng.random((h, w)) < rng.random()
            gb = rng.random((h, w)) < rng.random()
            a, b = encode(ga), encode(gb)

            inter = int(np.sum(ga & gb))
            union = int(np.sum(ga | gb))
            assert frame_intersection_area(a, b) == inter
            assert frame_intersection_area(b, a) == inter
            assert frame_union_area(a, b) == union
            assert frame_union_area(b, a) == union

    def test_dimension_mismatch(self):
        """Test masks of different sizes cannot be compared."""
        with pytest.raises(DimensionError):
            frame_intersection_area(BinaryMask.empty(2, 2), BinaryMask.empty(3, 2))

    def test_iou_of_two_empty_masks(self):
        """Test the both-empty convention."""
        assert frame_iou(BinaryMask.empty(4, 4), BinaryMask.empty(4, 4)) == 1.0


class TestSerialization:
    """Test the JSON mask object."""

    def test_to_dict_height_first(self):
        """Test size is written height first."""
        mask = encode(np.ones((2, 5), dtype=bool))

        assert mask.to_dict() == {"size": [2, 5], "counts": [0, 10]}

    def test_json_round_trip_is_byte_identical(self):
        """Test write -> read -> write produces the same text."""
        grid = np.zeros((6, 5), dtype=bool)
        grid[1:4, 2:5] = True
        text = json.dumps(encode(grid).to_dict())
        again = json.dumps(BinaryMask.from_dict(json.loads(text)).to_dict())

        assert text == again

    def test_malformed_object(self):
        """Test missing keys raise a format error."""
        with pytest.raises(FormatError):
            BinaryMask.from_dict({"counts": [4]})


class TestTranslate:
    """Test clipping translation."""

    def test_shift_right(self):
        """Test a shift moves every pixel."""
        grid = np.zeros((5, 5), dtype=bool)
        grid[2, 2] = True
        moved = decode(translate(encode(grid), 1, 0))

        assert moved[2, 3]
        assert moved.sum() == 1

    def test_shift_clips_at_border(self):
        """Test pixels leaving the frame are dropped."""
        grid = np.zeros((4, 4), dtype=bool)
        grid[:, 2:] = True
        moved = translate(encode(grid), 1, 0)

        assert moved.area == 4
        assert translate(encode(grid), 5, 0).is_empty()
