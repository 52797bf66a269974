import numpy as np
import pytest

from ..errors import DimensionError, InputError
from ..masks.morphology import downsample_to_grid
from ..masks.rle import BinaryMask, encode
from .features import (
    FeatureMap,
    TokenFeatures,
    pooled_frame_features,
    pooled_tracklet_feature,
)


def weighted_loop(fmap, weights):
    total = 0.0
    acc = np.zeros(fmap.shape[2])
    for y in range(fmap.shape[0]):
        for x in range(fmap.shape[1]):
            acc += weights[y, x] * fmap[y, x]
            total += weights[y, x]
    return acc / total


class TestPooledTrackletFeature:
    """Test masked average pooling."""

    def setup_method(self):
        self.rng = np.random.default_rng(0)

    def test_constant_map(self):
        """Test a constant map pools to that constant."""
        fmap = FeatureMap(np.full((2, 2, 3), 0.7))
        mask = encode(self.rng.random((8, 8)) < 0.5)

        np.testing.assert_allclose(pooled_tracklet_feature(fmap, mask), [0.7, 0.7, 0.7])

    def test_single_cell(self):
        """Test a mask exactly covering one cell returns that cell."""
        data = self.rng.standard_normal((2, 2, 4))
        grid = np.zeros((8, 8), dtype=bool)
        grid[4:8, 0:4] = True

        pooled = pooled_tracklet_feature(FeatureMap(data), encode(grid))

        np.testing.assert_allclose(pooled, data[1, 0])

    def test_partial_weights(self):
        """Test cells covered 1.0 and 0.5 give (u + 0.5v) / 1.5."""
        data = np.zeros((1, 2, 2))
        data[0, 0] = [1.0, 2.0]
        data[0, 1] = [3.0, -1.0]
        grid = np.zeros((2, 4), dtype=bool)
        grid[:, 0:2] = True
        grid[0, 2:4] = True

        pooled = pooled_tracklet_feature(FeatureMap(data), encode(grid))

        np.testing.assert_allclose(pooled, (data[0, 0] + 0.5 * data[0, 1]) / 1.5)

    def test_full_resolution_is_masked_mean(self):
        """Test w == W and h == H gives the plain masked average."""
        data = self.rng.standard_normal((6, 5, 3))
        grid = self.rng.random((6, 5)) < 0.4
        grid[0, 0] = True

        pooled = pooled_tracklet_feature(FeatureMap(data), encode(grid))

        np.testing.assert_allclose(pooled, data[grid].mean(axis=0))

    def test_matches_weighted_loop_and_envelope(self):
        """Test random cases against a loop and the convex envelope."""
        for _ in range(50):
            data = self.rng.standard_normal((3, 4, 2))
            grid = self.rng.random((12, 16)) < 0.3
            grid[5, 5] = True
            mask = encode(grid)
            weights = downsample_to_grid(mask, 4, 3)

            pooled = pooled_tracklet_feature(FeatureMap(data), mask)

            np.testing.assert_allclose(pooled, weighted_loop(data, weights))
            covered = data[weights > 0]
            assert np.all(pooled >= covered.min(axis=0) - 1e-12)
            assert np.all(pooled <= covered.max(axis=0) + 1e-12)

    def test_empty_mask_pools_to_zero(self):
        """Test an empty mask gives the zero vector."""
        fmap = FeatureMap(np.ones((2, 2, 3)))

        pooled = pooled_tracklet_feature(fmap, BinaryMask.empty(8, 8))

        np.testing.assert_array_equal(pooled, np.zeros(3))

    def test_stack(self):
        """Test frame pooling stacks one row per mask."""
        fmap = FeatureMap(np.ones((2, 2, 3)))
        masks = [BinaryMask.full(8, 8), BinaryMask.empty(8, 8)]

        pooled = pooled_frame_features(fmap, masks)

        np.testing.assert_array_equal(pooled, [[1, 1, 1], [0, 0, 0]])

    def test_grid_finer_than_mask(self):
        """Test a feature grid larger than the mask is rejected."""
        with pytest.raises(DimensionError):
            pooled_tracklet_feature(
                FeatureMap(np.ones((4, 4, 1))), BinaryMask.full(2, 2)
            )


class TestFeatureValidation:
    """Test feature container checks."""

    def test_non_finite(self):
        """Test NaN features are rejected."""
        with pytest.raises(InputError):
            FeatureMap(np.full((1, 1, 2), np.nan))

    def test_empty_tokens(self):
        """Test an expression needs at least one token."""
        with pytest.raises(DimensionError):
            TokenFeatures(np.zeros((0, 4)))
