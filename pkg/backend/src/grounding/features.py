"""
Ingested visual and linguistic features, and masked average pooling.

Feature maps are stored as (h, w, D) arrays: row index is the cell's y
coordinate. Token features are (L, D).
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, InputError
from ..masks.morphology import downsample_to_grid
from ..masks.rle import BinaryMask


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Visual grid features of one frame."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) <= 0:
            raise DimensionError(
                f"Feature map must be (h, w, D) with positive dims, got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise InputError("Feature map contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class TokenFeatures:
    """Linguistic token features of one expression."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionError(
                f"Token features must be (L, D) with L >= 1, got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise InputError("Token features contain non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]


def pooled_tracklet_feature(fmap: FeatureMap, mask: BinaryMask) -> np.ndarray:
    """
    Average the feature cells under a mask, weighted by cell coverage.

    The mask is area-averaged onto the feature grid first; a mask that
    covers nothing pools to the zero vector.
    """
    weights = downsample_to_grid(mask, fmap.width, fmap.height)
    total = weights.sum()
    if total == 0:
        return np.zeros(fmap.channels)
    return np.tensordot(weights, fmap.data, axes=([0, 1], [0, 1])) / total


def pooled_frame_features(fmap: FeatureMap, masks: list[BinaryMask]) -> np.ndarray:
    """Stack pooled features of several masks into a (P, D) matrix."""
    if not masks:
        return np.zeros((0, fmap.channels))
    return np.stack([pooled_tracklet_feature(fmap, m) for m in masks])
