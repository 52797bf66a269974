"""
Grounders: turn a tracklet set plus features into per-frame tracklet scores.
"""

import logging
from abc import ABC, abstractmethod
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ConfigError, DimensionError, InputError
from ..tracklets.tracklet import TrackletSet
from .features import FeatureMap, TokenFeatures, pooled_frame_features
from .model import GroundingModel, get_preset, load_model
from .scoring import ensemble_average, naive_similarity_grounding
from .transformer import ground_frame

logger = logging.getLogger(__name__)


def grounded_frames(num_frames: int, frame_stride: int = 1) -> list[int]:
    if frame_stride < 1:
        raise ConfigError(f"Frame stride must be >= 1, got {frame_stride}")
    return list(range(0, num_frames, frame_stride))


class BaseGrounder(ABC):
    """Abstract base class for tracklet-language grounding."""

    @abstractmethod
    def score_frame(
        self, tracklet_feats: np.ndarray, lang_feats: TokenFeatures
    ) -> np.ndarray:
        """
        Score every tracklet on one frame.

        Args:
            tracklet_feats: (P, D) pooled tracklet features of the frame
            lang_feats: Token features of the expression

        Returns:
            P-vector of probabilities summing to 1
        """
        pass

    @abstractmethod
    def get_config(self) -> dict[str, Any]:
        pass

    def ground(
        self,
        tracklets: TrackletSet,
        feature_maps: Sequence[FeatureMap],
        lang_feats: TokenFeatures,
        frame_stride: int = 1,
        workers: int = 1,
    ) -> np.ndarray:
        """
        Per-frame score matrix (T', P) over the frames selected by the stride.

        Frames are scored independently and assembled in frame order.
        """
        if len(tracklets) == 0:
            raise InputError(f"Video {tracklets.video_id} has no tracklets to ground")
        if len(feature_maps) != tracklets.num_frames:
            raise DimensionError(
                f"Video {tracklets.video_id} has {tracklets.num_frames} frames "
                f"but {len(feature_maps)} feature maps"
            )

        def score(t: int) -> np.ndarray:
            masks = [tracklet.masks[t] for tracklet in tracklets]
            pooled = pooled_frame_features(feature_maps[t], masks)
            return self.score_frame(pooled, lang_feats)

        frames = grounded_frames(tracklets.num_frames, frame_stride)
        if workers > 1 and len(frames) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(score, frames))
        else:
            rows = [score(t) for t in frames]
        return np.stack(rows)


class NaiveGrounder(BaseGrounder):
    """Cosine similarity to the mean token feature."""

    def score_frame(self, tracklet_feats, lang_feats):
        return naive_similarity_grounding(tracklet_feats, lang_feats)

    def get_config(self) -> dict[str, Any]:
        return {"name": "naive"}


class TransformerGrounder(BaseGrounder):
    """Joint transformer over tracklet and language tokens."""

    def __init__(self, model: GroundingModel, source: str = ""):
        self.model = model
        self.source = source

    def score_frame(self, tracklet_feats, lang_feats):
        return ground_frame(tracklet_feats, lang_feats, self.model)

    def get_config(self) -> dict[str, Any]:
        return {
            "name": "transformer",
            "checkpoint": self.source,
            "dim": self.model.dim,
            "layers": len(self.model.layers),
            "heads": self.model.num_heads,
        }


class EnsembleGrounder(BaseGrounder):
    """Averages the per-frame probabilities of its members."""

    def __init__(self, members: Sequence[BaseGrounder]):
        if not members:
            raise ConfigError("Ensemble needs at least one member")
        self.members = list(members)

    def score_frame(self, tracklet_feats, lang_feats):
        rows = [m.score_frame(tracklet_feats, lang_feats) for m in self.members]
        return ensemble_average([r[None, :] for r in rows])[0]

    def ground(self, tracklets, feature_maps, lang_feats, frame_stride=1, workers=1):
        return ensemble_average(
            [
                m.ground(tracklets, feature_maps, lang_feats, frame_stride, workers)
                for m in self.members
            ]
        )

    def get_config(self) -> dict[str, Any]:
        return {"name": "ensemble", "members": [m.get_config() for m in self.members]}


GROUNDERS = {
    "naive": NaiveGrounder,
    "transformer": TransformerGrounder,
}


def create_grounder(
    kind: str, checkpoints: Sequence[str | Path] = (), preset: str = "desk"
) -> BaseGrounder:
    """
    Build a grounder by name.

    Transformer grounding loads each checkpoint with the preset's head
    count; two or more checkpoints form an ensemble.
    """
    if kind not in GROUNDERS:
        raise ConfigError(f"Unknown grounder '{kind}'. Available: {list(GROUNDERS)}")
    if kind == "naive":
        return NaiveGrounder()
    if not checkpoints:
        raise ConfigError("Transformer grounding needs at least one checkpoint")

    heads = get_preset(preset).heads
    members = [
        TransformerGrounder(load_model(path, heads), str(path)) for path in checkpoints
    ]
    if len(members) == 1:
        return members[0]
    logger.info(f"Ensembling {len(members)} grounding models")
    return EnsembleGrounder(members)
