"""Similarity baseline, per-frame to video fusion and ensemble averaging."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ..errors import DimensionError, InputError
from .features import TokenFeatures

ROW_SUM_TOLERANCE = 1e-6


def cosine_similarity(rows: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """Cosine of every row with `vector`; zero vectors give 0."""
    norms = np.linalg.norm(rows, axis=1) * np.linalg.norm(vector)
    dots = rows @ vector
    return np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)


def naive_similarity_grounding(
    tracklet_feats: np.ndarray, lang_feats: TokenFeatures
) -> np.ndarray:
    """Softmax over cosines between each tracklet feature and the mean token."""
    tracklet_feats = np.asarray(tracklet_feats, dtype=np.float64)
    if tracklet_feats.ndim != 2 or tracklet_feats.shape[0] < 1:
        raise InputError(
            "Tracklet features must be (P, D) with P >= 1, "
            f"got {tracklet_feats.shape}"
        )
    if tracklet_feats.shape[1] != lang_feats.channels:
        raise DimensionError(
            f"Feature width mismatch: tracklets {tracklet_feats.shape[1]}, "
            f"language {lang_feats.channels}"
        )
    sentence = lang_feats.data.mean(axis=0)
    return softmax(cosine_similarity(tracklet_feats, sentence))


def check_score_matrix(scores: np.ndarray, name: str = "scores") -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] == 0 or scores.shape[1] == 0:
        raise InputError(
            f"{name} must be a non-empty (T, P) matrix, got shape {scores.shape}"
        )
    off_sum = np.abs(scores.sum(axis=1) - 1) > ROW_SUM_TOLERANCE
    if np.any(scores < 0) or np.any(scores > 1) or np.any(off_sum):
        raise InputError(f"{name} rows are not probability vectors")
    return scores


@dataclass(frozen=True, eq=False)
class GroundingResult:
    per_frame: np.ndarray
    fused: np.ndarray
    selected: int

    @property
    def num_frames(self) -> int:
        return self.per_frame.shape[0]

    def to_dict(self) -> dict:
        return {
            "per_frame": self.per_frame.tolist(),
            "fused": self.fused.tolist(),
            "selected": self.selected,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroundingResult":
        try:
            per_frame = np.asarray(data["per_frame"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"Malformed grounding result: {e}") from e
        return fuse_and_select(per_frame)


def fuse_and_select(per_frame: np.ndarray) -> GroundingResult:
    """Average scores over frames and pick the best tracklet, lowest index on ties."""
    per_frame = check_score_matrix(per_frame, "per-frame scores")
    fused = per_frame.mean(axis=0)
    return GroundingResult(
        per_frame=per_frame, fused=fused, selected=int(np.argmax(fused))
    )


def ensemble_average(results: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise mean of per-frame score matrices from several models."""
    if not results:
        raise InputError("Ensemble needs at least one score matrix")
    matrices = [
        check_score_matrix(r, f"ensemble member {i}") for i, r in enumerate(results)
    ]
    shapes = {m.shape for m in matrices}
    if len(shapes) != 1:
        raise DimensionError(
            f"Ensemble members have different shapes: {sorted(shapes)}"
        )
    return np.mean(np.stack(matrices), axis=0)
