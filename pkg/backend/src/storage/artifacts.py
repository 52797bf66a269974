"""
On-disk store for intermediate pipeline artifacts.

Every stage writes its output per video so any stage can be re-run on its
own:

    <root>/<video>/candidates.json   propagated candidate tracklets
    <root>/<video>/nms.json          tracklets kept by tracklet NMS
    <root>/<video>/scores.json       per-frame scores, fused scores, selection
    <root>/<video>/prediction.json   selected mask sequence
"""

import json
import logging
import tempfile
from pathlib import Path
from typing import Any

from ..errors import FormatError, InputError
from ..tracklets.tracklet import (
    MaskSequence,
    TrackletSet,
    dumps,
    load_mask_sequence,
    load_tracklet_set,
    save_mask_sequence,
    save_tracklet_set,
)

logger = logging.getLogger(__name__)

CANDIDATES = "candidates.json"
NMS = "nms.json"
SCORES = "scores.json"
PREDICTION = "prediction.json"


class ArtifactStore:
    """Per-video artifact files under one root directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @classmethod
    def temporary(cls, prefix: str = "tlground-") -> "ArtifactStore":
        """Store in a fresh system temp directory; the caller owns its cleanup."""
        return cls(tempfile.mkdtemp(prefix=prefix))

    def video_dir(self, video_id: str) -> Path:
        unsafe = "/" in video_id or "\\" in video_id or video_id in (".", "..")
        if not video_id or unsafe:
            raise InputError(
                f"Video id '{video_id}' cannot be used as a directory name"
            )
        path = self.root / video_id
        path.mkdir(exist_ok=True)
        return path

    def path(self, video_id: str, name: str) -> Path:
        return self.video_dir(video_id) / name

    def write_candidates(self, tracklets: TrackletSet) -> Path:
        path = self.path(tracklets.video_id, CANDIDATES)
        save_tracklet_set(tracklets, path)
        return path

    def write_nms(self, tracklets: TrackletSet) -> Path:
        path = self.path(tracklets.video_id, NMS)
        save_tracklet_set(tracklets, path)
        return path

    def read_nms(self, video_id: str) -> TrackletSet:
        return load_tracklet_set(self._existing(video_id, NMS))

    def write_scores(self, video_id: str, scores: dict[str, Any]) -> Path:
        path = self.path(video_id, SCORES)
        path.write_text(dumps(scores), encoding="utf-8")
        return path

    def read_scores(self, video_id: str) -> dict[str, Any]:
        path = self._existing(video_id, SCORES)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise FormatError(f"{path}: invalid JSON ({e})") from e

    def write_prediction(self, prediction: MaskSequence) -> Path:
        path = self.path(prediction.video_id, PREDICTION)
        save_mask_sequence(prediction, path)
        return path

    def read_prediction(self, video_id: str) -> MaskSequence:
        return load_mask_sequence(self._existing(video_id, PREDICTION))

    def has_predictions(self) -> bool:
        return any(self.root.glob(f"*/{PREDICTION}"))

    def predictions(self) -> dict[str, MaskSequence]:
        """Every stored prediction, keyed by video id."""
        paths = sorted(self.root.glob(f"*/{PREDICTION}"))
        return {p.parent.name: load_mask_sequence(p) for p in paths}

    def _existing(self, video_id: str, name: str) -> Path:
        path = self.root / video_id / name
        if not path.is_file():
            raise InputError(
                f"No {name} stored for video {video_id} under {self.root}"
            )
        return path
