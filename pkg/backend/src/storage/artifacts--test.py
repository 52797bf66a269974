"""
Tests for the per-video artifact store.
"""

from pathlib import Path

import pytest

from ..errors import InputError
from ..masks.rle import BinaryMask
from ..tracklets.tracklet import MaskSequence, Tracklet, TrackletSet, load_tracklet_set
from .artifacts import ArtifactStore


def one_tracklet_set(video_id="v1"):
    masks = (BinaryMask.full(4, 4), BinaryMask.empty(4, 4))
    tracklet = Tracklet("0000", 0, "htc", masks, 0.9, (1.0, 0.5))
    return TrackletSet(video_id, 4, 4, 2, (tracklet,))


class TestArtifactStore:
    """Test artifact read/write operations."""

    def setup_method(self):
        """Set up a store in a fresh temp directory."""
        self.store = ArtifactStore.temporary()

    def test_temporary_root_exists(self):
        """Test the temporary store creates its root."""
        assert Path(self.store.root).is_dir()

    def test_tracklet_sets_round_trip(self):
        """Test candidates and NMS output reload unchanged."""
        tracklets = one_tracklet_set()

        path = self.store.write_candidates(tracklets)
        self.store.write_nms(tracklets)

        assert path == self.store.root / "v1" / "candidates.json"
        assert load_tracklet_set(path) == tracklets
        assert self.store.read_nms("v1") == tracklets

    def test_scores_round_trip(self):
        """Test score dumps reload as the same dict."""
        scores = {"video_id": "v1", "per_frame": [[1.0]], "fused": [1.0], "selected": 0}

        self.store.write_scores("v1", scores)

        assert self.store.read_scores("v1") == scores

    def test_predictions(self):
        """Test stored predictions are collected by video id."""
        for video_id in ("b", "a"):
            prediction = MaskSequence(video_id, (BinaryMask.full(2, 2),))
            self.store.write_prediction(prediction)

        predictions = self.store.predictions()

        assert list(predictions) == ["a", "b"]
        assert self.store.read_prediction("a").masks == (BinaryMask.full(2, 2),)

    def test_missing_artifact(self):
        """Test reading an artifact that was never written."""
        with pytest.raises(InputError, match="nms.json"):
            self.store.read_nms("nothing")

    def test_unsafe_video_id(self):
        """Test ids that would escape the root are rejected."""
        with pytest.raises(InputError):
            self.store.video_dir("../outside")
